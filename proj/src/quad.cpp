#include "vecsym/quad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "vecsym/ad.hpp"
#include "vecsym/batch.hpp"
#include "vecsym/error.hpp"
#include "vecsym/ocp.hpp"

namespace vecsym {

const std::array<std::string, QuadParams::kSize>& QuadParams::names() {
    static const std::array<std::string, kSize> n{"m",    "I",    "r_arm", "g",       "u_max", "q_px", "q_py",
                                                  "q_phi", "q_vx", "q_vy", "q_omega", "r_u1",  "r_u2", "dt"};
    return n;
}

std::array<double, QuadParams::kSize> QuadParams::to_vector() const {
    return {m, I, r_arm, g, u_max, q[0], q[1], q[2], q[3], q[4], q[5], r[0], r[1], dt};
}

QuadParams QuadParams::from_vector(std::span<const double> t) {
    if (t.size() != kSize) throw Error("QuadParams: expected " + std::to_string(kSize) + " values, got " + std::to_string(t.size()));
    QuadParams p;
    p.m = t[0];
    p.I = t[1];
    p.r_arm = t[2];
    p.g = t[3];
    p.u_max = t[4];
    for (int i = 0; i < 6; ++i) p.q[i] = t[5 + i];
    p.r = {t[11], t[12]};
    p.dt = t[13];
    return p;
}

namespace {

int param_index(const std::string& name) {
    const auto& n = QuadParams::names();
    auto it = std::find(n.begin(), n.end(), name);
    if (it == n.end()) throw Error("unknown quadcopter parameter '" + name + "'");
    return static_cast<int>(it - n.begin());
}

} // namespace

double QuadParams::get(const std::string& name) const { return to_vector()[param_index(name)]; }

void QuadParams::set(const std::string& name, double value) {
    auto v = to_vector();
    v[param_index(name)] = value;
    *this = from_vector(v);
}

void QuadParams::validate() const {
    for (double v : to_vector()) {
        if (!std::isfinite(v)) throw Error("QuadParams: parameters must be finite");
    }
    if (m <= 0 || I <= 0 || r_arm <= 0 || dt <= 0) throw Error("QuadParams: m, I, r_arm and dt must be > 0");
    if (u_max < 0) throw Error("QuadParams: u_max must be >= 0");
    for (double w : q) {
        if (w < 0) throw Error("QuadParams: Q weights must be >= 0");
    }
    for (double w : r) {
        if (w <= 0) throw Error("QuadParams: R weights must be > 0");
    }
}

double weighted_norm(const QuadState& z, const QuadParams& p) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += p.q[i] * z[i] * z[i];
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// model

QuadModel QuadModel::build() {
    Builder b;
    MatrixExpr z = b.sym("z", 6);
    MatrixExpr theta = b.sym("theta", QuadParams::kSize);
    auto th = [&](int i) { return theta.nz(i); };
    const SX m = th(0), inertia = th(1), r_arm = th(2), g = th(3), u_max = th(4), dt = th(13);
    const SX weight = m * g;
    const SX u_hover = weight * 0.5;

    // semi-implicit Euler: velocities first, then positions from the new velocities
    auto dynamics = [&](const MatrixExpr& zz, const SX& u1, const SX& u2) {
        const SX phi = zz.nz(2);
        const SX F = u1 + u2;
        const SX ax = -(F * sin(phi)) / m;
        const SX ay = (F * cos(phi) - weight) / m;
        const SX alpha = r_arm * (u1 - u2) / inertia;
        const SX vx = zz.nz(3) + dt * ax;
        const SX vy = zz.nz(4) + dt * ay;
        const SX w = zz.nz(5) + dt * alpha;
        return MatrixExpr::column({zz.nz(0) + dt * vx, zz.nz(1) + dt * vy, phi + dt * w, vx, vy, w});
    };

    MatrixExpr u_lin = b.sym("u_lin", 2);
    MatrixExpr z_lin = dynamics(z, u_lin.nz(0), u_lin.nz(1));
    MatrixExpr origin = MatrixExpr::column(std::vector<SX>(6, b.constant(0.0)));
    MatrixExpr hover = MatrixExpr::column({u_hover, u_hover});
    auto AB = substitute({jacobian(z_lin, z), jacobian(z_lin, u_lin)}, {z, u_lin}, {origin, hover});
    MatrixExpr Q(Sparsity::diagonal(6), {th(5), th(6), th(7), th(8), th(9), th(10)});
    MatrixExpr R(Sparsity::diagonal(2), {th(11), th(12)});
    MatrixExpr K = lqr_synthesis(b, AB[0], AB[1], Q, R, kLqrIterations).K;

    auto closed_loop = [&](const MatrixExpr& gain) {
        MatrixExpr Kz = mtimes(gain, z);
        std::vector<SX> u;
        for (int i = 0; i < 2; ++i) {
            auto kz = Kz.at(i, 0);
            SX cmd = kz ? u_hover - *kz : u_hover;
            u.push_back(fmin(fmax(cmd, b.constant(0.0)), u_max));
        }
        return std::make_pair(dynamics(z, u[0], u[1]), MatrixExpr::column(u));
    };

    QuadModel model;
    auto [z_next, u] = closed_loop(K);
    model.step_fn = b.function("quad_step", {z, theta}, {z_next, u}, {"z_next", "u"});
    model.step = flatten(model.step_fn);
    model.gain = flatten(b.function("quad_gain", {theta}, {K}, {"K"}));
    MatrixExpr K_in = b.sym("K", K.sparsity());
    auto [z_next_k, u_k] = closed_loop(K_in);
    model.closed_loop = flatten(b.function("quad_closed_loop", {z, theta, K_in}, {z_next_k, u_k}, {"z_next", "u"}));
    return model;
}

// ---------------------------------------------------------------------------
// rollouts

std::vector<RolloutResult> rollout_batch(const QuadModel& model, const std::vector<QuadState>& z0,
                                         const std::vector<QuadParams>& theta, int steps,
                                         const RolloutOptions& options) {
    const std::size_t n = z0.size();
    if (n == 0) throw Error("rollout_batch: empty batch");
    if (theta.size() != 1 && theta.size() != n) {
        throw Error("rollout_batch: " + std::to_string(theta.size()) + " parameter sets for a batch of " +
                    std::to_string(n));
    }
    if (steps < 0) throw Error("rollout_batch: steps must be >= 0");
    for (const QuadParams& p : theta) p.validate();
    auto theta_of = [&](std::size_t e) -> const QuadParams& { return theta.size() == 1 ? theta[0] : theta[e]; };

    // one gain evaluation per distinct parameter vector
    std::map<std::array<double, QuadParams::kSize>, std::size_t> distinct;
    std::vector<std::size_t> gain_row(n);
    for (std::size_t e = 0; e < n; ++e) {
        auto [it, inserted] = distinct.try_emplace(theta_of(e).to_vector(), distinct.size());
        gain_row[e] = it->second;
    }
    BatchWorkspace gws(model.gain, distinct.size());
    for (const auto& [v, row] : distinct) std::copy(v.begin(), v.end(), gws.input(0, row).begin());
    batch_eval(model.gain, gws, options.n_threads);

    BatchWorkspace ws(model.closed_loop, n);
    const int nnz_k = model.closed_loop.nnz_in(2);
    for (std::size_t e = 0; e < n; ++e) {
        std::copy(z0[e].begin(), z0[e].end(), ws.input(0, e).begin());
        const auto v = theta_of(e).to_vector();
        std::copy(v.begin(), v.end(), ws.input(1, e).begin());
        auto k = ws.input(2, e);
        if (options.zero_gain) {
            std::fill(k.begin(), k.end(), 0.0);
        } else {
            auto src = gws.output(0, gain_row[e]);
            std::copy(src.begin(), src.begin() + nnz_k, k.begin());
        }
    }

    std::vector<RolloutResult> out(n);
    auto state_of = [&](std::size_t e) {
        QuadState s;
        auto in = ws.input(0, e);
        std::copy(in.begin(), in.end(), s.begin());
        return s;
    };
    for (std::size_t e = 0; e < n; ++e) out[e].trajectory.push_back(z0[e]);
    const int evals = options.record ? steps + 1 : steps;
    for (int s = 0; s < evals; ++s) {
        batch_eval(model.closed_loop, ws, options.n_threads);
        for (std::size_t e = 0; e < n; ++e) {
            if (options.record) {
                auto u = ws.output(1, e);
                out[e].inputs.push_back({u[0], u[1]});
            }
            if (s < steps) {
                auto zn = ws.output(0, e);
                std::copy(zn.begin(), zn.end(), ws.input(0, e).begin());
                if (options.record) out[e].trajectory.push_back(state_of(e));
            }
        }
    }
    for (std::size_t e = 0; e < n; ++e) {
        if (!options.record && steps > 0) out[e].trajectory.push_back(state_of(e));
        out[e].final_norm = weighted_norm(state_of(e), theta_of(e));
        out[e].stable = out[e].final_norm < options.stability_eps;
    }
    return out;
}

RolloutResult rollout_serial(const QuadModel& model, const QuadState& z0, const QuadParams& theta, int steps,
                             const RolloutOptions& options) {
    if (steps < 0) throw Error("rollout_serial: steps must be >= 0");
    theta.validate();
    const auto tv = theta.to_vector();
    std::vector<std::vector<double>> in{{z0.begin(), z0.end()}, {tv.begin(), tv.end()}};
    const InstructionTape* tape = &model.step;
    if (options.zero_gain) {
        tape = &model.closed_loop;
        in.emplace_back(model.closed_loop.nnz_in(2), 0.0);
    }
    RolloutResult res;
    res.trajectory.push_back(z0);
    QuadState z = z0;
    const int evals = options.record ? steps + 1 : steps;
    for (int s = 0; s < evals; ++s) {
        auto o = serial_eval(*tape, in);
        if (options.record) res.inputs.push_back({o[1][0], o[1][1]});
        if (s < steps) {
            std::copy(o[0].begin(), o[0].end(), z.begin());
            in[0] = o[0];
            if (options.record) res.trajectory.push_back(z);
        }
    }
    if (!options.record && steps > 0) res.trajectory.push_back(z);
    res.final_norm = weighted_norm(z, theta);
    res.stable = res.final_norm < options.stability_eps;
    return res;
}

// ---------------------------------------------------------------------------
// scans

std::size_t RoaResult::stable_count(std::size_t k) const {
    return static_cast<std::size_t>(std::count(masks.at(k).begin(), masks.at(k).end(), std::uint8_t{1}));
}

namespace {

std::vector<double> axis(int n, double max) {
    std::vector<double> a(n, 0.0);
    if (n == 1) return a;
    for (int i = 0; i < n; ++i) a[i] = -max + 2.0 * max * i / (n - 1);
    return a;
}

} // namespace

RoaResult roa_scan(const QuadModel& model, const QuadParams& base, const RoaOptions& options) {
    if (options.grid < 1 || options.hover_multiples.empty()) throw Error("roa_scan: empty grid");
    base.validate();
    RoaResult roa;
    roa.momentum_x = axis(options.grid, options.momentum_x_max);
    roa.momentum_omega = axis(options.grid, options.momentum_omega_max);
    const std::size_t cells = static_cast<std::size_t>(options.grid) * options.grid;

    std::vector<QuadState> z0;
    std::vector<QuadParams> theta;
    for (double mult : options.hover_multiples) {
        QuadParams p = base;
        p.u_max = mult * base.hover_thrust();
        roa.u_max.push_back(p.u_max);
        for (double mx : roa.momentum_x) {
            for (double mw : roa.momentum_omega) {
                z0.push_back({0.0, 0.0, 0.0, mx / p.m, 0.0, mw / p.I});
                theta.push_back(p);
            }
        }
    }
    RolloutOptions ro;
    ro.n_threads = options.n_threads;
    ro.record = false;
    ro.stability_eps = options.stability_eps;
    auto res = rollout_batch(model, z0, theta, options.steps, ro);
    for (std::size_t k = 0; k < options.hover_multiples.size(); ++k) {
        std::vector<std::uint8_t> mask(cells);
        for (std::size_t c = 0; c < cells; ++c) mask[c] = res[k * cells + c].stable ? 1 : 0;
        roa.masks.push_back(std::move(mask));
    }
    return roa;
}

std::vector<SweepRow> param_sweep(const QuadModel& model, const QuadParams& base,
                                  const std::vector<SweepAxis>& grid, const QuadState& z0, int steps,
                                  int n_threads) {
    std::vector<QuadParams> theta;
    std::vector<std::pair<std::string, double>> points;
    for (const SweepAxis& ax : grid) {
        for (double v : ax.values) {
            QuadParams p = base;
            p.set(ax.param, v);
            theta.push_back(p);
            points.emplace_back(ax.param, v);
        }
    }
    std::vector<SweepRow> rows;
    if (theta.empty()) return rows;
    RolloutOptions ro;
    ro.n_threads = n_threads;
    auto res = rollout_batch(model, std::vector<QuadState>(theta.size(), z0), theta, steps, ro);
    for (std::size_t k = 0; k < res.size(); ++k) {
        for (int s = 0; s <= steps; ++s) {
            rows.push_back({points[k].first, points[k].second, s, res[k].trajectory[s], res[k].inputs[s]});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void write_roa_csv(std::ostream& os, const RoaResult& roa) {
    os << "u_max,momentum_x,momentum_omega,stable\n";
    const std::size_t n_w = roa.momentum_omega.size();
    for (std::size_t k = 0; k < roa.masks.size(); ++k) {
        for (std::size_t i = 0; i < roa.momentum_x.size(); ++i) {
            for (std::size_t j = 0; j < n_w; ++j) {
                os << num(roa.u_max[k]) << ',' << num(roa.momentum_x[i]) << ',' << num(roa.momentum_omega[j]) << ','
                   << int(roa.masks[k][i * n_w + j]) << '\n';
            }
        }
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "param_name,param_value,step,z1,z2,z3,z4,z5,z6,u1,u2\n";
    for (const SweepRow& r : rows) {
        os << r.param << ',' << num(r.value) << ',' << r.step;
        for (double v : r.z) os << ',' << num(v);
        for (double v : r.u) os << ',' << num(v);
        os << '\n';
    }
}

} // namespace vecsym
