#include "vecsym/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>

#include "vecsym/ad.hpp"
#include "vecsym/error.hpp"

namespace vecsym {

void SolverConfig::validate() const {
    if (iterations < 0) throw Error("SolverConfig: iterations must be >= 0");
    if (inner_iterations < 1) throw Error("SolverConfig: inner_iterations must be >= 1");
    if (!(mu0 > 0.0)) throw Error("SolverConfig: mu0 must be > 0");
    if (!(mu_growth > 1.0)) throw Error("SolverConfig: mu_growth must be > 1");
    if (!(hessian_regularization >= 0.0)) throw Error("SolverConfig: hessian_regularization must be >= 0");
    if (!(pivot_floor > 0.0)) throw Error("SolverConfig: pivot_floor must be > 0");
}

double SolverConfig::mu_at(int k) const { return mu0 * std::pow(mu_growth, k); }

namespace {

std::string dims(int r, int c) { return std::to_string(r) + "x" + std::to_string(c); }
std::string dims(const MatrixExpr& m) { return dims(m.rows(), m.cols()); }

using Slot = std::optional<SX>;

/// Dense table of optional entries; nullopt is a structural zero.
struct Table {
    int rows = 0;
    int cols = 0;
    std::vector<Slot> v;

    Table(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c) {}
    explicit Table(const MatrixExpr& m) : Table(m.rows(), m.cols()) {
        int k = 0;
        for (const auto& [r, c] : m.sparsity().entries()) at(r, c) = m.nz(k++);
    }
    Slot& at(int r, int c) { return v[static_cast<std::size_t>(c) * rows + r]; }
    const Slot& at(int r, int c) const { return v[static_cast<std::size_t>(c) * rows + r]; }

    MatrixExpr to_matrix() const {
        std::vector<std::pair<int, int>> pos;
        std::vector<SX> nz;
        for (int c = 0; c < cols; ++c) {
            for (int r = 0; r < rows; ++r) {
                if (const Slot& s = at(r, c)) {
                    pos.emplace_back(r, c);
                    nz.push_back(*s);
                }
            }
        }
        return MatrixExpr(Sparsity::triplets(rows, cols, std::move(pos)), std::move(nz));
    }
};

// acc - a*b with acc possibly absent
Slot sub_product(const Slot& acc, const SX& a, const SX& b) {
    SX p = a * b;
    if (!acc) return -p;
    return *acc - p;
}

SX clamp_pivot(const SX& d, double floor) {
    SX lo = constant_like(d, -floor);
    SX hi = constant_like(d, floor);
    SX small = step(hi - fabs(d));
    return if_else(small, if_else(step(-d), lo, hi), d);
}

ExprGraph* graph_of(std::initializer_list<const MatrixExpr*> ms, const char* who) {
    for (const MatrixExpr* m : ms) {
        if (ExprGraph* g = m->graph()) return g;
    }
    throw Error(std::string(who) + ": all operands are structurally zero");
}

} // namespace

// ---------------------------------------------------------------------------
// transcription

MatrixExpr stage_state(const MatrixExpr& X, const OcpSpec& spec, int stage) {
    return row_slice(X, stage * spec.n_x, (stage + 1) * spec.n_x);
}

MatrixExpr stage_control(const MatrixExpr& X, const OcpSpec& spec, int stage) {
    const int off = (spec.horizon + 1) * spec.n_x;
    return row_slice(X, off + stage * spec.n_u, off + (stage + 1) * spec.n_u);
}

NlpForm transcribe(Builder& b, const OcpSpec& spec) {
    if (spec.n_x < 1) throw Error("transcribe: n_x must be >= 1");
    if (spec.n_u < 0 || spec.horizon < 0 || spec.n_param < 0) {
        throw Error("transcribe: n_u, horizon and n_param must be >= 0");
    }
    if (spec.horizon > 0 && !spec.dynamics) throw Error("transcribe: dynamics required for horizon > 0");
    const int T = spec.horizon;
    const int N = (T + 1) * (spec.n_x + spec.n_u);

    NlpForm nlp;
    nlp.X = b.sym(b.unique_name("X"), N);
    MatrixExpr x0bar = b.sym(b.unique_name("x0bar"), spec.n_x);
    MatrixExpr p = spec.n_param > 0 ? b.sym(b.unique_name("p"), spec.n_param) : MatrixExpr::zeros(0, 1);
    nlp.params.push_back(x0bar);
    if (spec.n_param > 0) nlp.params.push_back(p);

    auto xs = [&](int i) { return stage_state(nlp.X, spec, i); };
    auto us = [&](int i) { return stage_control(nlp.X, spec, i); };

    std::optional<SX> J;
    auto add_cost = [&](const MatrixExpr& l, const std::string& where) {
        if (l.rows() != 1 || l.cols() != 1) throw Error("transcribe: " + where + " cost is " + dims(l) + ", expected 1x1");
        if (l.nnz() == 0) return;
        J = J ? *J + l.scalar() : l.scalar();
    };
    if (spec.terminal_cost) add_cost(spec.terminal_cost(xs(T), us(T), p), "terminal stage " + std::to_string(T));
    if (spec.stage_cost) {
        for (int i = 0; i < T; ++i) add_cost(spec.stage_cost(i, xs(i), us(i), p), "stage " + std::to_string(i));
    }
    nlp.J = MatrixExpr(J ? *J : b.constant(0.0));

    std::vector<MatrixExpr> eq{sub(xs(0), x0bar)};
    for (int i = 0; i < T; ++i) {
        MatrixExpr f = spec.dynamics(xs(i), us(i), p);
        if (f.rows() != spec.n_x || f.cols() != 1) {
            throw Error("transcribe: stage " + std::to_string(i) + " dynamics returned " + dims(f) + ", expected " +
                        dims(spec.n_x, 1));
        }
        eq.push_back(sub(xs(i + 1), f));
    }
    std::vector<MatrixExpr> ineq;
    for (int i = 0; i <= T; ++i) {
        if (spec.eq_constraints) {
            MatrixExpr g = spec.eq_constraints(i, xs(i), us(i), p);
            if (g.cols() != 1) {
                throw Error("transcribe: stage " + std::to_string(i) + " equality constraints are " + dims(g) +
                            ", expected a column");
            }
            eq.push_back(g);
        }
        if (spec.ineq_constraints) {
            MatrixExpr g = spec.ineq_constraints(i, xs(i), us(i), p);
            if (g.cols() != 1) {
                throw Error("transcribe: stage " + std::to_string(i) + " inequality constraints are " + dims(g) +
                            ", expected a column");
            }
            ineq.push_back(g);
        }
    }
    nlp.g_eq = vertcat(eq);
    nlp.g_ineq = ineq.empty() ? MatrixExpr::zeros(0, 1) : vertcat(ineq);
    return nlp;
}

// ---------------------------------------------------------------------------
// SQP subproblem

QpData build_qp(Builder& b, const NlpForm& nlp, const SolverConfig& config) {
    config.validate();
    if (nlp.J.rows() != 1 || nlp.J.cols() != 1) throw Error("build_qp: objective is " + dims(nlp.J) + ", expected 1x1");
    if (nlp.X.cols() != 1) throw Error("build_qp: decision variable must be a column");
    QpData qp;
    qp.X = nlp.X;
    qp.params = nlp.params;
    qp.lambda = nlp.M_eq() > 0 ? b.sym(b.unique_name("lambda"), nlp.M_eq()) : MatrixExpr::zeros(0, 1);

    MatrixExpr lagrangian = nlp.J;
    if (nlp.M_eq() > 0) lagrangian = add(nlp.J, mtimes(transpose(qp.lambda), nlp.g_eq));
    if (lagrangian.nnz() == 0) lagrangian = MatrixExpr(b.constant(0.0));

    qp.P = hessian(lagrangian, nlp.X);
    if (config.hessian_regularization > 0.0) {
        qp.P = add(qp.P, scale(b.constant(config.hessian_regularization), b.identity(nlp.N())));
    }
    qp.c = gradient(lagrangian, nlp.X);
    qp.A_eq = jacobian(nlp.g_eq, nlp.X);
    qp.b_eq = map(OpCode::Neg, nlp.g_eq);
    qp.A_ineq = jacobian(nlp.g_ineq, nlp.X);
    qp.b_ineq = map(OpCode::Neg, nlp.g_ineq);
    return qp;
}

// ---------------------------------------------------------------------------
// linear solves

LdltFactors ldlt_factor(const MatrixExpr& K, double pivot_floor) {
    if (K.rows() != K.cols()) throw Error("ldlt_factor: matrix is not square " + dims(K));
    if (!K.sparsity().is_symmetric()) throw Error("ldlt_factor: sparsity pattern is not symmetric");
    ExprGraph* g = graph_of({&K}, "ldlt_factor");
    const int n = K.rows();
    Table A(K);
    Table L(n, n);
    std::vector<SX> d(n);

    std::vector<Slot> v(n);
    for (int j = 0; j < n; ++j) {
        // v_k = L_jk d_k for the structurally nonzero entries of row j
        for (int k = 0; k < j; ++k) v[k] = L.at(j, k) ? Slot(*L.at(j, k) * d[k]) : std::nullopt;
        Slot djj = A.at(j, j);
        for (int k = 0; k < j; ++k) {
            if (v[k]) djj = sub_product(djj, *L.at(j, k), *v[k]);
        }
        d[j] = clamp_pivot(djj ? *djj : SX(g, g->constant(0.0)), pivot_floor);
        L.at(j, j) = SX(g, g->constant(1.0));
        for (int i = j + 1; i < n; ++i) {
            Slot acc = A.at(i, j);
            for (int k = 0; k < j; ++k) {
                if (v[k] && L.at(i, k)) acc = sub_product(acc, *L.at(i, k), *v[k]);
            }
            if (acc) L.at(i, j) = *acc / d[j];
        }
    }
    return {L.to_matrix(), MatrixExpr(Sparsity::diagonal(n), d)};
}

MatrixExpr ldlt_solve(const LdltFactors& f, const MatrixExpr& r) {
    const int n = f.L.rows();
    if (r.rows() != n) throw Error("ldlt_solve: right-hand side is " + dims(r) + ", expected " + std::to_string(n) + " rows");
    Table L(f.L);
    Table R(r);
    Table X(n, r.cols());
    for (int c = 0; c < r.cols(); ++c) {
        std::vector<Slot> y(n);
        for (int i = 0; i < n; ++i) {
            Slot acc = R.at(i, c);
            for (int k = 0; k < i; ++k) {
                if (L.at(i, k) && y[k]) acc = sub_product(acc, *L.at(i, k), *y[k]);
            }
            y[i] = acc;
        }
        for (int i = 0; i < n; ++i) {
            if (y[i]) y[i] = *y[i] / f.D.nz(i);
        }
        for (int i = n - 1; i >= 0; --i) {
            Slot acc = y[i];
            for (int k = i + 1; k < n; ++k) {
                if (L.at(k, i) && X.at(k, c)) acc = sub_product(acc, *L.at(k, i), *X.at(k, c));
            }
            X.at(i, c) = acc;
        }
    }
    return X.to_matrix();
}

MatrixExpr ldlt_solve(const MatrixExpr& K, const MatrixExpr& r, double pivot_floor) {
    return ldlt_solve(ldlt_factor(K, pivot_floor), r);
}

MatrixExpr lu_solve(const MatrixExpr& W, const MatrixExpr& r, double pivot_floor) {
    if (W.rows() != W.cols()) throw Error("lu_solve: matrix is not square " + dims(W));
    if (r.rows() != W.rows()) throw Error("lu_solve: right-hand side is " + dims(r) + ", expected " + std::to_string(W.rows()) + " rows");
    ExprGraph* g = graph_of({&W}, "lu_solve");
    const int n = W.rows();
    const int m = r.cols();
    Table U(W);
    Table R(r);
    std::vector<SX> piv(n);
    for (int k = 0; k < n; ++k) {
        const Slot& ukk = U.at(k, k);
        piv[k] = clamp_pivot(ukk ? *ukk : SX(g, g->constant(0.0)), pivot_floor);
        for (int i = k + 1; i < n; ++i) {
            if (!U.at(i, k)) continue;
            SX l = *U.at(i, k) / piv[k];
            for (int j = k + 1; j < n; ++j) {
                if (U.at(k, j)) U.at(i, j) = sub_product(U.at(i, j), l, *U.at(k, j));
            }
            for (int c = 0; c < m; ++c) {
                if (R.at(k, c)) R.at(i, c) = sub_product(R.at(i, c), l, *R.at(k, c));
            }
        }
    }
    Table X(n, m);
    for (int c = 0; c < m; ++c) {
        for (int i = n - 1; i >= 0; --i) {
            Slot acc = R.at(i, c);
            for (int j = i + 1; j < n; ++j) {
                if (U.at(i, j) && X.at(j, c)) acc = sub_product(acc, *U.at(i, j), *X.at(j, c));
            }
            if (acc) X.at(i, c) = *acc / piv[i];
        }
    }
    return X.to_matrix();
}

// ---------------------------------------------------------------------------
// penalty QP step

QpStep penalty_qp_step(Builder& b, const QpData& qp, const SX& mu, const SolverConfig& config) {
    config.validate();
    const int n = qp.X.rows();
    const int m_eq = qp.A_eq.rows();
    const int m_in = qp.A_ineq.rows();
    const SX two_mu = 2.0 * mu;
    const MatrixExpr At_in = transpose(qp.A_ineq);
    const MatrixExpr At_eq = transpose(qp.A_eq);

    auto residual = [&](const MatrixExpr& dz) { return sub(mtimes(qp.A_ineq, dz), qp.b_ineq); };

    auto solve_kkt = [&](const MatrixExpr& P, const MatrixExpr& c) {
        MatrixExpr K = m_eq > 0 ? vertcat({horzcat({P, At_eq}), horzcat({qp.A_eq, MatrixExpr::zeros(m_eq, m_eq)})}) : P;
        MatrixExpr rhs = m_eq > 0 ? vertcat({map(OpCode::Neg, c), qp.b_eq}) : map(OpCode::Neg, c);
        MatrixExpr sol = ldlt_solve(K, rhs, config.pivot_floor);
        return std::make_pair(row_slice(sol, 0, n), row_slice(sol, n, n + m_eq));
    };

    const int inner = m_in > 0 ? config.inner_iterations : 1;
    MatrixExpr dz = MatrixExpr::zeros(n, 1);
    MatrixExpr dlambda = MatrixExpr::zeros(m_eq, 1);
    for (int it = 0; it < inner; ++it) {
        MatrixExpr P = qp.P;
        MatrixExpr c = qp.c;
        if (m_in > 0) {
            MatrixExpr res = residual(dz);
            std::vector<std::pair<int, int>> pos;
            std::vector<SX> w;
            for (int i = 0; i < m_in; ++i) {
                Slot ri = res.at(i, 0);
                if (!ri) continue;
                SX wi = step(*ri);
                if (wi.is_constant(0.0)) continue;
                pos.emplace_back(i, i);
                w.push_back(two_mu * wi);
            }
            MatrixExpr Wd(Sparsity::triplets(m_in, m_in, std::move(pos)), std::move(w));
            P = add(P, mtimes(At_in, mtimes(Wd, qp.A_ineq)));
            c = sub(c, mtimes(At_in, mtimes(Wd, qp.b_ineq)));
        }
        std::tie(dz, dlambda) = solve_kkt(P, c);
    }

    QpStep out{dz, dlambda, MatrixExpr::zeros(m_in, 1)};
    if (m_in > 0) {
        MatrixExpr res = residual(dz);
        std::vector<SX> sigma;
        for (int i = 0; i < m_in; ++i) {
            Slot ri = res.at(i, 0);
            sigma.push_back(two_mu * fmax(ri ? *ri : b.constant(0.0), b.constant(0.0)));
        }
        out.sigma = MatrixExpr::column(std::move(sigma));
    }
    return out;
}

SymbolicFunction fixed_iteration_solver(Builder& b, const NlpForm& nlp, const SolverConfig& config,
                                        const std::string& name) {
    config.validate();
    QpData qp = build_qp(b, nlp, config);
    std::vector<MatrixExpr> inputs{qp.X, qp.lambda};
    for (const MatrixExpr& p : qp.params) inputs.push_back(p);

    MatrixExpr X = qp.X;
    MatrixExpr lambda = qp.lambda;
    if (config.iterations > 0) {
        MatrixExpr mu_sym = b.sym(b.unique_name("mu"), 1);
        QpStep h = penalty_qp_step(b, qp, mu_sym.scalar(), config);
        MatrixExpr X_next = add(qp.X, h.dz);
        MatrixExpr lambda_next = add(qp.lambda, h.dlambda);
        for (int k = 0; k < config.iterations; ++k) {
            MatrixExpr mu_k(b.constant(config.mu_at(k)));
            auto next = substitute({X_next, lambda_next}, {qp.X, qp.lambda, mu_sym}, {X, lambda, mu_k});
            X = next[0];
            lambda = next[1];
        }
    }
    return b.function(name, inputs, {X, lambda}, {"X_M", "lambda_M"});
}

// ---------------------------------------------------------------------------
// LQR by structured doubling

LqrSolution lqr_synthesis(Builder& b, const MatrixExpr& A, const MatrixExpr& B, const MatrixExpr& Q,
                          const MatrixExpr& R, int iterations, double pivot_floor) {
    const int n = A.rows();
    const int m = B.cols();
    if (A.cols() != n) throw Error("lqr_synthesis: A is " + dims(A) + ", expected square");
    if (B.rows() != n) throw Error("lqr_synthesis: B is " + dims(B) + ", expected " + std::to_string(n) + " rows");
    if (Q.rows() != n || Q.cols() != n) throw Error("lqr_synthesis: Q is " + dims(Q) + ", expected " + dims(n, n));
    if (R.rows() != m || R.cols() != m) throw Error("lqr_synthesis: R is " + dims(R) + ", expected " + dims(m, m));
    if (iterations < 1) throw Error("lqr_synthesis: iterations must be >= 1");

    const MatrixExpr I = b.identity(n);
    MatrixExpr Ak = A;
    MatrixExpr G = mirror_lower(mtimes(B, ldlt_solve(mirror_lower(R), transpose(B), pivot_floor)));
    MatrixExpr H = mirror_lower(Q);
    for (int it = 0; it < iterations; ++it) {
        MatrixExpr W = add(I, mtimes(G, H));
        MatrixExpr X1 = lu_solve(W, Ak, pivot_floor);
        MatrixExpr X2 = lu_solve(W, G, pivot_floor);
        MatrixExpr At = transpose(Ak);
        MatrixExpr A_next = mtimes(Ak, X1);
        MatrixExpr G_next = mirror_lower(add(G, mtimes(mtimes(Ak, X2), At)));
        MatrixExpr H_next = mirror_lower(add(H, mtimes(mtimes(At, H), X1)));
        Ak = std::move(A_next);
        G = std::move(G_next);
        H = std::move(H_next);
    }
    const MatrixExpr& S = H;
    MatrixExpr Bt = transpose(B);
    MatrixExpr BtS = mtimes(Bt, S);
    MatrixExpr lhs = mirror_lower(add(R, mtimes(BtS, B)));
    MatrixExpr K = ldlt_solve(lhs, mtimes(BtS, A), pivot_floor);
    return {S, K};
}

} // namespace vecsym
