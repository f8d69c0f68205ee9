#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vecsym/expr.hpp"
#include "vecsym/tape.hpp"

namespace vecsym {

using QuadState = std::array<double, 6>; // p_x, p_y, phi, v_x, v_y, omega
using QuadInput = std::array<double, 2>; // rotor thrusts u1, u2

/// Planar quadcopter parameters, packed in this order into the 14-entry
/// runtime vector theta.
struct QuadParams {
    double m = 0.5;
    double I = 0.01;
    double r_arm = 0.15;
    double g = 9.81;
    double u_max = 0.5 * 9.81; // per rotor; twice the hover thrust
    std::array<double, 6> q{10.0, 10.0, 10.0, 1.0, 1.0, 1.0};
    std::array<double, 2> r{1.0, 1.0};
    double dt = 0.02;

    static constexpr int kSize = 14;
    static const std::array<std::string, kSize>& names();

    double hover_thrust() const { return 0.5 * m * g; }
    std::array<double, kSize> to_vector() const;
    static QuadParams from_vector(std::span<const double> theta);
    double get(const std::string& name) const;
    void set(const std::string& name, double value);
    void validate() const;
};

/// Weighted norm sqrt(sum q_i z_i^2) used for the stability test.
double weighted_norm(const QuadState& z, const QuadParams& p);

/// Tapes for the closed-loop step. `step` is the full map (z, theta) ->
/// (z_next, u) with the LQR gain computed inside. Rollouts evaluate the gain
/// once per environment with `gain` (theta -> K) and then iterate
/// `closed_loop` ((z, theta, K) -> (z_next, u)); the pair produces the same
/// bits as `step`.
struct QuadModel {
    static constexpr int kLqrIterations = 15;

    SymbolicFunction step_fn;
    InstructionTape step;
    InstructionTape gain;
    InstructionTape closed_loop;

    static QuadModel build();
};

struct RolloutOptions {
    int n_threads = 0;
    bool record = true;          // keep every state and input
    double stability_eps = 1e-2;
    bool zero_gain = false;      // force K = 0
};

struct RolloutResult {
    /// steps + 1 states when recording, else the initial and final state.
    std::vector<QuadState> trajectory;
    /// Input applied at each recorded state (the last one is the action the
    /// controller would take at the final state).
    std::vector<QuadInput> inputs;
    bool stable = false;
    double final_norm = 0.0;
};

/// `theta` holds one parameter set per environment, or a single one shared by
/// every environment.
std::vector<RolloutResult> rollout_batch(const QuadModel& model, const std::vector<QuadState>& z0,
                                         const std::vector<QuadParams>& theta, int steps,
                                         const RolloutOptions& options = {});

/// Single environment through the full step tape and the serial interpreter.
RolloutResult rollout_serial(const QuadModel& model, const QuadState& z0, const QuadParams& theta, int steps,
                             const RolloutOptions& options = {});

struct RoaOptions {
    int grid = 41;
    double momentum_x_max = 1.5;      // kg m/s, grid spans [-max, max]
    double momentum_omega_max = 0.4;  // kg m^2/s
    std::vector<double> hover_multiples{2.0, 4.0, 8.0};
    int steps = 500;
    double stability_eps = 1e-2;
    int n_threads = 0;
};

struct RoaResult {
    std::vector<double> u_max;
    std::vector<double> momentum_x;     // grid axis
    std::vector<double> momentum_omega; // grid axis
    /// masks[k][i * grid + j] for u_max[k], momentum_x[i], momentum_omega[j].
    std::vector<std::vector<std::uint8_t>> masks;

    std::size_t stable_count(std::size_t k) const;
};

/// Monte Carlo region of attraction: zero position and attitude, initial
/// momenta on a grid, one mask per thrust limit. All limits run in one batch.
RoaResult roa_scan(const QuadModel& model, const QuadParams& base, const RoaOptions& options = {});

struct SweepAxis {
    std::string param;
    std::vector<double> values;
};

struct SweepRow {
    std::string param;
    double value = 0.0;
    int step = 0;
    QuadState z{};
    QuadInput u{};
};

/// One rollout per grid point; each point changes a single entry of `base`.
std::vector<SweepRow> param_sweep(const QuadModel& model, const QuadParams& base,
                                  const std::vector<SweepAxis>& grid, const QuadState& z0, int steps,
                                  int n_threads = 0);

void write_roa_csv(std::ostream& os, const RoaResult& roa);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

} // namespace vecsym
