#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vecsym/expr.hpp"

namespace vecsym {

/// Fixed-iteration solver settings. Every count here is baked into the
/// generated function, so the operation count never depends on data.
struct SolverConfig {
    int iterations = 1;             // outer SQP iterations M
    int inner_iterations = 3;       // activity-reweighting solves per QP
    double mu0 = 10.0;              // penalty at the first outer iteration
    double mu_growth = 10.0;        // mu_{k+1} = mu_growth * mu_k
    double hessian_regularization = 1e-6;
    double pivot_floor = 1e-12;     // |pivot| is clamped to at least this, sign kept

    void validate() const;
    double mu_at(int k) const;
};

/// Discrete finite-horizon optimal control problem. Builders receive the
/// stage state x (n_x x 1), control u (n_u x 1) and the runtime parameter
/// vector p (n_param x 1, empty when n_param == 0).
struct OcpSpec {
    using StageFn = std::function<MatrixExpr(int stage, const MatrixExpr& x, const MatrixExpr& u,
                                             const MatrixExpr& p)>;
    int n_x = 0;
    int n_u = 0;
    int horizon = 0;
    int n_param = 0;
    std::function<MatrixExpr(const MatrixExpr& x, const MatrixExpr& u, const MatrixExpr& p)> dynamics;
    StageFn stage_cost;            // stages 0..T-1; optional
    std::function<MatrixExpr(const MatrixExpr& x, const MatrixExpr& u, const MatrixExpr& p)> terminal_cost;
    StageFn eq_constraints;        // stages 0..T; optional
    StageFn ineq_constraints;      // stages 0..T; optional, g(x, u) <= 0
};

/// Standard NLP: min J(X) s.t. g_eq(X) = 0, g_ineq(X) <= 0. `params` are
/// runtime inputs (for a transcribed OCP: the initial state, then the user
/// parameters).
struct NlpForm {
    MatrixExpr X;
    std::vector<MatrixExpr> params;
    MatrixExpr J;
    MatrixExpr g_eq;
    MatrixExpr g_ineq;

    int N() const { return X.rows(); }
    int M_eq() const { return g_eq.rows(); }
    int M_ineq() const { return g_ineq.rows(); }
};

/// Stacks X = (x_0..x_T, u_0..u_T); g_eq rows are x_0 - x0bar, then
/// x_{i+1} - f(x_i, u_i) for i < T, then the user equality constraints.
NlpForm transcribe(Builder& b, const OcpSpec& spec);

/// Slices of X for a transcribed problem.
MatrixExpr stage_state(const MatrixExpr& X, const OcpSpec& spec, int stage);
MatrixExpr stage_control(const MatrixExpr& X, const OcpSpec& spec, int stage);

/// QP subproblem at the iterate (X, lambda): P = hess L + eps I, c = grad L,
/// A_eq = d g_eq/dX, b_eq = -g_eq, likewise for inequalities, with
/// L = J + lambda^T g_eq.
struct QpData {
    MatrixExpr X;
    MatrixExpr lambda;
    std::vector<MatrixExpr> params;
    MatrixExpr P;
    MatrixExpr c;
    MatrixExpr A_eq;
    MatrixExpr b_eq;
    MatrixExpr A_ineq;
    MatrixExpr b_ineq;
};

QpData build_qp(Builder& b, const NlpForm& nlp, const SolverConfig& config);

struct LdltFactors {
    MatrixExpr L; // unit lower triangular
    MatrixExpr D; // diagonal pivots (clamped)
};

/// Symbolic LDL^T without pivoting, exploiting the structural pattern of the
/// lower triangle of K. Throws if K's pattern is not symmetric.
LdltFactors ldlt_factor(const MatrixExpr& K, double pivot_floor = 1e-12);
/// Solves K x = r for every column of r.
MatrixExpr ldlt_solve(const MatrixExpr& K, const MatrixExpr& r, double pivot_floor = 1e-12);
MatrixExpr ldlt_solve(const LdltFactors& f, const MatrixExpr& r);
/// Solves W x = r for general square W by Gaussian elimination without
/// pivoting (used where W is similar to an SPD matrix).
MatrixExpr lu_solve(const MatrixExpr& W, const MatrixExpr& r, double pivot_floor = 1e-12);

struct QpStep {
    MatrixExpr dz;
    MatrixExpr dlambda;
    /// 2 mu max(0, a_i^T dz - b_i): inequality multiplier estimates.
    MatrixExpr sigma;
};

/// Penalized equality-constrained QP step. Inequalities enter as
/// mu * sum(max(0, A dz - b)^2), minimized by `inner_iterations` KKT solves in
/// which row i contributes curvature 2 mu a_i a_i^T when it was violated at the
/// previous inner iterate (starting from dz = 0). Without inequalities this is
/// a single KKT solve.
QpStep penalty_qp_step(Builder& b, const QpData& qp, const SX& mu, const SolverConfig& config);

/// H(X0, lambda0, params...) = h^M(X0): M full SQP steps (alpha = 1) with
/// penalty mu_k = mu0 * growth^k. Outputs (X_M, lambda_M).
SymbolicFunction fixed_iteration_solver(Builder& b, const NlpForm& nlp, const SolverConfig& config,
                                        const std::string& name = "H");

struct LqrSolution {
    MatrixExpr S;
    MatrixExpr K;
};

/// Infinite-horizon discrete LQR by `iterations` structured-doubling steps on
/// the DARE; K = (R + B^T S B)^{-1} B^T S A, so u = -K x.
LqrSolution lqr_synthesis(Builder& b, const MatrixExpr& A, const MatrixExpr& B, const MatrixExpr& Q,
                          const MatrixExpr& R, int iterations, double pivot_floor = 1e-12);

} // namespace vecsym
