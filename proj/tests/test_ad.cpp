#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "vecsym/error.hpp"

using namespace vecsym;
using namespace testing_support;

namespace {

// Central differences of a function's first output with respect to its
// first input, dense column-major (rows: output nonzeros).
std::vector<double> fd_jacobian(const SymbolicFunction& f, std::vector<std::vector<double>> x, double h = 1e-6) {
    const int n = f.nnz_in(0);
    const int m = f.nnz_out(0);
    std::vector<double> J(static_cast<std::size_t>(m) * n);
    for (int j = 0; j < n; ++j) {
        const double x0 = x[0][j];
        x[0][j] = x0 + h;
        auto fp = f.evaluate(x)[0];
        x[0][j] = x0 - h;
        auto fm = f.evaluate(x)[0];
        x[0][j] = x0;
        for (int i = 0; i < m; ++i) J[static_cast<std::size_t>(j) * m + i] = (fp[i] - fm[i]) / (2 * h);
    }
    return J;
}

std::vector<double> dense(const SymbolicFunction& f, int out, const std::vector<std::vector<double>>& x) {
    const Sparsity& sp = f.outputs()[out].sparsity;
    auto vals = f.evaluate(x)[out];
    std::vector<double> d(static_cast<std::size_t>(sp.rows()) * sp.cols(), 0.0);
    int k = 0;
    for (auto [r, c] : sp.entries()) d[static_cast<std::size_t>(c) * sp.rows() + r] = vals[k++];
    return d;
}

double rel_inf_error(const std::vector<double>& a, const std::vector<double>& ref) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::fabs(a[i] - ref[i]));
        den = std::max(den, std::fabs(ref[i]));
    }
    return num / std::max(1.0, den);
}

} // namespace

TEST(JacobianTest, SinSquareAtZero) {
    Builder b;
    MatrixExpr x = b.sym("x", 1);
    SX a = sin(x.scalar()) + x.scalar();
    MatrixExpr J = jacobian(MatrixExpr(a * a), x);
    SymbolicFunction f = b.function("J", {x}, {J});
    EXPECT_EQ(f.evaluate({{0.0}})[0][0], 0.0);
    const double v = 0.7;
    EXPECT_NEAR(f.evaluate({{v}})[0][0], 2 * (std::sin(v) + v) * (std::cos(v) + 1), 1e-14);
}

TEST(JacobianTest, LinearMapReturnsMatrix) {
    Builder b;
    MatrixExpr A = b.sym("A", Sparsity::triplets(3, 2, {{0, 0}, {2, 0}, {1, 1}}));
    MatrixExpr x = b.sym("x", 2);
    MatrixExpr J = jacobian(mtimes(A, x), x);
    EXPECT_EQ(J.sparsity(), A.sparsity());
    SymbolicFunction f = b.function("J", {A, x}, {J});
    auto out = f.evaluate({{1.5, -2.0, 0.25}, {7.0, 9.0}})[0];
    EXPECT_EQ(out, (std::vector<double>{1.5, -2.0, 0.25}));
}

TEST(JacobianTest, IndependentOutputGivesEmptyPattern) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    MatrixExpr y = b.sym("y", 1);
    MatrixExpr J = jacobian(MatrixExpr(sin(y.scalar())), x);
    EXPECT_EQ(J.rows(), 1);
    EXPECT_EQ(J.cols(), 2);
    EXPECT_EQ(J.nnz(), 0);
}

TEST(JacobianTest, NoStoredLiteralZero) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    SX f = x.nz(0) * b.constant(0.0) + step(x.nz(1)) + x.nz(1);
    MatrixExpr J = jacobian(MatrixExpr(f), x);
    for (const SX& s : J.nonzeros()) EXPECT_FALSE(s.is_constant(0.0));
}

TEST(JacobianTest, MatchesFiniteDifferencesOnRandomGraphs) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int trial = 0; trial < 20; ++trial) {
        Builder b;
        RandomGraphOptions o;
        o.smooth = true;
        o.max_inputs = 1;
        o.max_input_size = 10;
        o.max_outputs = 1;
        o.n_ops = 40;
        std::vector<MatrixExpr> syms;
        SymbolicFunction f = random_function(b, rng, o, &syms);
        // rebuild the output expression in this builder to differentiate it
        MatrixExpr out = b.call(f, {syms[0]})[0];
        SymbolicFunction J = b.function("J", {syms[0]}, {jacobian(out, syms[0])});
        std::vector<std::vector<double>> x{std::vector<double>(f.nnz_in(0))};
        for (double& v : x[0]) v = u(rng);
        EXPECT_LT(rel_inf_error(dense(J, 0, x), fd_jacobian(f, x)), 1e-6) << "trial " << trial;
    }
}

TEST(JacobianTest, Linearity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 10; ++trial) {
        Builder b;
        RandomGraphOptions o;
        o.smooth = true;
        o.max_inputs = 1;
        o.max_outputs = 1;
        std::vector<MatrixExpr> sx;
        SymbolicFunction f1 = random_function(b, rng, o, &sx);
        const MatrixExpr x = sx[0];
        MatrixExpr F = b.call(f1, {x})[0];
        MatrixExpr G = map(OpCode::Sin, scale(b.constant(2.0), F));
        const double ca = 1.5, cb = -0.25;
        MatrixExpr combo = add(scale(b.constant(ca), F), scale(b.constant(cb), G));
        SymbolicFunction lhs = b.function("lhs", {x}, {jacobian(combo, x)});
        SymbolicFunction jf = b.function("jf", {x}, {jacobian(F, x)});
        SymbolicFunction jg = b.function("jg", {x}, {jacobian(G, x)});
        std::vector<std::vector<double>> in{std::vector<double>(x.nnz())};
        for (double& v : in[0]) v = u(rng);
        auto L = dense(lhs, 0, in), A = dense(jf, 0, in), B = dense(jg, 0, in);
        for (std::size_t i = 0; i < L.size(); ++i) EXPECT_NEAR(L[i], ca * A[i] + cb * B[i], 1e-12);
    }
}

TEST(JacobianTest, SubgradientConventions) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    SX a = x.nz(0), c = x.nz(1);
    MatrixExpr f = MatrixExpr::column({fabs(a), fmin(a, c), fmax(a, c), step(a), if_else(a, 3.0 * c, c * c)});
    SymbolicFunction J = b.function("J", {x}, {jacobian(f, x)});
    auto at = [&](double va, double vc) { return dense(J, 0, {{va, vc}}); };
    // rows: |a|, min, max, step, select; columns a, c (column-major, 5 rows)
    auto z = at(0.0, 0.0);
    EXPECT_EQ(z[0], 0.0);  // d|a|/da at 0
    EXPECT_EQ(z[1], 1.0);  // fmin tie follows first argument
    EXPECT_EQ(z[5 + 1], 0.0);
    EXPECT_EQ(z[2], 1.0);  // fmax tie follows first argument
    EXPECT_EQ(z[5 + 2], 0.0);
    EXPECT_EQ(z[3], 0.0);  // step
    EXPECT_EQ(z[5 + 4], 0.0); // select with a == 0 picks c*c, derivative 2c = 0
    auto p = at(-2.0, 1.0);
    EXPECT_EQ(p[0], -1.0);
    EXPECT_EQ(p[1], 1.0);
    EXPECT_EQ(p[5 + 2], 1.0);
    EXPECT_EQ(p[5 + 4], 3.0);
    auto q = at(2.0, 1.0);
    EXPECT_EQ(q[0], 1.0);
    EXPECT_EQ(q[5 + 1], 1.0);
    EXPECT_EQ(q[2], 1.0);
    EXPECT_EQ(q[5 + 4], 3.0);
    auto r = at(0.0, 5.0);
    EXPECT_EQ(r[5 + 4], 10.0);
}

TEST(HessianTest, QuadraticFormGivesMatrix) {
    Builder b;
    const std::vector<double> P{4, 1, 0, 1, 3, -1, 0, -1, 2};
    MatrixExpr Pm = constant_matrix(b, 3, 3, P);
    MatrixExpr z = b.sym("z", 3);
    MatrixExpr f = scale(b.constant(0.5), mtimes(transpose(z), mtimes(Pm, z)));
    MatrixExpr H = hessian(f, z);
    EXPECT_TRUE(H.sparsity().is_symmetric());
    auto v = folded_values(H);
    for (std::size_t i = 0; i < P.size(); ++i) EXPECT_EQ(v[i], P[i]);
}

TEST(HessianTest, SecondDerivativeOfSine) {
    Builder b;
    MatrixExpr x = b.sym("x", 1);
    SymbolicFunction H = b.function("H", {x}, {hessian(MatrixExpr(sin(x.scalar())), x)});
    for (double v : {-1.0, 0.3, 2.0}) EXPECT_NEAR(H.evaluate({{v}})[0][0], -std::sin(v), 1e-15);
}

TEST(HessianTest, RejectsNonScalar) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    EXPECT_THROW(hessian(x, x), Error);
}

TEST(HessianTest, MatchesFiniteDifferenceOfGradient) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Builder b;
        MatrixExpr x = b.sym("x", 5);
        RandomGraphOptions o;
        o.smooth = true;
        o.max_inputs = 1;
        o.max_input_size = 5;
        o.max_outputs = 1;
        Builder tmp;
        std::vector<MatrixExpr> syms;
        SymbolicFunction g = random_function(tmp, rng, o, &syms);
        // scalar objective: sum of the random outputs evaluated on the first k entries of x
        MatrixExpr arg = row_slice(x, 0, g.nnz_in(0));
        MatrixExpr out = b.call(g, {arg})[0];
        SX obj = out.nz(0);
        for (int i = 1; i < out.nnz(); ++i) obj = obj + out.nz(i) * out.nz(i - 1);
        SymbolicFunction grad = b.function("grad", {x}, {gradient(MatrixExpr(obj), x)});
        SymbolicFunction hess = b.function("hess", {x}, {hessian(MatrixExpr(obj), x)});
        std::vector<std::vector<double>> in{std::vector<double>(5)};
        for (double& v : in[0]) v = u(rng);
        auto H = dense(hess, 0, in);
        // FD of the (dense) gradient
        const double h = 1e-6;
        std::vector<double> fd(25);
        for (int j = 0; j < 5; ++j) {
            auto xp = in, xm = in;
            xp[0][j] += h;
            xm[0][j] -= h;
            auto gp = dense(grad, 0, xp), gm = dense(grad, 0, xm);
            for (int i = 0; i < 5; ++i) fd[j * 5 + i] = (gp[i] - gm[i]) / (2 * h);
        }
        EXPECT_LT(rel_inf_error(H, fd), 1e-5) << "trial " << trial;
    }
}

TEST(SubstituteTest, ReplacesSymbolsAndFolds) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    MatrixExpr y = b.sym("y", 1);
    MatrixExpr f = MatrixExpr::column({x.nz(0) * y.scalar(), sin(x.nz(1))});
    MatrixExpr g = substitute(f, {x}, {MatrixExpr::column({b.constant(2.0), b.constant(0.0)})});
    EXPECT_EQ(g.nz(0).op(), OpCode::Mul);
    EXPECT_TRUE(g.nz(1).is_constant(0.0));
    MatrixExpr same = substitute(f, {y}, {y});
    EXPECT_EQ(same.nz(0), f.nz(0));
    EXPECT_THROW(substitute(f, {x}, {y}), Error);
}
