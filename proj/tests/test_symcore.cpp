#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "support.hpp"
#include "vecsym/error.hpp"

using namespace vecsym;
using namespace testing_support;

// ---------------------------------------------------------------------------
// opcodes

TEST(OpCodeTest, ArityTable) {
    EXPECT_EQ(arity(OpCode::Const), 0);
    EXPECT_EQ(arity(OpCode::Input), 0);
    EXPECT_EQ(arity(OpCode::Sin), 1);
    EXPECT_EQ(arity(OpCode::Sq), 1);
    EXPECT_EQ(arity(OpCode::Step), 1);
    EXPECT_EQ(arity(OpCode::Atan2), 2);
    EXPECT_EQ(arity(OpCode::Fmax), 2);
    EXPECT_EQ(arity(OpCode::IfElse), 3);
    for (OpCode op : kAllOpCodes) {
        EXPECT_GE(arity(op), 0);
        EXPECT_LE(arity(op), 3);
    }
}

TEST(OpCodeTest, NamesRoundTrip) {
    std::set<std::string_view> seen;
    for (OpCode op : kAllOpCodes) {
        auto name = op_name(op);
        EXPECT_TRUE(seen.insert(name).second) << name;
        ASSERT_TRUE(op_from_name(name).has_value());
        EXPECT_EQ(*op_from_name(name), op);
    }
    EXPECT_EQ(kAllOpCodes.size(), 23u);
    EXPECT_EQ(op_name(OpCode::IfElse), "IF_ELSE");
    EXPECT_FALSE(op_from_name("SINH").has_value());
}

TEST(OpCodeTest, ConditionalSemantics) {
    EXPECT_EQ(eval_op(OpCode::Step, 0.0), 0.0);
    EXPECT_EQ(eval_op(OpCode::Step, -0.0), 0.0);
    EXPECT_EQ(eval_op(OpCode::Step, 1e-300), 1.0);
    EXPECT_EQ(eval_op(OpCode::Step, -3.0), 0.0);
    EXPECT_EQ(eval_op(OpCode::IfElse, 1.0, 2.0, 3.0), 2.0);
    EXPECT_EQ(eval_op(OpCode::IfElse, 0.0, 2.0, 3.0), 3.0);
    EXPECT_EQ(eval_op(OpCode::IfElse, -0.5, 2.0, 3.0), 2.0);
    EXPECT_EQ(eval_op(OpCode::Fmax, 0.0, -2.0), 0.0);
    EXPECT_EQ(eval_op(OpCode::Fmax, 0.0, 2.0), 2.0);
    EXPECT_EQ(eval_op(OpCode::Sq, -3.0), 9.0);
    EXPECT_THROW(eval_op(OpCode::Input, 1.0), Error);
}

// ---------------------------------------------------------------------------
// sparsity

TEST(SparsityTest, Factories) {
    Sparsity d = Sparsity::dense(2, 3);
    EXPECT_EQ(d.nnz(), 6);
    EXPECT_TRUE(d.is_dense());
    EXPECT_EQ(d.find(1, 2), 5);
    Sparsity diag = Sparsity::diagonal(3);
    EXPECT_EQ(diag.nnz(), 3);
    EXPECT_EQ(diag.find(0, 1), -1);
    EXPECT_TRUE(diag.is_symmetric());
    EXPECT_EQ(Sparsity::lower(4).nnz(), 10);
    EXPECT_FALSE(Sparsity::lower(4).is_symmetric());
    EXPECT_EQ(Sparsity::empty(3, 2).nnz(), 0);
}

TEST(SparsityTest, TripletsSortAndMerge) {
    Sparsity s = Sparsity::triplets(3, 3, {{2, 0}, {0, 0}, {2, 0}, {1, 2}});
    EXPECT_EQ(s.nnz(), 3);
    auto e = s.entries();
    EXPECT_EQ(e[0], std::make_pair(0, 0));
    EXPECT_EQ(e[1], std::make_pair(2, 0));
    EXPECT_EQ(e[2], std::make_pair(1, 2));
    EXPECT_EQ(s.col_of(2), 2);
    Sparsity t = s.transpose();
    EXPECT_EQ(t.find(0, 2), 2);
    EXPECT_EQ(t.transpose(), s);
}

TEST(SparsityTest, RejectsInvalidPatterns) {
    EXPECT_THROW(Sparsity(2, 1, {0, 2}, {1, 0}), Error); // not increasing
    EXPECT_THROW(Sparsity(2, 1, {0, 1}, {2}), Error);    // row out of range
    EXPECT_THROW(Sparsity(2, 2, {0, 1}, {0}), Error);    // colind length
    EXPECT_THROW(Sparsity::triplets(2, 2, {{2, 0}}), Error);
}

TEST(SparsityTest, RowsStrictlyIncreasingProperty) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> dim(1, 8);
        const int r = dim(rng), c = dim(rng);
        std::uniform_int_distribution<int> rr(0, r - 1), cc(0, c - 1);
        std::vector<std::pair<int, int>> pos;
        for (int k = 0; k < 10; ++k) pos.emplace_back(rr(rng), cc(rng));
        Sparsity s = Sparsity::triplets(r, c, pos);
        EXPECT_LE(s.nnz(), r * c);
        for (int j = 0; j < c; ++j) {
            for (int k = s.colind()[j] + 1; k < s.colind()[j + 1]; ++k) EXPECT_LT(s.row()[k - 1], s.row()[k]);
        }
        for (auto [i, j] : pos) EXPECT_GE(s.find(i, j), 0);
    }
}

// ---------------------------------------------------------------------------
// symbols and nodes

TEST(SymTest, Shapes) {
    Builder b;
    MatrixExpr x = b.sym("x", 1, 1);
    EXPECT_EQ(x.nnz(), 1);
    EXPECT_TRUE(x.nz(0).is_input());
    MatrixExpr A = b.sym("A", 2, 2);
    ASSERT_EQ(A.nnz(), 4);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(A.nz(k).node().nz, k);
    MatrixExpr d = b.sym("d", Sparsity::diagonal(3));
    EXPECT_EQ(d.nnz(), 3);
}

TEST(SymTest, Errors) {
    Builder b;
    b.sym("x", 2);
    EXPECT_THROW(b.sym("x", 1), Error);
    EXPECT_THROW(b.sym("y", 0, 1), Error);
    EXPECT_THROW(b.sym("z", 1, 0), Error);
    EXPECT_EQ(b.unique_name("x"), "x_1");
    EXPECT_EQ(b.unique_name("w"), "w");
}

TEST(ApplyTest, HashConsingSharesNodes) {
    Builder b;
    MatrixExpr x = b.sym("x", 1);
    const std::size_t before = b.graph().size();
    SX a1 = sin(x.scalar()) + x.scalar();
    SX a2 = sin(x.scalar()) + x.scalar();
    EXPECT_EQ(a1, a2);
    SX f = a1 * a2;
    EXPECT_EQ(b.graph().size() - before, 3u); // SIN, ADD, MUL
    SymbolicFunction fn = b.function("f", {x}, {MatrixExpr(f)});
    EXPECT_EQ(fn.node_count() - fn.input_node_count(), 3u);
}

TEST(ApplyTest, BuildingTwiceDoesNotGrowGraph) {
    Builder b;
    MatrixExpr x = b.sym("x", 3);
    auto build = [&] {
        SX acc = x.nz(0);
        for (int i = 1; i < 3; ++i) acc = acc * cos(x.nz(i)) + exp(x.nz(i - 1));
        return acc;
    };
    build();
    const std::size_t once = b.graph().size();
    build();
    EXPECT_EQ(b.graph().size(), once);
}

TEST(ApplyTest, ConstantFoldingOnlyForAllConstantOperands) {
    Builder b;
    SX z = apply(OpCode::Sin, {b.constant(0.0)});
    EXPECT_TRUE(z.is_constant(0.0));
    MatrixExpr x = b.sym("x", 1);
    SX p = x.scalar() + 0.0;
    EXPECT_EQ(p.op(), OpCode::Add); // x + 0 is kept
    SX q = x.scalar() * 1.0;
    EXPECT_EQ(q.op(), OpCode::Mul);
    SX r = b.constant(2.0) * b.constant(3.0);
    EXPECT_TRUE(r.is_constant(6.0));
}

TEST(ApplyTest, ArityAndKindErrors) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    EXPECT_THROW(apply(OpCode::Sin, {x.nz(0), x.nz(1)}), Error);
    EXPECT_THROW(apply(OpCode::Add, {x.nz(0)}), Error);
    EXPECT_THROW(apply(OpCode::Const, {}), Error);
    EXPECT_THROW(apply(OpCode::Input, {}), Error);
    Builder other;
    MatrixExpr y = other.sym("y", 1);
    EXPECT_THROW(x.nz(0) + y.scalar(), Error);
}

TEST(ApplyTest, PenaltyPrimitive) {
    Builder b;
    MatrixExpr x = b.sym("x", 1);
    SymbolicFunction f = b.function("relu", {x}, {MatrixExpr(fmax(b.constant(0.0), x.scalar()))});
    for (double v : {-2.0, -0.0, 0.0, 0.5, 3.0}) EXPECT_EQ(f.evaluate({{v}})[0][0], std::max(0.0, v));
}

TEST(ApplyTest, IfElseMatchesSelectForAllSigns) {
    Builder b;
    MatrixExpr v = b.sym("v", 3);
    SymbolicFunction f = b.function("sel", {v}, {MatrixExpr(if_else(v.nz(0), v.nz(1), v.nz(2)))});
    const double inf = std::numeric_limits<double>::infinity();
    for (double c : {-inf, -1.0, -0.0, 0.0, 1e-320, 2.0, inf}) {
        const double out = f.evaluate({{c, 10.0, 20.0}})[0][0];
        EXPECT_EQ(out, c != 0.0 ? 10.0 : 20.0) << c;
    }
    // both branches are always part of the evaluated tape
    InstructionTape t = flatten(f);
    EXPECT_EQ(t.n_instructions(), 5); // 3 INPUT, IF_ELSE, OUTPUT
}

// ---------------------------------------------------------------------------
// matrix algebra

TEST(MatrixTest, IdentityTimesVectorKeepsNodes) {
    Builder b;
    MatrixExpr v = b.sym("v", 2);
    MatrixExpr I = b.identity(2);
    MatrixExpr r = mtimes(I, v);
    ASSERT_EQ(r.nnz(), 2);
    // 1 * v_i is a MUL node over v_i (no algebraic rewriting), evaluating to v_i
    SymbolicFunction f = b.function("f", {v}, {r});
    EXPECT_EQ(f.evaluate({{3.0, -4.0}})[0], (std::vector<double>{3.0, -4.0}));
}

TEST(MatrixTest, DiagonalProductPattern) {
    Builder b;
    MatrixExpr a = b.sym("a", Sparsity::diagonal(2));
    MatrixExpr c = b.sym("c", Sparsity::diagonal(2));
    const std::size_t before = b.graph().size();
    MatrixExpr r = mtimes(a, c);
    EXPECT_EQ(r.sparsity(), Sparsity::diagonal(2));
    EXPECT_EQ(b.graph().size() - before, 2u);
    for (const SX& s : r.nonzeros()) EXPECT_EQ(s.op(), OpCode::Mul);
}

TEST(MatrixTest, DenseProductNodeCount) {
    Builder b;
    MatrixExpr A = b.sym("A", 3, 3);
    MatrixExpr x = b.sym("x", 3);
    const std::size_t before = b.graph().size();
    MatrixExpr r = mtimes(A, x);
    EXPECT_EQ(r.nnz(), 3);
    SymbolicFunction f = b.function("Ax", {A, x}, {r});
    int muls = 0, adds = 0;
    for (const Node& n : f.nodes()) {
        muls += n.op == OpCode::Mul;
        adds += n.op == OpCode::Add;
    }
    EXPECT_EQ(muls, 9);
    EXPECT_EQ(adds, 6);
    EXPECT_EQ(b.graph().size() - before, 15u);
}

TEST(MatrixTest, DimensionErrors) {
    Builder b;
    MatrixExpr A = b.sym("A", 2, 3);
    MatrixExpr x = b.sym("x", 2);
    EXPECT_THROW(mtimes(A, x), Error);
    EXPECT_THROW(add(A, x), Error);
    EXPECT_THROW(elementwise(OpCode::Mul, A, x), Error);
    EXPECT_THROW(horzcat({A, x, b.sym("y", 3)}), Error);
}

TEST(MatrixTest, StructuralZerosNeverMaterialize) {
    Builder b;
    MatrixExpr d = b.sym("d", Sparsity::diagonal(3));
    MatrixExpr x = b.sym("x", 3);
    MatrixExpr r = mtimes(transpose(d), d);
    EXPECT_EQ(r.nnz(), 3);
    MatrixExpr s = add(d, MatrixExpr::zeros(3, 3));
    EXPECT_EQ(s.nnz(), 3);
    MatrixExpr e = elementwise(OpCode::Mul, d, mtimes(x, transpose(x)));
    EXPECT_EQ(e.nnz(), 3);
    MatrixExpr diff = sub(MatrixExpr::zeros(3, 1), x);
    ASSERT_EQ(diff.nnz(), 3);
    EXPECT_EQ(diff.nz(0).op(), OpCode::Neg);
    // cos(0) != 0, so map materializes every entry
    EXPECT_EQ(map(OpCode::Cos, d).nnz(), 9);
    EXPECT_EQ(map(OpCode::Sin, d).nnz(), 3);
}

TEST(MatrixTest, ConcatSliceMirror) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    MatrixExpr y = b.sym("y", 3);
    MatrixExpr v = vertcat({x, y});
    EXPECT_EQ(v.rows(), 5);
    EXPECT_EQ(row_slice(v, 2, 5).nz(0), y.nz(0));
    MatrixExpr L = b.sym("L", Sparsity::lower(3));
    MatrixExpr S = mirror_lower(L);
    EXPECT_EQ(S.nnz(), 9);
    EXPECT_EQ(*S.at(0, 2), *S.at(2, 0));
    MatrixExpr h = horzcat({x, x});
    EXPECT_EQ(h.cols(), 2);
    EXPECT_EQ(vec(h).rows(), 4);
    EXPECT_EQ(project(S, Sparsity::diagonal(3)).nnz(), 3);
}

// ---------------------------------------------------------------------------
// functions

TEST(FunctionTest, PrunesAndOrdersTopologically) {
    Builder b;
    MatrixExpr x = b.sym("x", 2);
    SX unused = exp(x.nz(1));
    (void)unused;
    SymbolicFunction f = b.function("f", {x}, {MatrixExpr(sin(x.nz(0)))});
    EXPECT_EQ(f.node_count(), 2u); // INPUT x0, SIN
    EXPECT_EQ(f.input_node_count(), 1u);
    for (std::size_t i = 0; i < f.nodes().size(); ++i) {
        const Node& n = f.nodes()[i];
        for (int a = 0; a < arity(n.op); ++a) EXPECT_LT(n.args[a], i);
    }
    EXPECT_EQ(f.inputs()[0].name, "x");
    EXPECT_EQ(f.outputs()[0].name, "o0");
}

TEST(FunctionTest, UndeclaredSymbolRejected) {
    Builder b;
    MatrixExpr x = b.sym("x", 1);
    MatrixExpr y = b.sym("y", 1);
    EXPECT_THROW(b.function("f", {x}, {MatrixExpr(x.scalar() * y.scalar())}), Error);
    EXPECT_THROW(b.function("g", {x, x}, {x}), Error);
    EXPECT_THROW(b.function("h", {mtimes(x, x)}, {x}), Error);
}

TEST(FunctionTest, EvaluateIsDeterministic) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Builder b;
        SymbolicFunction f = random_function(b, rng, {});
        std::vector<std::vector<double>> in;
        std::uniform_real_distribution<double> u(-2, 2);
        for (int i = 0; i < f.n_in(); ++i) {
            in.emplace_back(f.nnz_in(i));
            for (double& v : in.back()) v = u(rng);
        }
        auto o1 = f.evaluate(in);
        auto o2 = f.evaluate(in);
        for (int j = 0; j < f.n_out(); ++j) EXPECT_TRUE(same_bits(o1[j], o2[j]));
    }
}

TEST(FunctionTest, CallInlines) {
    Builder b;
    SymbolicFunction sq_fn = sin_square(b);
    MatrixExpr z = b.sym("z", 1);
    auto out = b.call(sq_fn, {MatrixExpr(2.0 * z.scalar())});
    SymbolicFunction g = b.function("g", {z}, out);
    const double v = 0.3;
    EXPECT_EQ(g.evaluate({{v}})[0][0], std::pow(std::sin(2 * v) + 2 * v, 2));
}

TEST(FunctionTest, SinSquareValues) {
    Builder b;
    SymbolicFunction f = sin_square(b);
    EXPECT_EQ(f.evaluate({{0.0}})[0][0], 0.0);
    const double s1 = std::sin(1.0) + 1.0;
    EXPECT_EQ(f.evaluate({{1.0}})[0][0], s1 * s1);
    EXPECT_NEAR(f.evaluate({{1.0}})[0][0], 3.3910153878893641, 1e-12);
}
