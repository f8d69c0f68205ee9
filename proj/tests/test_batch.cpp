#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>
#include <random>

#include "support.hpp"
#include "vecsym/batch.hpp"
#include "vecsym/bench.hpp"
#include "vecsym/error.hpp"

using namespace vecsym;
using namespace testing_support;

namespace {

void fill_random(const InstructionTape& t, BatchWorkspace& ws, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < t.n_in(); ++i) {
        for (double& v : ws.input(i)) v = u(rng);
    }
}

/// Per-element serial oracle over a filled workspace.
::testing::AssertionResult matches_serial(const InstructionTape& t, BatchWorkspace& ws) {
    for (std::size_t e = 0; e < ws.batch_size(); ++e) {
        std::vector<std::vector<double>> in;
        for (int i = 0; i < t.n_in(); ++i) {
            auto s = ws.input(i, e);
            in.emplace_back(s.begin(), s.end());
        }
        const auto ref = serial_eval(t, in);
        for (int j = 0; j < t.n_out(); ++j) {
            auto o = ws.output(j, e);
            if (!same_bits(std::vector<double>(o.begin(), o.end()), ref[j])) {
                return ::testing::AssertionFailure() << "element " << e << " output " << j;
            }
        }
    }
    return ::testing::AssertionSuccess();
}

std::vector<std::vector<double>> snapshot(const InstructionTape& t, const BatchWorkspace& ws) {
    std::vector<std::vector<double>> out;
    for (int j = 0; j < t.n_out(); ++j) out.emplace_back(ws.output(j).begin(), ws.output(j).end());
    return out;
}

} // namespace

TEST(SerialEvalTest, SinSquare) {
    const InstructionTape t = sin_square_tape();
    EXPECT_EQ(serial_eval(t, {{0.0}})[0][0], 0.0);
    const double s1 = std::sin(1.0) + 1.0;
    EXPECT_EQ(serial_eval(t, {{1.0}})[0][0], s1 * s1);
}

TEST(SerialEvalTest, LengthMismatch) {
    const InstructionTape t = sin_square_tape();
    EXPECT_THROW(serial_eval(t, {}), Error);
    EXPECT_THROW(serial_eval(t, {{1.0, 2.0}}), Error);
}

TEST(SerialEvalTest, LdltIdentitySystem) {
    const BenchCase c = gen_ldlt_case(2);
    EXPECT_EQ(serial_eval(c.tape, {{1, 0, 0, 1}, {6, 5}})[0], (std::vector<double>{6, 5}));
}

TEST(BatchEvalTest, SinSquareTwoElements) {
    const InstructionTape t = sin_square_tape();
    BatchWorkspace ws(t, 2);
    ws.input(0)[0] = 0.0;
    ws.input(0)[1] = 1.0;
    batch_eval(t, ws);
    const double s1 = std::sin(1.0) + 1.0;
    EXPECT_EQ(ws.output(0)[0], 0.0);
    EXPECT_EQ(ws.output(0)[1], s1 * s1);
}

TEST(BatchEvalTest, WorkspaceShape) {
    std::mt19937_64 rng(1);
    const InstructionTape t = random_tape(rng, 40);
    BatchWorkspace ws(t, 13);
    EXPECT_EQ(ws.work().size(), 13u * t.n_w());
    for (int i = 0; i < t.n_in(); ++i) EXPECT_EQ(ws.input(i).size(), 13u * t.nnz_in(i));
    for (int j = 0; j < t.n_out(); ++j) EXPECT_EQ(ws.output(j).size(), 13u * t.nnz_out(j));
    EXPECT_TRUE(ws.matches(t));
    EXPECT_THROW(BatchWorkspace(t, 0), Error);
}

TEST(BatchEvalTest, BitExactAgainstSerialAcrossSizes) {
    std::mt19937_64 rng(42);
    for (std::size_t batch : {1u, 7u, 256u, 4096u}) {
        for (int trial = 0; trial < 5; ++trial) {
            const InstructionTape t = random_tape(rng, 30 + 20 * trial);
            BatchWorkspace ws(t, batch);
            fill_random(t, ws, rng);
            batch_eval(t, ws);
            EXPECT_TRUE(matches_serial(t, ws)) << "batch " << batch << " trial " << trial;
        }
    }
}

TEST(BatchEvalTest, BatchOfOneEqualsSerial) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const InstructionTape t = random_tape(rng, 60);
        BatchWorkspace ws(t, 1);
        fill_random(t, ws, rng);
        batch_eval(t, ws);
        EXPECT_TRUE(matches_serial(t, ws));
    }
}

TEST(BatchEvalTest, IndependentOfThreadCount) {
    std::mt19937_64 rng(9);
    const InstructionTape t = random_tape(rng, 300);
    BatchWorkspace ws(t, 1000);
    fill_random(t, ws, rng);
    batch_eval(t, ws, 1);
    const auto ref = snapshot(t, ws);
    for (int threads : {2, 3, 4, 7, 16}) {
        for (int j = 0; j < t.n_out(); ++j) std::fill(ws.output(j).begin(), ws.output(j).end(), -1.0);
        const BatchStats st = batch_eval(t, ws, threads);
        EXPECT_GE(st.n_threads, 1);
        const auto got = snapshot(t, ws);
        for (int j = 0; j < t.n_out(); ++j) EXPECT_TRUE(same_bits(got[j], ref[j])) << threads << " threads";
    }
}

TEST(BatchEvalTest, ShuffledElementOrder) {
    // elements are independent: any evaluation order gives the same bits
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const InstructionTape t = random_tape(rng, 100);
        BatchWorkspace ws(t, 300);
        fill_random(t, ws, rng);
        batch_eval(t, ws, 1);
        const auto ref = snapshot(t, ws);
        std::vector<std::size_t> order(ws.batch_size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int j = 0; j < t.n_out(); ++j) std::fill(ws.output(j).begin(), ws.output(j).end(), 0.0);
        for (double& w : ws.work()) w = std::nan("");
        // two interleaved passes over disjoint halves
        const std::size_t half = order.size() / 2;
        eval_elements(t, ws, std::span(order).subspan(half));
        eval_elements(t, ws, std::span(order).first(half));
        const auto got = snapshot(t, ws);
        for (int j = 0; j < t.n_out(); ++j) EXPECT_TRUE(same_bits(got[j], ref[j]));
    }
}

TEST(BatchEvalTest, IdenticalInputsGiveIdenticalOutputs) {
    std::mt19937_64 rng(2);
    const InstructionTape t = random_tape(rng, 100);
    BatchWorkspace ws(t, 64);
    const auto in = random_inputs(t, rng);
    for (std::size_t e = 0; e < 64; ++e) {
        for (int i = 0; i < t.n_in(); ++i) std::copy(in[i].begin(), in[i].end(), ws.input(i, e).begin());
    }
    batch_eval(t, ws);
    for (std::size_t e = 1; e < 64; ++e) {
        for (int j = 0; j < t.n_out(); ++j) {
            auto a = ws.output(j, 0), b = ws.output(j, e);
            EXPECT_TRUE(same_bits(std::vector<double>(a.begin(), a.end()), std::vector<double>(b.begin(), b.end())));
        }
    }
}

TEST(BatchEvalTest, SpecialValuesEveryOpcode) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> vals{-2.0, -0.0, 0.0, 0.5, HUGE_VAL, -HUGE_VAL, nan, -nan};
    for (std::size_t k = 0; k < kNumOpCodes; ++k) {
        const OpCode op = static_cast<OpCode>(k);
        if (!is_computational(op)) continue;
        Builder b;
        const MatrixExpr x = b.sym("x", 3);
        std::vector<SX> args{x.nz(0), x.nz(1), x.nz(2)};
        args.resize(arity(op));
        const InstructionTape t = flatten(b.function("f", {x}, {MatrixExpr(apply(op, std::span<const SX>(args)))}));
        std::vector<std::vector<double>> rows;
        for (double p : vals)
            for (double q : vals)
                for (double r : {nan, -nan, 1.0}) rows.push_back({p, q, r});
        BatchWorkspace ws(t, rows.size());
        for (std::size_t e = 0; e < rows.size(); ++e) std::copy(rows[e].begin(), rows[e].end(), ws.input(0, e).begin());
        batch_eval(t, ws);
        for (std::size_t e = 0; e < rows.size(); ++e) {
            EXPECT_TRUE(same_bits(ws.output(0, e)[0], serial_eval(t, {rows[e]})[0][0]))
                << op_name(op) << "(" << rows[e][0] << ", " << rows[e][1] << ", " << rows[e][2] << ")";
        }
    }
}

TEST(BatchEvalTest, WorkspaceMismatch) {
    std::mt19937_64 rng(6);
    const InstructionTape a = sin_square_tape();
    const InstructionTape b = gen_ldlt_case(3).tape;
    BatchWorkspace ws(a, 4);
    EXPECT_FALSE(ws.matches(b));
    EXPECT_THROW(batch_eval(b, ws), Error);
    const std::vector<std::size_t> bad{4};
    EXPECT_THROW(eval_elements(a, ws, bad), Error);
}

TEST(BatchEvalTest, ThreadCountFromEnvironment) {
    ::setenv("VECSYM_THREADS", "3", 1);
    EXPECT_EQ(default_thread_count(), 3);
    ::setenv("VECSYM_THREADS", "0", 1);
    EXPECT_GE(default_thread_count(), 1);
    ::unsetenv("VECSYM_THREADS");
    EXPECT_GE(default_thread_count(), 1);
    EXPECT_GE(hardware_thread_count(), 1);
}

TEST(BatchEvalTest, ThroughputScalesWithWorkers) {
    const int w = hardware_thread_count();
    if (w < 4) GTEST_SKIP() << "needs at least 4 hardware threads, have " << w;
    const BenchCase c = gen_ldlt_case(26);
    ASSERT_GE(c.n_instructions, 10000);
    BenchOptions o;
    o.batch_sizes = {4096};
    o.n_threads = w;
    o.repetitions = 3;
    const auto rec = run_benchmark({c}, o);
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_GE(rec[0].speedup, 0.5 * w);
}
