#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vecsym/ad.hpp"
#include "vecsym/expr.hpp"
#include "vecsym/tape.hpp"

namespace testing_support {

using namespace vecsym;

inline bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

inline bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!same_bits(a[i], b[i])) return false;
    }
    return true;
}

/// (sin x + x)^2 with a scalar input x.
inline SymbolicFunction sin_square(Builder& b) {
    MatrixExpr x = b.sym("x", 1);
    SX a = sin(x.scalar()) + x.scalar();
    return b.function("sin_square", {x}, {MatrixExpr(a * a)});
}

inline InstructionTape sin_square_tape() {
    Builder b;
    return flatten(sin_square(b));
}

struct RandomGraphOptions {
    int n_ops = 50;
    int max_inputs = 3;
    int max_input_size = 4;
    int max_outputs = 3;
    bool smooth = false; // only everywhere-differentiable, finite-valued ops
    int window = 0;      // > 0: operands come from the last `window` nodes, so most nodes stay live
};

/// Random DAG over random dense symbols. With `smooth`, every operation is
/// differentiable and bounded on bounded inputs, for derivative checks.
inline SymbolicFunction random_function(Builder& b, std::mt19937_64& rng, const RandomGraphOptions& o,
                                        std::vector<MatrixExpr>* symbols = nullptr) {
    std::uniform_int_distribution<int> n_in_d(1, o.max_inputs);
    std::uniform_int_distribution<int> size_d(1, o.max_input_size);
    std::uniform_real_distribution<double> cval(-2.0, 2.0);
    const int n_in = n_in_d(rng);
    std::vector<MatrixExpr> inputs;
    std::vector<SX> pool;
    for (int i = 0; i < n_in; ++i) {
        MatrixExpr s = b.sym("x" + std::to_string(i) + "_" + std::to_string(b.graph().size()), size_d(rng));
        inputs.push_back(s);
        for (const SX& v : s.nonzeros()) pool.push_back(v);
    }
    auto pick = [&]() -> SX {
        if (o.window > 0) {
            const std::size_t lo = pool.size() > static_cast<std::size_t>(o.window) ? pool.size() - o.window : 0;
            return pool[std::uniform_int_distribution<std::size_t>(lo, pool.size() - 1)(rng)];
        }
        // favour recent nodes so depth grows
        std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
        std::size_t a = d(rng), c = d(rng);
        return pool[std::max(a, c)];
    };
    std::vector<OpCode> smooth_ops{OpCode::Add, OpCode::Sub, OpCode::Mul, OpCode::Neg, OpCode::Sin,
                                   OpCode::Cos, OpCode::Sq,  OpCode::Div, OpCode::Exp, OpCode::Atan2};
    std::vector<OpCode> all_ops{OpCode::Add,  OpCode::Sub,  OpCode::Mul,  OpCode::Div,   OpCode::Neg,
                                OpCode::Exp,  OpCode::Log,  OpCode::Pow,  OpCode::Sqrt,  OpCode::Sq,
                                OpCode::Sin,  OpCode::Cos,  OpCode::Tan,  OpCode::Atan2, OpCode::Fabs,
                                OpCode::Fmin, OpCode::Fmax, OpCode::Step, OpCode::IfElse, OpCode::Assign};
    const auto& ops = o.smooth ? smooth_ops : all_ops;
    std::uniform_int_distribution<std::size_t> op_d(0, ops.size() - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int k = 0; k < o.n_ops; ++k) {
        const OpCode op = ops[op_d(rng)];
        SX a = pick();
        SX c = coin(rng) < 0.15 ? b.constant(std::round(cval(rng) * 4.0) / 4.0) : pick();
        SX r;
        if (o.smooth) {
            switch (op) {
            case OpCode::Div: r = a / (2.0 + sq(c)); break;
            case OpCode::Exp: r = exp(sin(a)); break;
            case OpCode::Atan2: r = atan2(a, 2.0 + sq(c)); break;
            default: r = arity(op) == 1 ? apply(op, {a}) : apply(op, {a, c});
            }
        } else if (arity(op) == 1) {
            r = apply(op, {a});
        } else if (arity(op) == 2) {
            r = apply(op, {a, c});
        } else {
            r = apply(op, {step(a), c, pick()});
        }
        pool.push_back(r);
    }
    std::uniform_int_distribution<int> n_out_d(1, o.max_outputs);
    const int n_out = n_out_d(rng);
    std::vector<MatrixExpr> outputs;
    for (int j = 0; j < n_out; ++j) {
        const int n = size_d(rng);
        std::vector<SX> entries;
        for (int i = 0; i < n; ++i) entries.push_back(pick());
        outputs.push_back(MatrixExpr::column(entries));
    }
    if (symbols) *symbols = inputs;
    return b.function("random_" + std::to_string(b.graph().size()), inputs, outputs);
}

/// Random tape with roughly `n_ops` computational instructions.
inline InstructionTape random_tape(std::mt19937_64& rng, int n_ops, bool smooth = false) {
    Builder b;
    RandomGraphOptions o;
    o.n_ops = n_ops;
    o.smooth = smooth;
    return flatten(random_function(b, rng, o));
}

inline std::vector<std::vector<double>> random_inputs(const InstructionTape& t, std::mt19937_64& rng,
                                                      double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<std::vector<double>> in;
    for (int i = 0; i < t.n_in(); ++i) {
        std::vector<double> v(t.nnz_in(i));
        for (double& x : v) x = u(rng);
        in.push_back(v);
    }
    return in;
}

/// Dense column-major numeric matrix as a constant expression.
inline MatrixExpr constant_matrix(Builder& b, int rows, int cols, const std::vector<double>& colmajor) {
    std::vector<SX> nz;
    for (double v : colmajor) nz.push_back(b.constant(v));
    return MatrixExpr::dense(rows, cols, nz);
}

/// Values of a fully constant-folded matrix, dense column-major.
inline std::vector<double> folded_values(const MatrixExpr& m) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()) * m.cols(), 0.0);
    int k = 0;
    for (const auto& [r, c] : m.sparsity().entries()) {
        const SX& s = m.nz(k++);
        if (!s.is_constant()) throw std::runtime_error("folded_values: entry is not constant");
        out[static_cast<std::size_t>(c) * m.rows() + r] = s.node().value;
    }
    return out;
}

} // namespace testing_support
