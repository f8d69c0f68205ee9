#include "vecsym/batch.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <numeric>
#include <string>
#include <thread>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vecsym/error.hpp"

namespace vecsym {

BatchWorkspace::BatchWorkspace(const InstructionTape& tape, std::size_t batch_size)
    : batch_size_(batch_size), n_w_(tape.n_w()), nnz_in_(tape.nnz_in()), nnz_out_(tape.nnz_out()) {
    if (batch_size == 0) throw Error("BatchWorkspace: batch size must be at least 1");
    for (int n : nnz_in_) inputs_.emplace_back(batch_size * static_cast<std::size_t>(n), 0.0);
    work_.assign(batch_size * static_cast<std::size_t>(n_w_), 0.0);
    for (int n : nnz_out_) outputs_.emplace_back(batch_size * static_cast<std::size_t>(n), 0.0);
}

std::span<double> BatchWorkspace::input(int i, std::size_t e) {
    const std::size_t n = nnz_in_.at(i);
    return std::span<double>(inputs_[i]).subspan(e * n, n);
}

std::span<const double> BatchWorkspace::output(int j, std::size_t e) const {
    const std::size_t n = nnz_out_.at(j);
    return std::span<const double>(outputs_[j]).subspan(e * n, n);
}

bool BatchWorkspace::matches(const InstructionTape& tape) const {
    return n_w_ == tape.n_w() && nnz_in_ == tape.nnz_in() && nnz_out_ == tape.nnz_out();
}

// ---------------------------------------------------------------------------
// serial reference

void serial_eval_into(const InstructionTape& tape, std::span<const double* const> inputs,
                      std::span<double* const> outputs, std::span<double> work) {
    double* w = work.data();
    for (const Instruction& ins : tape.instructions()) {
#define VECSYM_UNARY(OP) \
    case OpCode::OP: w[ins.out] = apply_op<OpCode::OP>(w[ins.in0], 0.0, 0.0); break;
#define VECSYM_BINARY(OP) \
    case OpCode::OP: w[ins.out] = apply_op<OpCode::OP>(w[ins.in0], w[ins.in1], 0.0); break;
        switch (ins.op) {
        case OpCode::Input: w[ins.out] = inputs[ins.in0][ins.in1]; break;
        case OpCode::Output: outputs[ins.out][ins.in1] = w[ins.in0]; break;
        case OpCode::Const: w[ins.out] = ins.value; break;
        VECSYM_UNARY(Assign)
        VECSYM_BINARY(Add)
        VECSYM_BINARY(Sub)
        VECSYM_BINARY(Mul)
        VECSYM_BINARY(Div)
        VECSYM_UNARY(Neg)
        VECSYM_UNARY(Exp)
        VECSYM_UNARY(Log)
        VECSYM_BINARY(Pow)
        VECSYM_UNARY(Sqrt)
        VECSYM_UNARY(Sq)
        VECSYM_UNARY(Sin)
        VECSYM_UNARY(Cos)
        VECSYM_UNARY(Tan)
        VECSYM_BINARY(Atan2)
        VECSYM_UNARY(Fabs)
        VECSYM_BINARY(Fmin)
        VECSYM_BINARY(Fmax)
        VECSYM_UNARY(Step)
        case OpCode::IfElse:
            w[ins.out] = apply_op<OpCode::IfElse>(w[ins.in0], w[ins.in1], w[ins.in2]);
            break;
        }
#undef VECSYM_UNARY
#undef VECSYM_BINARY
    }
}

std::vector<std::vector<double>> serial_eval(const InstructionTape& tape,
                                             const std::vector<std::vector<double>>& inputs) {
    if (static_cast<int>(inputs.size()) != tape.n_in()) {
        throw Error(tape.name() + ": expected " + std::to_string(tape.n_in()) + " inputs, got " +
                    std::to_string(inputs.size()));
    }
    std::vector<const double*> in_ptr;
    for (int i = 0; i < tape.n_in(); ++i) {
        if (static_cast<int>(inputs[i].size()) != tape.nnz_in(i)) {
            throw Error(tape.name() + ": input " + std::to_string(i) + " has " + std::to_string(inputs[i].size()) +
                        " values, expected " + std::to_string(tape.nnz_in(i)));
        }
        in_ptr.push_back(inputs[i].data());
    }
    std::vector<std::vector<double>> out;
    std::vector<double*> out_ptr;
    for (int j = 0; j < tape.n_out(); ++j) out.emplace_back(tape.nnz_out(j), 0.0);
    for (auto& o : out) out_ptr.push_back(o.data());
    std::vector<double> work(tape.n_w());
    serial_eval_into(tape, in_ptr, out_ptr, work);
    return out;
}

// ---------------------------------------------------------------------------
// batched kernel

namespace {

constexpr int kTile = 64;

struct TileContext {
    std::array<double*, kTile> work;
    std::array<std::size_t, kTile> elem;
    int count = 0;
};

template <OpCode Op>
void tile_op(const TileContext& t, const Instruction& ins) {
    constexpr int ar = arity(Op);
    for (int i = 0; i < t.count; ++i) {
        double* w = t.work[i];
        const double a = w[ins.in0];
        double b = 0.0;
        double c = 0.0;
        if constexpr (ar >= 2) b = w[ins.in1];
        if constexpr (ar >= 3) c = w[ins.in2];
        w[ins.out] = apply_op<Op>(a, b, c);
    }
}

using TileFn = void (*)(const TileContext&, const Instruction&);

template <std::size_t... I>
constexpr std::array<TileFn, kNumOpCodes> make_table(std::index_sequence<I...>) {
    return {{(is_computational(static_cast<OpCode>(I)) ? &tile_op<static_cast<OpCode>(I)> : nullptr)...}};
}

constexpr auto kTileTable = make_table(std::make_index_sequence<kNumOpCodes>{});

void run_tile(const InstructionTape& tape, BatchWorkspace& ws, const TileContext& t) {
    for (const Instruction& ins : tape.instructions()) {
        switch (ins.op) {
        case OpCode::Input: {
            const double* in = ws.input(ins.in0).data();
            const std::size_t nnz = static_cast<std::size_t>(ws.nnz_in()[ins.in0]);
            for (int i = 0; i < t.count; ++i) t.work[i][ins.out] = in[t.elem[i] * nnz + ins.in1];
            break;
        }
        case OpCode::Output: {
            double* out = ws.output(ins.out).data();
            const std::size_t nnz = static_cast<std::size_t>(ws.nnz_out()[ins.out]);
            for (int i = 0; i < t.count; ++i) out[t.elem[i] * nnz + ins.in1] = t.work[i][ins.in0];
            break;
        }
        case OpCode::Const:
            for (int i = 0; i < t.count; ++i) t.work[i][ins.out] = ins.value;
            break;
        default:
            kTileTable[static_cast<std::size_t>(ins.op)](t, ins);
        }
    }
}

template <typename NextElement>
void run_elements(const InstructionTape& tape, BatchWorkspace& ws, std::size_t count, NextElement next) {
    double* work = ws.work().data();
    const std::size_t n_w = static_cast<std::size_t>(ws.n_w());
    TileContext t;
    std::size_t done = 0;
    while (done < count) {
        t.count = static_cast<int>(std::min<std::size_t>(kTile, count - done));
        for (int i = 0; i < t.count; ++i) {
            const std::size_t e = next(done + i);
            t.elem[i] = e;
            t.work[i] = work + e * n_w;
        }
        run_tile(tape, ws, t);
        done += t.count;
    }
}

void check_workspace(const InstructionTape& tape, const BatchWorkspace& ws) {
    if (!ws.matches(tape)) throw Error("batch_eval: workspace was not allocated for tape '" + tape.name() + "'");
}

} // namespace

void eval_elements(const InstructionTape& tape, BatchWorkspace& ws, std::span<const std::size_t> elements) {
    check_workspace(tape, ws);
    for (std::size_t e : elements) {
        if (e >= ws.batch_size()) throw Error("eval_elements: element index out of range");
    }
    run_elements(tape, ws, elements.size(), [&](std::size_t k) { return elements[k]; });
}

BatchStats batch_eval(const InstructionTape& tape, BatchWorkspace& ws, int n_threads) {
    check_workspace(tape, ws);
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t batch = ws.batch_size();
    int workers = n_threads > 0 ? n_threads : default_thread_count();
    workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), batch));

    auto chunk = [&](int w) {
        const std::size_t begin = batch * static_cast<std::size_t>(w) / workers;
        const std::size_t end = batch * static_cast<std::size_t>(w + 1) / workers;
        run_elements(tape, ws, end - begin, [begin](std::size_t k) { return begin + k; });
    };
    if (workers <= 1) {
        chunk(0);
    } else {
#pragma omp parallel num_threads(workers)
        {
#ifdef _OPENMP
            // The runtime may grant fewer threads than requested.
            const int team = omp_get_num_threads();
            for (int w = omp_get_thread_num(); w < workers; w += team) chunk(w);
#endif
        }
#ifndef _OPENMP
        for (int w = 0; w < workers; ++w) chunk(w);
#endif
    }
    const auto t1 = std::chrono::steady_clock::now();
    return {std::chrono::duration<double>(t1 - t0).count(), std::max(workers, 1)};
}

int default_thread_count() {
    if (const char* env = std::getenv("VECSYM_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int hardware_thread_count() {
#ifdef _OPENMP
    return omp_get_num_procs();
#else
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
#endif
}

} // namespace vecsym
