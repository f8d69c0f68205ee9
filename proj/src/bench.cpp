#include "vecsym/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "vecsym/batch.hpp"
#include "vecsym/error.hpp"
#include "vecsym/expr.hpp"
#include "vecsym/ocp.hpp"

namespace vecsym {

BenchCase gen_ldlt_case(int n) {
    if (n < 2) throw Error("gen_ldlt_case: n must be >= 2");
    Builder b;
    MatrixExpr A = b.sym("A", n, n);
    MatrixExpr rhs = b.sym("b", n);
    MatrixExpr x = ldlt_solve(mirror_lower(A), rhs);
    BenchCase c;
    c.n = n;
    c.tape = flatten(b.function("ldlt_" + std::to_string(n), {A, rhs}, {x}, {"x"}));
    c.n_instructions = static_cast<std::size_t>(c.tape.n_instructions());
    return c;
}

std::vector<int> default_bench_sizes() { return {2, 5, 12, 26, 56}; }

std::vector<std::size_t> default_batch_sizes() { return {1, 16, 256, 4096}; }

void fill_spd_inputs(const BenchCase& c, std::vector<double>& A, std::vector<double>& b, std::size_t batch,
                     unsigned seed) {
    const std::size_t n = static_cast<std::size_t>(c.n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    A.assign(batch * n * n, 0.0);
    b.assign(batch * n, 0.0);
    for (std::size_t e = 0; e < batch; ++e) {
        double* a = A.data() + e * n * n;
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = j; i < n; ++i) {
                const double v = i == j ? static_cast<double>(n) + 1.0 : u(rng);
                a[j * n + i] = v;
                a[i * n + j] = v;
            }
        }
        for (std::size_t i = 0; i < n; ++i) b[e * n + i] = u(rng);
    }
}

namespace {

using Clock = std::chrono::steady_clock;

// 100 clock ticks, but never less than 200 microseconds
const Clock::duration kMinMeasurement =
    std::max<Clock::duration>(Clock::duration(100), std::chrono::duration_cast<Clock::duration>(std::chrono::microseconds(200)));

/// Seconds per call of `fn`, repeating it until one measurement spans at
/// least kMinMeasurement.
template <typename Fn>
double time_per_call(Fn&& fn) {
    for (std::size_t calls = 1;; calls *= 2) {
        const auto t0 = Clock::now();
        for (std::size_t k = 0; k < calls; ++k) fn();
        const auto dt = Clock::now() - t0;
        if (dt >= kMinMeasurement) return std::chrono::duration<double>(dt).count() / static_cast<double>(calls);
        if (calls > (std::size_t{1} << 40)) throw Error("run_benchmark: timer resolution too coarse");
    }
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

std::vector<BenchRecord> run_benchmark(const std::vector<BenchCase>& cases, const BenchOptions& options) {
    if (cases.empty() || options.batch_sizes.empty()) throw Error("run_benchmark: need at least one case and batch size");
    if (options.repetitions < 1 || options.warmup < 0) throw Error("run_benchmark: repetitions must be >= 1, warmup >= 0");
    const int threads = options.n_threads > 0 ? options.n_threads : default_thread_count();
    std::vector<BenchRecord> records;
    for (const BenchCase& c : cases) {
        if (c.tape.n_in() != 2 || c.tape.n_out() != 1) throw Error("run_benchmark: case is not an (A, b) -> x tape");
        for (std::size_t batch : options.batch_sizes) {
            if (batch == 0) throw Error("run_benchmark: batch size must be >= 1");
            std::vector<double> A, b;
            fill_spd_inputs(c, A, b, batch, options.seed);
            BatchWorkspace ws(c.tape, batch);
            std::copy(A.begin(), A.end(), ws.input(0).begin());
            std::copy(b.begin(), b.end(), ws.input(1).begin());

            // serial baseline: one element, single thread
            std::vector<double> x(c.tape.nnz_out(0));
            std::vector<double> work(c.tape.n_w());
            const double* in[2] = {A.data(), b.data()};
            double* out[1] = {x.data()};
            auto serial = [&] { serial_eval_into(c.tape, in, out, work); };
            auto batched = [&] { batch_eval(c.tape, ws, threads); };
            for (int k = 0; k < options.warmup; ++k) {
                serial();
                batched();
            }
            std::vector<double> ts, tb;
            for (int k = 0; k < options.repetitions; ++k) {
                ts.push_back(time_per_call(serial));
                tb.push_back(time_per_call(batched));
            }
            BenchRecord r;
            r.n_instructions = c.n_instructions;
            r.batch_size = batch;
            r.n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), batch));
            r.t_serial_total = static_cast<double>(batch) * median(ts);
            r.t_batch = median(tb);
            r.speedup = r.t_serial_total / r.t_batch;
            r.repetitions = options.repetitions;
            records.push_back(r);
        }
    }
    return records;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records) {
    os << "n_instructions,batch_size,n_threads,t_serial_total,t_batch,speedup\n";
    char buf[160];
    for (const BenchRecord& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%d,%.9g,%.9g,%.6g\n", r.n_instructions, r.batch_size, r.n_threads,
                      r.t_serial_total, r.t_batch, r.speedup);
        os << buf;
    }
}

} // namespace vecsym
