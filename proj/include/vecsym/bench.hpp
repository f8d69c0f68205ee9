#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "vecsym/tape.hpp"

namespace vecsym {

/// Dense n x n positive definite solve: inputs A (n x n, only the lower
/// triangle is read) and b (n), output x with A x = b.
struct BenchCase {
    int n = 0;
    InstructionTape tape;
    std::size_t n_instructions = 0;
};

BenchCase gen_ldlt_case(int n);

/// Five sizes whose instruction counts step by roughly a decade each.
std::vector<int> default_bench_sizes();
std::vector<std::size_t> default_batch_sizes();

struct BenchOptions {
    std::vector<std::size_t> batch_sizes = default_batch_sizes();
    int n_threads = 0;
    int repetitions = 5;
    int warmup = 2;
    unsigned seed = 1;
};

struct BenchRecord {
    std::size_t n_instructions = 0;
    std::size_t batch_size = 0;
    int n_threads = 1;
    double t_serial_total = 0.0; // batch_size x median single-call time
    double t_batch = 0.0;        // median batch_eval time
    double speedup = 0.0;        // t_serial_total / t_batch
    int repetitions = 0;
};

std::vector<BenchRecord> run_benchmark(const std::vector<BenchCase>& cases, const BenchOptions& options);

/// Random symmetric, diagonally dominant systems for `batch` elements,
/// env-major (A column-major per element).
void fill_spd_inputs(const BenchCase& c, std::vector<double>& A, std::vector<double>& b, std::size_t batch,
                     unsigned seed);

void write_bench_csv(std::ostream& os, const std::vector<BenchRecord>& records);

} // namespace vecsym
