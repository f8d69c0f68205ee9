#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vecsym/tape.hpp"

namespace vecsym {

/// Env-major buffers for a whole batch: element e owns
/// work[e * n_w, (e + 1) * n_w) and inputs[i][e * nnz_in[i], ...).
class BatchWorkspace {
public:
    BatchWorkspace(const InstructionTape& tape, std::size_t batch_size);

    std::size_t batch_size() const { return batch_size_; }
    int n_w() const { return n_w_; }
    const std::vector<int>& nnz_in() const { return nnz_in_; }
    const std::vector<int>& nnz_out() const { return nnz_out_; }

    std::span<double> input(int i) { return inputs_.at(i); }
    std::span<const double> input(int i) const { return inputs_.at(i); }
    std::span<double> output(int j) { return outputs_.at(j); }
    std::span<const double> output(int j) const { return outputs_.at(j); }
    std::span<double> work() { return work_; }

    /// Slice of input i / output j owned by element e.
    std::span<double> input(int i, std::size_t e);
    std::span<const double> output(int j, std::size_t e) const;

    /// True when the buffer shapes match `tape` at this batch size.
    bool matches(const InstructionTape& tape) const;

private:
    std::size_t batch_size_;
    int n_w_;
    std::vector<int> nnz_in_;
    std::vector<int> nnz_out_;
    std::vector<std::vector<double>> inputs_;
    std::vector<double> work_;
    std::vector<std::vector<double>> outputs_;
};

/// Single-instance reference interpreter; ground truth for batch_eval.
std::vector<std::vector<double>> serial_eval(const InstructionTape& tape,
                                             const std::vector<std::vector<double>>& inputs);

/// Serial evaluation into caller-provided buffers (no allocation besides the
/// work vector, which must hold n_w entries).
void serial_eval_into(const InstructionTape& tape, std::span<const double* const> inputs,
                      std::span<double* const> outputs, std::span<double> work);

struct BatchStats {
    double seconds = 0.0;
    int n_threads = 1;
};

/// Evaluates every batch element in lock step. The batch is split into one
/// contiguous chunk per worker; results are bit-identical to serial_eval on
/// each element and independent of the thread count. `n_threads` <= 0 uses
/// default_thread_count().
BatchStats batch_eval(const InstructionTape& tape, BatchWorkspace& ws, int n_threads = 0);

/// Evaluates only the listed elements, in the given order, on the calling
/// thread. batch_eval is built on this; tests use it to permute element order.
void eval_elements(const InstructionTape& tape, BatchWorkspace& ws, std::span<const std::size_t> elements);

/// VECSYM_THREADS if set and positive, else the OpenMP maximum.
int default_thread_count();
/// Hardware threads available to this process.
int hardware_thread_count();

} // namespace vecsym
