#pragma once

#include <string>
#include <vector>

#include "vecsym/tape.hpp"

namespace vecsym {

inline constexpr int kDefaultBlockSize = 256;

struct KernelSource {
    std::string function_name;
    std::string source_text;
    int n_w = 0;
    std::vector<int> nnz_in;
    std::vector<int> nnz_out;
    /// How batch element `idx` addresses its data in the emitted code.
    std::string index_convention;
};

/// Statement template for an opcode, with %o for the output slot and
/// %0/%1/%2 for operand expressions. Empty for opcodes that have no template.
std::string_view statement_template(OpCode op);

/// Emits one fused CUDA-dialect kernel: one thread per batch element,
/// env-major work slices (`env_idx = idx * n_w`), a bound check on
/// batch_size, and one statement per instruction in tape order. A host
/// launcher guarded by __CUDACC__ uses `block_size` threads per block.
KernelSource emit_kernel(const InstructionTape& tape, int block_size = kDefaultBlockSize);

/// Identifier-safe version of a tape name.
std::string kernel_identifier(const std::string& name);

} // namespace vecsym
