#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vecsym/expr.hpp"
#include "vecsym/opcode.hpp"

namespace vecsym {

inline constexpr int kTapeFormatVersion = 1;
inline constexpr std::int32_t kUnused = -1;

/// One tape record. Field meaning by opcode:
///   INPUT   work[out] = input[in0][in1]
///   OUTPUT  output[out][in1] = work[in0]
///   CONST   work[out] = value
///   other   work[out] = op(work[in0], work[in1], work[in2])
/// Fields an opcode does not use hold kUnused.
struct Instruction {
    OpCode op = OpCode::Const;
    std::int32_t out = kUnused;
    std::int32_t in0 = kUnused;
    std::int32_t in1 = kUnused;
    std::int32_t in2 = kUnused;
    double value = 0.0;

    bool operator==(const Instruction& o) const;
};

/// Linear program over a work vector: what the batched runtime and the
/// kernel generator consume.
class InstructionTape {
public:
    InstructionTape() = default;
    /// Validates bounds and write-before-read; throws TapeFormatError.
    InstructionTape(std::string name, std::vector<IoSpec> inputs, std::vector<IoSpec> outputs,
                    std::vector<Instruction> instructions, int n_w);

    const std::string& name() const { return name_; }
    const std::vector<IoSpec>& inputs() const { return inputs_; }
    const std::vector<IoSpec>& outputs() const { return outputs_; }
    const std::vector<Instruction>& instructions() const { return instructions_; }
    int n_instructions() const { return static_cast<int>(instructions_.size()); }
    int n_w() const { return n_w_; }
    int n_in() const { return static_cast<int>(inputs_.size()); }
    int n_out() const { return static_cast<int>(outputs_.size()); }
    int nnz_in(int i) const { return inputs_.at(i).sparsity.nnz(); }
    int nnz_out(int i) const { return outputs_.at(i).sparsity.nnz(); }
    std::vector<int> nnz_in() const;
    std::vector<int> nnz_out() const;

    bool operator==(const InstructionTape&) const = default;

private:
    void validate() const;

    std::string name_;
    std::vector<IoSpec> inputs_;
    std::vector<IoSpec> outputs_;
    std::vector<Instruction> instructions_;
    int n_w_ = 0;
};

/// Lowers a function to a tape in topological order. Work slots are assigned
/// by linear-scan liveness: an instruction writes into the slot of its first
/// operand that dies there, else the lowest free slot.
InstructionTape flatten(const SymbolicFunction& f);

/// Deterministic structured text (JSON), one instruction row per line.
std::string serialize(const InstructionTape& tape);
/// Parses and validates; throws TapeFormatError naming the offending
/// instruction or field.
InstructionTape deserialize(std::string_view text);

InstructionTape load_tape(const std::string& path);
void save_tape(const InstructionTape& tape, const std::string& path);

} // namespace vecsym
