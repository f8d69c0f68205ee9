#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string_view>

namespace vecsym {

// Atomic scalar operations. The numeric values are part of the tape format's
// contract only through their names; do not rely on the ordinals on disk.
enum class OpCode : std::uint8_t {
    Const,
    Input,
    Output,
    Assign,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Pow,
    Sqrt,
    Sq,
    Sin,
    Cos,
    Tan,
    Atan2,
    Fabs,
    Fmin,
    Fmax,
    Step,
    IfElse,
};

inline constexpr std::size_t kNumOpCodes = static_cast<std::size_t>(OpCode::IfElse) + 1;

inline constexpr std::array<OpCode, kNumOpCodes> kAllOpCodes = {
    OpCode::Const, OpCode::Input, OpCode::Output, OpCode::Assign, OpCode::Add,   OpCode::Sub,
    OpCode::Mul,   OpCode::Div,   OpCode::Neg,    OpCode::Exp,    OpCode::Log,   OpCode::Pow,
    OpCode::Sqrt,  OpCode::Sq,    OpCode::Sin,    OpCode::Cos,    OpCode::Tan,   OpCode::Atan2,
    OpCode::Fabs,  OpCode::Fmin,  OpCode::Fmax,   OpCode::Step,   OpCode::IfElse,
};

/// Number of expression operands an opcode consumes. CONST and INPUT are
/// leaves; OUTPUT is a tape-only store with one operand.
constexpr int arity(OpCode op) {
    switch (op) {
    case OpCode::Const:
    case OpCode::Input:
        return 0;
    case OpCode::Output:
    case OpCode::Assign:
    case OpCode::Neg:
    case OpCode::Exp:
    case OpCode::Log:
    case OpCode::Sqrt:
    case OpCode::Sq:
    case OpCode::Sin:
    case OpCode::Cos:
    case OpCode::Tan:
    case OpCode::Fabs:
    case OpCode::Step:
        return 1;
    case OpCode::Add:
    case OpCode::Sub:
    case OpCode::Mul:
    case OpCode::Div:
    case OpCode::Pow:
    case OpCode::Atan2:
    case OpCode::Fmin:
    case OpCode::Fmax:
        return 2;
    case OpCode::IfElse:
        return 3;
    }
    return -1;
}

constexpr std::string_view op_name(OpCode op) {
    switch (op) {
    case OpCode::Const: return "CONST";
    case OpCode::Input: return "INPUT";
    case OpCode::Output: return "OUTPUT";
    case OpCode::Assign: return "ASSIGN";
    case OpCode::Add: return "ADD";
    case OpCode::Sub: return "SUB";
    case OpCode::Mul: return "MUL";
    case OpCode::Div: return "DIV";
    case OpCode::Neg: return "NEG";
    case OpCode::Exp: return "EXP";
    case OpCode::Log: return "LOG";
    case OpCode::Pow: return "POW";
    case OpCode::Sqrt: return "SQRT";
    case OpCode::Sq: return "SQ";
    case OpCode::Sin: return "SIN";
    case OpCode::Cos: return "COS";
    case OpCode::Tan: return "TAN";
    case OpCode::Atan2: return "ATAN2";
    case OpCode::Fabs: return "FABS";
    case OpCode::Fmin: return "FMIN";
    case OpCode::Fmax: return "FMAX";
    case OpCode::Step: return "STEP";
    case OpCode::IfElse: return "IF_ELSE";
    }
    return {};
}

constexpr std::optional<OpCode> op_from_name(std::string_view name) {
    for (OpCode op : kAllOpCodes) {
        if (op_name(op) == name) return op;
    }
    return std::nullopt;
}

/// True for opcodes that compute a value from operands (everything except
/// leaves and the tape-only store).
constexpr bool is_computational(OpCode op) {
    return op != OpCode::Const && op != OpCode::Input && op != OpCode::Output;
}

// Scalar semantics shared by the graph evaluator, the serial tape interpreter
// and the batched runtime.

// A NaN result of a commutative op propagates the first NaN operand.
inline double first_nan(double a, double b, double r) {
    if (r == r) return r;
    return a != a ? a : (b != b ? b : r);
}

template <OpCode Op>
inline double apply_op(double a, double b, double c) {
    if constexpr (Op == OpCode::Assign) return a;
    else if constexpr (Op == OpCode::Add) return first_nan(a, b, a + b);
    else if constexpr (Op == OpCode::Sub) return a - b;
    else if constexpr (Op == OpCode::Mul) return first_nan(a, b, a * b);
    else if constexpr (Op == OpCode::Div) return a / b;
    else if constexpr (Op == OpCode::Neg) return -a;
    else if constexpr (Op == OpCode::Exp) return std::exp(a);
    else if constexpr (Op == OpCode::Log) return std::log(a);
    else if constexpr (Op == OpCode::Pow) return std::pow(a, b);
    else if constexpr (Op == OpCode::Sqrt) return std::sqrt(a);
    else if constexpr (Op == OpCode::Sq) return a * a;
    else if constexpr (Op == OpCode::Sin) return std::sin(a);
    else if constexpr (Op == OpCode::Cos) return std::cos(a);
    else if constexpr (Op == OpCode::Tan) return std::tan(a);
    else if constexpr (Op == OpCode::Atan2) return std::atan2(a, b);
    else if constexpr (Op == OpCode::Fabs) return std::fabs(a);
    else if constexpr (Op == OpCode::Fmin) return first_nan(a, b, std::fmin(a, b));
    else if constexpr (Op == OpCode::Fmax) return first_nan(a, b, std::fmax(a, b));
    else if constexpr (Op == OpCode::Step) return a > 0.0 ? 1.0 : 0.0;
    else if constexpr (Op == OpCode::IfElse) return a != 0.0 ? b : c;
    else {
        (void)a;
        (void)b;
        (void)c;
        return 0.0;
    }
}

/// Runtime dispatch over apply_op. Leaves and OUTPUT are not evaluable here.
double eval_op(OpCode op, double a, double b = 0.0, double c = 0.0);

} // namespace vecsym
