#include "vecsym/opcode.hpp"

#include <string>

#include "vecsym/error.hpp"

namespace vecsym {

double eval_op(OpCode op, double a, double b, double c) {
    switch (op) {
    case OpCode::Assign: return apply_op<OpCode::Assign>(a, b, c);
    case OpCode::Add: return apply_op<OpCode::Add>(a, b, c);
    case OpCode::Sub: return apply_op<OpCode::Sub>(a, b, c);
    case OpCode::Mul: return apply_op<OpCode::Mul>(a, b, c);
    case OpCode::Div: return apply_op<OpCode::Div>(a, b, c);
    case OpCode::Neg: return apply_op<OpCode::Neg>(a, b, c);
    case OpCode::Exp: return apply_op<OpCode::Exp>(a, b, c);
    case OpCode::Log: return apply_op<OpCode::Log>(a, b, c);
    case OpCode::Pow: return apply_op<OpCode::Pow>(a, b, c);
    case OpCode::Sqrt: return apply_op<OpCode::Sqrt>(a, b, c);
    case OpCode::Sq: return apply_op<OpCode::Sq>(a, b, c);
    case OpCode::Sin: return apply_op<OpCode::Sin>(a, b, c);
    case OpCode::Cos: return apply_op<OpCode::Cos>(a, b, c);
    case OpCode::Tan: return apply_op<OpCode::Tan>(a, b, c);
    case OpCode::Atan2: return apply_op<OpCode::Atan2>(a, b, c);
    case OpCode::Fabs: return apply_op<OpCode::Fabs>(a, b, c);
    case OpCode::Fmin: return apply_op<OpCode::Fmin>(a, b, c);
    case OpCode::Fmax: return apply_op<OpCode::Fmax>(a, b, c);
    case OpCode::Step: return apply_op<OpCode::Step>(a, b, c);
    case OpCode::IfElse: return apply_op<OpCode::IfElse>(a, b, c);
    case OpCode::Const:
    case OpCode::Input:
    case OpCode::Output:
        break;
    }
    throw Error("eval_op: opcode " + std::string(op_name(op)) + " is not evaluable");
}

} // namespace vecsym
