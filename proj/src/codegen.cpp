#include "vecsym/codegen.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "vecsym/error.hpp"

namespace vecsym {
namespace {

// Opcode -> statement body. INPUT/OUTPUT/CONST are expanded by the emitter
// itself but still listed so the table is total.
constexpr std::string_view template_for(OpCode op) {
    switch (op) {
    case OpCode::Const: return "%o = %v;";
    case OpCode::Input: return "%o = inputs[%i][idx * nnz_in[%i] + %k];";
    case OpCode::Output: return "outputs[%i][idx * nnz_out[%i] + %k] = %0;";
    case OpCode::Assign: return "%o = %0;";
    case OpCode::Add: return "%o = %0 + %1;";
    case OpCode::Sub: return "%o = %0 - %1;";
    case OpCode::Mul: return "%o = %0 * %1;";
    case OpCode::Div: return "%o = %0 / %1;";
    case OpCode::Neg: return "%o = -%0;";
    case OpCode::Exp: return "%o = exp(%0);";
    case OpCode::Log: return "%o = log(%0);";
    case OpCode::Pow: return "%o = pow(%0, %1);";
    case OpCode::Sqrt: return "%o = sqrt(%0);";
    case OpCode::Sq: return "%o = %0 * %0;";
    case OpCode::Sin: return "%o = sin(%0);";
    case OpCode::Cos: return "%o = cos(%0);";
    case OpCode::Tan: return "%o = tan(%0);";
    case OpCode::Atan2: return "%o = atan2(%0, %1);";
    case OpCode::Fabs: return "%o = fabs(%0);";
    case OpCode::Fmin: return "%o = fmin(%0, %1);";
    case OpCode::Fmax: return "%o = fmax(%0, %1);";
    case OpCode::Step: return "%o = (%0 > 0.0 ? 1.0 : 0.0);";
    case OpCode::IfElse: return "%o = (%0 != 0.0 ? %1 : %2);";
    }
    return {};
}

constexpr bool template_table_total() {
    for (OpCode op : kAllOpCodes) {
        if (template_for(op).empty()) return false;
    }
    return true;
}
static_assert(template_table_total(), "every opcode needs an emission template");

std::string work_ref(std::int32_t k) { return "work[env_idx + " + std::to_string(k) + "]"; }

std::string c_literal(double v) {
    if (std::isnan(v)) return "NAN";
    if (std::isinf(v)) return v > 0 ? "INFINITY" : "(-INFINITY)";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return v < 0 ? "(" + s + ")" : s;
}

std::string expand(std::string_view tpl, const Instruction& ins) {
    std::string out;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '%' || i + 1 == tpl.size()) {
            out += tpl[i];
            continue;
        }
        const char key = tpl[++i];
        switch (key) {
        case 'o': out += work_ref(ins.out); break;
        case 'v': out += c_literal(ins.value); break;
        case 'i': out += std::to_string(ins.op == OpCode::Output ? ins.out : ins.in0); break;
        case 'k': out += std::to_string(ins.in1); break;
        case '0': out += work_ref(ins.in0); break;
        case '1': out += work_ref(ins.in1); break;
        case '2': out += work_ref(ins.in2); break;
        default: out += '%'; out += key;
        }
    }
    return out;
}

std::string int_array(const std::vector<int>& v) {
    std::string s = "{";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
    if (v.empty()) s += "0";
    return s + "}";
}

} // namespace

std::string_view statement_template(OpCode op) { return template_for(op); }

std::string kernel_identifier(const std::string& name) {
    std::string id;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        id += ok ? c : '_';
    }
    if (id.empty() || (id[0] >= '0' && id[0] <= '9')) id = "f_" + id;
    return id;
}

KernelSource emit_kernel(const InstructionTape& tape, int block_size) {
    if (block_size < 1) throw Error("emit_kernel: block size must be positive");
    const std::string id = kernel_identifier(tape.name());
    KernelSource ks;
    ks.function_name = "evaluate_kernel_" + id;
    ks.n_w = tape.n_w();
    ks.nnz_in = tape.nnz_in();
    ks.nnz_out = tape.nnz_out();
    ks.index_convention = "work[idx * n_w + k], inputs[i][idx * nnz_in[i] + k], outputs[j][idx * nnz_out[j] + k]";

    std::ostringstream os;
    os << "// " << tape.name() << ": " << tape.n_instructions() << " instructions, n_w = " << tape.n_w() << "\n";
    os << "#include <math.h>\n\n";
    os << "#define n_w " << tape.n_w() << "\n";
    os << "__device__ const int nnz_in[" << std::max<std::size_t>(1, ks.nnz_in.size())
       << "] = " << int_array(ks.nnz_in) << ";\n";
    os << "__device__ const int nnz_out[" << std::max<std::size_t>(1, ks.nnz_out.size())
       << "] = " << int_array(ks.nnz_out) << ";\n\n";
    os << "__global__ void " << ks.function_name << " (\n"
       << "        const double *inputs[],\n"
       << "        double *work,\n"
       << "        double *outputs[],\n"
       << "        const int batch_size) {\n\n"
       << "    int idx = blockIdx.x * blockDim.x + threadIdx.x;\n"
       << "    int env_idx = idx * n_w;\n"
       << "    if (idx < batch_size) {\n";
    for (const Instruction& ins : tape.instructions()) {
        const std::string_view tpl = template_for(ins.op);
        if (tpl.empty()) throw Error("emit_kernel: no template for opcode " + std::string(op_name(ins.op)));
        os << "        " << expand(tpl, ins) << "\n";
    }
    os << "    }\n"
       << "}\n\n";
    os << "#ifdef __CUDACC__\n"
       << "#define BLOCK_SIZE " << block_size << "\n"
       << "extern \"C\" void evaluate_" << id
       << "(const double *inputs[], double *work, double *outputs[], int batch_size) {\n"
       << "    int n_blocks = (batch_size + BLOCK_SIZE - 1) / BLOCK_SIZE;\n"
       << "    " << ks.function_name << "<<<n_blocks, BLOCK_SIZE>>>(inputs, work, outputs, batch_size);\n"
       << "}\n"
       << "#endif\n";
    ks.source_text = os.str();
    return ks;
}

} // namespace vecsym
