#include "vecsym/tape.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vecsym/error.hpp"

namespace vecsym {

using nlohmann::json;

bool Instruction::operator==(const Instruction& o) const {
    return op == o.op && out == o.out && in0 == o.in0 && in1 == o.in1 && in2 == o.in2 &&
           std::bit_cast<std::uint64_t>(value) == std::bit_cast<std::uint64_t>(o.value);
}

InstructionTape::InstructionTape(std::string name, std::vector<IoSpec> inputs, std::vector<IoSpec> outputs,
                                 std::vector<Instruction> instructions, int n_w)
    : name_(std::move(name)),
      inputs_(std::move(inputs)),
      outputs_(std::move(outputs)),
      instructions_(std::move(instructions)),
      n_w_(n_w) {
    validate();
}

std::vector<int> InstructionTape::nnz_in() const {
    std::vector<int> v;
    for (const auto& io : inputs_) v.push_back(io.sparsity.nnz());
    return v;
}

std::vector<int> InstructionTape::nnz_out() const {
    std::vector<int> v;
    for (const auto& io : outputs_) v.push_back(io.sparsity.nnz());
    return v;
}

void InstructionTape::validate() const {
    if (n_w_ < 0) throw TapeFormatError("tape: negative n_w");
    std::vector<char> written(n_w_, 0);
    std::vector<std::vector<char>> out_written;
    for (const auto& io : outputs_) out_written.emplace_back(io.sparsity.nnz(), 0);

    for (std::size_t i = 0; i < instructions_.size(); ++i) {
        const Instruction& ins = instructions_[i];
        const std::string where = "instruction " + std::to_string(i) + " (" + std::string(op_name(ins.op)) + ")";
        auto fail = [&](const std::string& msg) { throw TapeFormatError(where + ": " + msg); };
        auto check_range = [&](std::int32_t v, int hi, const char* field) {
            if (v < 0 || v >= hi) {
                fail(std::string(field) + " index " + std::to_string(v) + " out of range [0, " +
                     std::to_string(hi) + ")");
            }
        };
        auto check_read = [&](std::int32_t v, const char* field) {
            check_range(v, n_w_, field);
            if (!written[v]) fail(std::string(field) + " reads work[" + std::to_string(v) + "] before it is written");
        };
        auto check_unused = [&](std::int32_t v, const char* field) {
            if (v != kUnused) fail(std::string(field) + " must be -1 for this opcode");
        };

        switch (ins.op) {
        case OpCode::Input:
            check_range(ins.out, n_w_, "out");
            check_range(ins.in0, n_in(), "in0 (input)");
            check_range(ins.in1, nnz_in(ins.in0), "in1 (input nonzero)");
            check_unused(ins.in2, "in2");
            written[ins.out] = 1;
            break;
        case OpCode::Output:
            check_range(ins.out, n_out(), "out (output)");
            check_read(ins.in0, "in0");
            check_range(ins.in1, nnz_out(ins.out), "in1 (output nonzero)");
            check_unused(ins.in2, "in2");
            out_written[ins.out][ins.in1] = 1;
            break;
        case OpCode::Const:
            check_range(ins.out, n_w_, "out");
            check_unused(ins.in0, "in0");
            check_unused(ins.in1, "in1");
            check_unused(ins.in2, "in2");
            written[ins.out] = 1;
            break;
        default: {
            const int ar = arity(ins.op);
            const std::int32_t ins_in[3] = {ins.in0, ins.in1, ins.in2};
            const char* names[3] = {"in0", "in1", "in2"};
            for (int k = 0; k < 3; ++k) {
                if (k < ar) check_read(ins_in[k], names[k]);
                else check_unused(ins_in[k], names[k]);
            }
            check_range(ins.out, n_w_, "out");
            written[ins.out] = 1;
        }
        }
    }
    for (std::size_t j = 0; j < out_written.size(); ++j) {
        for (std::size_t k = 0; k < out_written[j].size(); ++k) {
            if (!out_written[j][k]) {
                throw TapeFormatError("tape: output " + std::to_string(j) + " nonzero " + std::to_string(k) +
                                      " is never written");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// flatten

InstructionTape flatten(const SymbolicFunction& f) {
    const auto& nodes = f.nodes();
    const std::size_t n_nodes = nodes.size();

    std::vector<std::int64_t> last_use(n_nodes, -1);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (NodeId a : nodes[i].args) {
            if (a != kNoNode) last_use[a] = static_cast<std::int64_t>(i);
        }
    }
    std::int64_t pos = static_cast<std::int64_t>(n_nodes);
    for (const auto& outs : f.output_nodes()) {
        for (NodeId id : outs) last_use[id] = pos++;
    }

    std::vector<std::int32_t> slot(n_nodes, kUnused);
    std::set<std::int32_t> free_slots;
    std::int32_t n_w = 0;
    auto fresh = [&]() {
        if (!free_slots.empty()) {
            std::int32_t s = *free_slots.begin();
            free_slots.erase(free_slots.begin());
            return s;
        }
        return n_w++;
    };

    std::vector<Instruction> code;
    code.reserve(n_nodes + pos - n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const Node& n = nodes[i];
        Instruction ins;
        ins.op = n.op;
        if (n.op == OpCode::Input) {
            ins.out = fresh();
            ins.in0 = n.input;
            ins.in1 = n.nz;
        } else if (n.op == OpCode::Const) {
            ins.out = fresh();
            ins.value = n.value;
        } else {
            const int ar = arity(n.op);
            std::int32_t* fields[3] = {&ins.in0, &ins.in1, &ins.in2};
            std::int32_t reuse = kUnused;
            std::vector<std::int32_t> dying;
            for (int k = 0; k < ar; ++k) {
                const NodeId a = n.args[k];
                *fields[k] = slot[a];
                if (last_use[a] == static_cast<std::int64_t>(i)) {
                    bool seen = false;
                    for (std::int32_t s : dying) seen = seen || s == slot[a];
                    if (!seen) dying.push_back(slot[a]);
                }
            }
            if (!dying.empty()) {
                reuse = dying.front();
                for (std::size_t k = 1; k < dying.size(); ++k) free_slots.insert(dying[k]);
            }
            ins.out = reuse != kUnused ? reuse : fresh();
        }
        slot[i] = ins.out;
        code.push_back(ins);
    }
    for (int j = 0; j < f.n_out(); ++j) {
        const auto& outs = f.output_nodes()[j];
        for (std::size_t k = 0; k < outs.size(); ++k) {
            Instruction ins;
            ins.op = OpCode::Output;
            ins.out = j;
            ins.in0 = slot[outs[k]];
            ins.in1 = static_cast<std::int32_t>(k);
            code.push_back(ins);
        }
    }
    return InstructionTape(f.name(), f.inputs(), f.outputs(), std::move(code), n_w);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json value_to_json(double v) {
    if (std::isfinite(v)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%016llx",
                  static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
    return std::string(buf);
}

json io_to_json(const IoSpec& io) {
    return json{{"name", io.name},
                {"sparsity",
                 {{"rows", io.sparsity.rows()},
                  {"cols", io.sparsity.cols()},
                  {"colind", io.sparsity.colind()},
                  {"row", io.sparsity.row()}}}};
}

} // namespace

std::string serialize(const InstructionTape& tape) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"format_version\": " << kTapeFormatVersion << ",\n";
    os << "  \"name\": " << json(tape.name()).dump() << ",\n";
    os << "  \"n_instructions\": " << tape.n_instructions() << ",\n";
    os << "  \"n_w\": " << tape.n_w() << ",\n";
    os << "  \"nnz_in\": " << json(tape.nnz_in()).dump() << ",\n";
    os << "  \"nnz_out\": " << json(tape.nnz_out()).dump() << ",\n";
    auto io_block = [&os](const char* key, const std::vector<IoSpec>& ios) {
        os << "  \"" << key << "\": [";
        for (std::size_t i = 0; i < ios.size(); ++i) {
            os << (i == 0 ? "\n" : ",\n") << "    " << io_to_json(ios[i]).dump();
        }
        os << (ios.empty() ? "],\n" : "\n  ],\n");
    };
    io_block("inputs", tape.inputs());
    io_block("outputs", tape.outputs());
    os << "  \"instructions\": [";
    const auto& code = tape.instructions();
    for (std::size_t i = 0; i < code.size(); ++i) {
        const Instruction& ins = code[i];
        json row = json::array({std::string(op_name(ins.op)), ins.out, ins.in0, ins.in1, ins.in2,
                                value_to_json(ins.value)});
        os << (i == 0 ? "\n" : ",\n") << "    " << row.dump(-1, ' ', false);
    }
    os << (code.empty() ? "]\n" : "\n  ]\n");
    os << "}\n";
    return os.str();
}

namespace {

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw TapeFormatError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw TapeFormatError(where + ": field '" + key + "' has the wrong type");
    }
}

IoSpec io_from_json(const json& j, const std::string& where) {
    IoSpec io;
    io.name = field<std::string>(j, "name", where);
    const json sp = field<json>(j, "sparsity", where);
    try {
        io.sparsity = Sparsity(field<int>(sp, "rows", where), field<int>(sp, "cols", where),
                               field<std::vector<int>>(sp, "colind", where), field<std::vector<int>>(sp, "row", where));
    } catch (const TapeFormatError&) {
        throw;
    } catch (const Error& e) {
        throw TapeFormatError(where + ": " + e.what());
    }
    return io;
}

double value_from_json(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.size() == 18 && s.rfind("0x", 0) == 0) {
            try {
                return std::bit_cast<double>(static_cast<std::uint64_t>(std::stoull(s.substr(2), nullptr, 16)));
            } catch (const std::exception&) {
            }
        }
    }
    throw TapeFormatError(where + ": invalid constant value " + v.dump());
}

} // namespace

InstructionTape deserialize(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw TapeFormatError("tape: parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    if (!doc.is_object()) throw TapeFormatError("tape: top level is not an object");
    const int version = field<int>(doc, "format_version", "tape");
    if (version != kTapeFormatVersion) {
        throw TapeFormatError("tape: format_version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kTapeFormatVersion) + ")");
    }
    const auto name = field<std::string>(doc, "name", "tape");
    const int n_instructions = field<int>(doc, "n_instructions", "tape");
    const int n_w = field<int>(doc, "n_w", "tape");
    const auto nnz_in = field<std::vector<int>>(doc, "nnz_in", "tape");
    const auto nnz_out = field<std::vector<int>>(doc, "nnz_out", "tape");

    std::vector<IoSpec> inputs;
    std::vector<IoSpec> outputs;
    const json in_arr = field<json>(doc, "inputs", "tape");
    const json out_arr = field<json>(doc, "outputs", "tape");
    if (!in_arr.is_array() || !out_arr.is_array()) throw TapeFormatError("tape: inputs/outputs must be arrays");
    for (std::size_t i = 0; i < in_arr.size(); ++i) inputs.push_back(io_from_json(in_arr[i], "input " + std::to_string(i)));
    for (std::size_t i = 0; i < out_arr.size(); ++i) {
        outputs.push_back(io_from_json(out_arr[i], "output " + std::to_string(i)));
    }
    if (nnz_in.size() != inputs.size()) throw TapeFormatError("tape: nnz_in length does not match inputs");
    if (nnz_out.size() != outputs.size()) throw TapeFormatError("tape: nnz_out length does not match outputs");
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (nnz_in[i] != inputs[i].sparsity.nnz()) {
            throw TapeFormatError("tape: nnz_in[" + std::to_string(i) + "] disagrees with input sparsity");
        }
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (nnz_out[i] != outputs[i].sparsity.nnz()) {
            throw TapeFormatError("tape: nnz_out[" + std::to_string(i) + "] disagrees with output sparsity");
        }
    }

    const json rows = field<json>(doc, "instructions", "tape");
    if (!rows.is_array()) throw TapeFormatError("tape: instructions must be an array");
    if (static_cast<int>(rows.size()) != n_instructions) {
        throw TapeFormatError("tape: n_instructions is " + std::to_string(n_instructions) + " but " +
                              std::to_string(rows.size()) + " instruction rows are present");
    }
    std::vector<Instruction> code;
    code.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string where = "instruction " + std::to_string(i);
        const json& r = rows[i];
        if (!r.is_array() || r.size() != 6) throw TapeFormatError(where + ": expected a row of 6 fields");
        if (!r[0].is_string()) throw TapeFormatError(where + ": opcode must be a string");
        const std::string op_str = r[0].get<std::string>();
        auto op = op_from_name(op_str);
        if (!op) throw TapeFormatError(where + ": unknown opcode '" + op_str + "'");
        Instruction ins;
        ins.op = *op;
        std::int32_t* ints[4] = {&ins.out, &ins.in0, &ins.in1, &ins.in2};
        for (int k = 0; k < 4; ++k) {
            if (!r[k + 1].is_number_integer()) {
                throw TapeFormatError(where + ": field " + std::to_string(k + 1) + " must be an integer");
            }
            *ints[k] = r[k + 1].get<std::int32_t>();
        }
        ins.value = value_from_json(r[5], where);
        code.push_back(ins);
    }
    return InstructionTape(name, std::move(inputs), std::move(outputs), std::move(code), n_w);
}

InstructionTape load_tape(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open tape file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

void save_tape(const InstructionTape& tape, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write tape file: " + path);
    out << serialize(tape);
}

} // namespace vecsym
