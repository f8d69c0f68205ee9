#include "vecsym/expr.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <string>
#include <tuple>
#include <unordered_set>

#include "vecsym/error.hpp"

namespace vecsym {

// ---------------------------------------------------------------------------
// ExprGraph

std::size_t ExprGraph::KeyHash::operator()(const Key& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ static_cast<std::uint64_t>(k.op);
    auto mix = [&h](std::uint64_t v) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    };
    mix(k.args[0]);
    mix(k.args[1]);
    mix(k.args[2]);
    mix(k.bits);
    return static_cast<std::size_t>(h);
}

NodeId ExprGraph::constant(double value) {
    Key key{OpCode::Const, {kNoNode, kNoNode, kNoNode}, std::bit_cast<std::uint64_t>(value)};
    auto [it, inserted] = index_.try_emplace(key, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
        Node n;
        n.op = OpCode::Const;
        n.value = value;
        nodes_.push_back(n);
    }
    return it->second;
}

NodeId ExprGraph::input(int symbol, int nz) {
    Node n;
    n.op = OpCode::Input;
    n.input = symbol;
    n.nz = nz;
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId ExprGraph::apply(OpCode op, std::span<const NodeId> args) {
    if (!is_computational(op)) {
        throw Error("apply: " + std::string(op_name(op)) + " cannot be constructed by apply");
    }
    if (static_cast<int>(args.size()) != arity(op)) {
        throw Error("apply: " + std::string(op_name(op)) + " expects " + std::to_string(arity(op)) +
                    " operands, got " + std::to_string(args.size()));
    }
    std::array<NodeId, 3> a{kNoNode, kNoNode, kNoNode};
    bool all_const = true;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] >= nodes_.size()) throw Error("apply: operand refers to a node that does not exist");
        a[i] = args[i];
        all_const = all_const && nodes_[args[i]].op == OpCode::Const;
    }
    if (all_const) {
        double v[3] = {0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < args.size(); ++i) v[i] = nodes_[a[i]].value;
        return constant(eval_op(op, v[0], v[1], v[2]));
    }
    Key key{op, a, 0};
    auto [it, inserted] = index_.try_emplace(key, static_cast<NodeId>(nodes_.size()));
    if (inserted) {
        Node n;
        n.op = op;
        n.args = a;
        nodes_.push_back(n);
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// SX

namespace {

ExprGraph* common_graph(std::span<const SX> args) {
    ExprGraph* g = nullptr;
    for (const SX& s : args) {
        if (!s.valid()) throw Error("apply: operand is an empty expression");
        if (g != nullptr && s.graph() != g) throw Error("apply: operands belong to different builders");
        g = s.graph();
    }
    if (g == nullptr) throw Error("apply: no operands");
    return g;
}

} // namespace

SX apply(OpCode op, std::span<const SX> args) {
    if (static_cast<int>(args.size()) != arity(op) || !is_computational(op)) {
        throw Error("apply: " + std::string(op_name(op)) + " expects " + std::to_string(arity(op)) +
                    " operands, got " + std::to_string(args.size()));
    }
    ExprGraph* g = common_graph(args);
    std::array<NodeId, 3> ids{};
    for (std::size_t i = 0; i < args.size(); ++i) ids[i] = args[i].id();
    return SX(g, g->apply(op, std::span<const NodeId>(ids.data(), args.size())));
}

SX apply(OpCode op, std::initializer_list<SX> args) {
    return apply(op, std::span<const SX>(args.begin(), args.size()));
}

SX constant_like(const SX& ref, double value) {
    if (!ref.valid()) throw Error("constant_like: empty reference expression");
    return SX(ref.graph(), ref.graph()->constant(value));
}

SX operator+(const SX& a, const SX& b) { return apply(OpCode::Add, {a, b}); }
SX operator-(const SX& a, const SX& b) { return apply(OpCode::Sub, {a, b}); }
SX operator*(const SX& a, const SX& b) { return apply(OpCode::Mul, {a, b}); }
SX operator/(const SX& a, const SX& b) { return apply(OpCode::Div, {a, b}); }
SX operator-(const SX& a) { return apply(OpCode::Neg, {a}); }
SX operator+(const SX& a, double b) { return a + constant_like(a, b); }
SX operator+(double a, const SX& b) { return constant_like(b, a) + b; }
SX operator-(const SX& a, double b) { return a - constant_like(a, b); }
SX operator-(double a, const SX& b) { return constant_like(b, a) - b; }
SX operator*(const SX& a, double b) { return a * constant_like(a, b); }
SX operator*(double a, const SX& b) { return constant_like(b, a) * b; }
SX operator/(const SX& a, double b) { return a / constant_like(a, b); }
SX operator/(double a, const SX& b) { return constant_like(b, a) / b; }

SX exp(const SX& a) { return apply(OpCode::Exp, {a}); }
SX log(const SX& a) { return apply(OpCode::Log, {a}); }
SX pow(const SX& a, const SX& b) { return apply(OpCode::Pow, {a, b}); }
SX sqrt(const SX& a) { return apply(OpCode::Sqrt, {a}); }
SX sq(const SX& a) { return apply(OpCode::Sq, {a}); }
SX sin(const SX& a) { return apply(OpCode::Sin, {a}); }
SX cos(const SX& a) { return apply(OpCode::Cos, {a}); }
SX tan(const SX& a) { return apply(OpCode::Tan, {a}); }
SX atan2(const SX& y, const SX& x) { return apply(OpCode::Atan2, {y, x}); }
SX fabs(const SX& a) { return apply(OpCode::Fabs, {a}); }
SX fmin(const SX& a, const SX& b) { return apply(OpCode::Fmin, {a, b}); }
SX fmax(const SX& a, const SX& b) { return apply(OpCode::Fmax, {a, b}); }
SX step(const SX& a) { return apply(OpCode::Step, {a}); }
SX if_else(const SX& cond, const SX& if_true, const SX& if_false) {
    return apply(OpCode::IfElse, {cond, if_true, if_false});
}

// ---------------------------------------------------------------------------
// MatrixExpr

MatrixExpr::MatrixExpr(Sparsity sparsity, std::vector<SX> nonzeros)
    : sparsity_(std::move(sparsity)), nonzeros_(std::move(nonzeros)) {
    if (static_cast<int>(nonzeros_.size()) != sparsity_.nnz()) {
        throw Error("MatrixExpr: " + std::to_string(nonzeros_.size()) + " nonzeros for a pattern with nnz " +
                    std::to_string(sparsity_.nnz()));
    }
}

MatrixExpr::MatrixExpr(const SX& scalar) : MatrixExpr(Sparsity::dense(1, 1), {scalar}) {}

MatrixExpr MatrixExpr::zeros(int rows, int cols) { return MatrixExpr(Sparsity::empty(rows, cols), {}); }

MatrixExpr MatrixExpr::dense(int rows, int cols, std::vector<SX> entries) {
    return MatrixExpr(Sparsity::dense(rows, cols), std::move(entries));
}

MatrixExpr MatrixExpr::column(std::vector<SX> entries) {
    const int n = static_cast<int>(entries.size());
    return MatrixExpr(Sparsity::dense(n, 1), std::move(entries));
}

std::optional<SX> MatrixExpr::at(int r, int c) const {
    int k = sparsity_.find(r, c);
    if (k < 0) return std::nullopt;
    return nonzeros_[k];
}

SX MatrixExpr::get(int r, int c, ExprGraph* graph) const {
    if (auto v = at(r, c)) return *v;
    if (graph == nullptr) throw Error("MatrixExpr::get: structural zero requested without a graph");
    return SX(graph, graph->constant(0.0));
}

SX MatrixExpr::scalar() const {
    if (!is_scalar() || nnz() != 1) throw Error("MatrixExpr::scalar: expression is not a dense 1x1");
    return nonzeros_[0];
}

ExprGraph* MatrixExpr::graph() const {
    for (const SX& s : nonzeros_) {
        if (s.valid()) return s.graph();
    }
    return nullptr;
}

namespace {

using Entry = std::tuple<int, int, SX>;

MatrixExpr assemble(int rows, int cols, std::vector<Entry> entries) {
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::get<1>(a) != std::get<1>(b) ? std::get<1>(a) < std::get<1>(b)
                                                : std::get<0>(a) < std::get<0>(b);
    });
    std::vector<int> colind(cols + 1, 0);
    std::vector<int> row;
    std::vector<SX> nz;
    row.reserve(entries.size());
    nz.reserve(entries.size());
    for (const auto& [r, c, s] : entries) {
        if (!row.empty() && std::get<1>(entries[nz.size() - 1]) == c && row.back() == r) {
            throw Error("assemble: duplicate entry");
        }
        ++colind[c + 1];
        row.push_back(r);
        nz.push_back(s);
    }
    for (int c = 0; c < cols; ++c) colind[c + 1] += colind[c];
    return MatrixExpr(Sparsity(rows, cols, std::move(colind), std::move(row)), std::move(nz));
}

ExprGraph* graph_of(const MatrixExpr& a, const MatrixExpr& b) {
    ExprGraph* ga = a.graph();
    ExprGraph* gb = b.graph();
    if (ga != nullptr && gb != nullptr && ga != gb) throw Error("matrix operands belong to different builders");
    return ga != nullptr ? ga : gb;
}

std::string dims(const MatrixExpr& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

} // namespace

MatrixExpr mtimes(const MatrixExpr& a, const MatrixExpr& b) {
    if (a.cols() != b.rows()) throw Error("mtimes: dimension mismatch " + dims(a) + " * " + dims(b));
    const Sparsity& sa = a.sparsity();
    const Sparsity& sb = b.sparsity();
    std::vector<int> colind(b.cols() + 1, 0);
    std::vector<int> row;
    std::vector<SX> nz;
    std::vector<SX> acc(a.rows());
    std::vector<char> touched(a.rows(), 0);
    std::vector<int> rows_touched;
    for (int j = 0; j < b.cols(); ++j) {
        rows_touched.clear();
        for (int kb = sb.colind()[j]; kb < sb.colind()[j + 1]; ++kb) {
            const int k = sb.row()[kb];
            const SX& bk = b.nz(kb);
            for (int ka = sa.colind()[k]; ka < sa.colind()[k + 1]; ++ka) {
                const int i = sa.row()[ka];
                SX term = a.nz(ka) * bk;
                if (!touched[i]) {
                    touched[i] = 1;
                    acc[i] = term;
                    rows_touched.push_back(i);
                } else {
                    acc[i] = acc[i] + term;
                }
            }
        }
        std::sort(rows_touched.begin(), rows_touched.end());
        for (int i : rows_touched) {
            row.push_back(i);
            nz.push_back(acc[i]);
            touched[i] = 0;
        }
        colind[j + 1] = static_cast<int>(row.size());
    }
    return MatrixExpr(Sparsity(a.rows(), b.cols(), std::move(colind), std::move(row)), std::move(nz));
}

MatrixExpr elementwise(OpCode op, const MatrixExpr& a, const MatrixExpr& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error("elementwise " + std::string(op_name(op)) + ": dimension mismatch " + dims(a) + " vs " +
                    dims(b));
    }
    if (arity(op) != 2 || !is_computational(op)) {
        throw Error("elementwise: " + std::string(op_name(op)) + " is not a binary operation");
    }
    ExprGraph* g = graph_of(a, b);
    std::vector<Entry> out;
    if (op == OpCode::Mul) {
        for (int k = 0; k < a.nnz(); ++k) {
            const int r = a.sparsity().row()[k];
            const int c = a.sparsity().col_of(k);
            if (auto bv = b.at(r, c)) out.emplace_back(r, c, a.nz(k) * *bv);
        }
        return assemble(a.rows(), a.cols(), std::move(out));
    }
    const double at_zero = eval_op(op, 0.0, 0.0);
    const bool keep_pattern = at_zero == 0.0;
    for (int c = 0; c < a.cols(); ++c) {
        for (int r = 0; r < a.rows(); ++r) {
            auto av = a.at(r, c);
            auto bv = b.at(r, c);
            if (!av && !bv) {
                if (keep_pattern) continue;
                if (g == nullptr) throw Error("elementwise: cannot materialize constant without a graph");
                out.emplace_back(r, c, SX(g, g->constant(at_zero)));
                continue;
            }
            if (op == OpCode::Add && (!av || !bv)) {
                out.emplace_back(r, c, av ? *av : *bv);
            } else if (op == OpCode::Sub && !bv) {
                out.emplace_back(r, c, *av);
            } else if (op == OpCode::Sub && !av) {
                out.emplace_back(r, c, -*bv);
            } else {
                out.emplace_back(r, c, apply(op, {a.get(r, c, g), b.get(r, c, g)}));
            }
        }
    }
    return assemble(a.rows(), a.cols(), std::move(out));
}

MatrixExpr add(const MatrixExpr& a, const MatrixExpr& b) { return elementwise(OpCode::Add, a, b); }
MatrixExpr sub(const MatrixExpr& a, const MatrixExpr& b) { return elementwise(OpCode::Sub, a, b); }

MatrixExpr map(OpCode op, const MatrixExpr& a) {
    if (arity(op) != 1 || !is_computational(op)) {
        throw Error("map: " + std::string(op_name(op)) + " is not a unary operation");
    }
    const double at_zero = eval_op(op, 0.0);
    if (at_zero == 0.0) {
        std::vector<SX> nz;
        nz.reserve(a.nnz());
        for (const SX& s : a.nonzeros()) nz.push_back(apply(op, {s}));
        return MatrixExpr(a.sparsity(), std::move(nz));
    }
    ExprGraph* g = a.graph();
    if (g == nullptr) throw Error("map: cannot materialize constant without a graph");
    std::vector<SX> nz;
    for (int c = 0; c < a.cols(); ++c) {
        for (int r = 0; r < a.rows(); ++r) nz.push_back(apply(op, {a.get(r, c, g)}));
    }
    return MatrixExpr::dense(a.rows(), a.cols(), std::move(nz));
}

MatrixExpr transpose(const MatrixExpr& a) {
    std::vector<Entry> out;
    out.reserve(a.nnz());
    int k = 0;
    for (const auto& [r, c] : a.sparsity().entries()) out.emplace_back(c, r, a.nz(k++));
    return assemble(a.cols(), a.rows(), std::move(out));
}

MatrixExpr scale(const SX& s, const MatrixExpr& a) {
    std::vector<SX> nz;
    nz.reserve(a.nnz());
    for (const SX& v : a.nonzeros()) nz.push_back(s * v);
    return MatrixExpr(a.sparsity(), std::move(nz));
}

MatrixExpr vertcat(std::span<const MatrixExpr> parts) {
    int rows = 0;
    int cols = parts.empty() ? 0 : parts.front().cols();
    std::vector<Entry> out;
    for (const MatrixExpr& p : parts) {
        if (p.cols() != cols) throw Error("vertcat: column mismatch " + dims(p));
        int k = 0;
        for (const auto& [r, c] : p.sparsity().entries()) out.emplace_back(rows + r, c, p.nz(k++));
        rows += p.rows();
    }
    return assemble(rows, cols, std::move(out));
}

MatrixExpr vertcat(std::initializer_list<MatrixExpr> parts) {
    return vertcat(std::span<const MatrixExpr>(parts.begin(), parts.size()));
}

MatrixExpr horzcat(std::span<const MatrixExpr> parts) {
    int cols = 0;
    int rows = parts.empty() ? 0 : parts.front().rows();
    std::vector<Entry> out;
    for (const MatrixExpr& p : parts) {
        if (p.rows() != rows) throw Error("horzcat: row mismatch " + dims(p));
        int k = 0;
        for (const auto& [r, c] : p.sparsity().entries()) out.emplace_back(r, cols + c, p.nz(k++));
        cols += p.cols();
    }
    return assemble(rows, cols, std::move(out));
}

MatrixExpr horzcat(std::initializer_list<MatrixExpr> parts) {
    return horzcat(std::span<const MatrixExpr>(parts.begin(), parts.size()));
}

MatrixExpr project(const MatrixExpr& a, const Sparsity& sparsity) {
    if (sparsity.rows() != a.rows() || sparsity.cols() != a.cols()) throw Error("project: dimension mismatch");
    std::vector<Entry> out;
    int k = 0;
    for (const auto& [r, c] : a.sparsity().entries()) {
        if (sparsity.find(r, c) >= 0) out.emplace_back(r, c, a.nz(k));
        ++k;
    }
    return assemble(a.rows(), a.cols(), std::move(out));
}

MatrixExpr row_slice(const MatrixExpr& a, int begin, int end) {
    if (begin < 0 || end > a.rows() || begin > end) throw Error("row_slice: range out of bounds");
    std::vector<Entry> out;
    int k = 0;
    for (const auto& [r, c] : a.sparsity().entries()) {
        if (r >= begin && r < end) out.emplace_back(r - begin, c, a.nz(k));
        ++k;
    }
    return assemble(end - begin, a.cols(), std::move(out));
}

MatrixExpr mirror_lower(const MatrixExpr& a) {
    if (a.rows() != a.cols()) throw Error("mirror_lower: matrix is not square " + dims(a));
    std::vector<Entry> out;
    int k = 0;
    for (const auto& [r, c] : a.sparsity().entries()) {
        if (r >= c) {
            out.emplace_back(r, c, a.nz(k));
            if (r != c) out.emplace_back(c, r, a.nz(k));
        }
        ++k;
    }
    return assemble(a.rows(), a.cols(), std::move(out));
}

MatrixExpr vec(const MatrixExpr& a) {
    std::vector<Entry> out;
    int k = 0;
    for (const auto& [r, c] : a.sparsity().entries()) out.emplace_back(r + c * a.rows(), 0, a.nz(k++));
    return assemble(a.numel(), 1, std::move(out));
}

// ---------------------------------------------------------------------------
// SymbolicFunction

std::size_t SymbolicFunction::input_node_count() const {
    return static_cast<std::size_t>(std::count_if(data_->nodes.begin(), data_->nodes.end(),
                                                  [](const Node& n) { return n.op == OpCode::Input; }));
}

std::vector<std::vector<double>> SymbolicFunction::evaluate(const std::vector<std::vector<double>>& inputs) const {
    if (static_cast<int>(inputs.size()) != n_in()) {
        throw Error(name() + ": expected " + std::to_string(n_in()) + " inputs, got " +
                    std::to_string(inputs.size()));
    }
    for (int i = 0; i < n_in(); ++i) {
        if (static_cast<int>(inputs[i].size()) != nnz_in(i)) {
            throw Error(name() + ": input " + std::to_string(i) + " has " + std::to_string(inputs[i].size()) +
                        " values, expected " + std::to_string(nnz_in(i)));
        }
    }
    const auto& nodes = data_->nodes;
    std::vector<double> v(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        switch (n.op) {
        case OpCode::Const: v[i] = n.value; break;
        case OpCode::Input: v[i] = inputs[n.input][n.nz]; break;
        default: {
            const double a = n.args[0] != kNoNode ? v[n.args[0]] : 0.0;
            const double b = n.args[1] != kNoNode ? v[n.args[1]] : 0.0;
            const double c = n.args[2] != kNoNode ? v[n.args[2]] : 0.0;
            v[i] = eval_op(n.op, a, b, c);
        }
        }
    }
    std::vector<std::vector<double>> out(data_->output_nodes.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (NodeId id : data_->output_nodes[j]) out[j].push_back(v[id]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Builder

Builder::Builder() : graph_(std::make_unique<ExprGraph>()) {}

MatrixExpr Builder::sym(const std::string& name, int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw Error("sym(" + name + "): dimensions must be positive, got " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    }
    return sym(name, Sparsity::dense(rows, cols));
}

MatrixExpr Builder::sym(const std::string& name, const Sparsity& sparsity) {
    if (sparsity.rows() < 1 || sparsity.cols() < 1) throw Error("sym(" + name + "): zero dimension");
    if (has_symbol(name)) throw Error("sym: duplicate symbol name '" + name + "'");
    const int id = static_cast<int>(symbols_.size());
    symbols_.push_back({name, sparsity});
    std::vector<SX> nz;
    nz.reserve(sparsity.nnz());
    for (int k = 0; k < sparsity.nnz(); ++k) nz.emplace_back(graph_.get(), graph_->input(id, k));
    return MatrixExpr(sparsity, std::move(nz));
}

bool Builder::has_symbol(const std::string& name) const {
    return std::any_of(symbols_.begin(), symbols_.end(), [&](const Symbol& s) { return s.name == name; });
}

std::string Builder::unique_name(const std::string& base) const {
    if (!has_symbol(base)) return base;
    for (int k = 1;; ++k) {
        std::string candidate = base + "_" + std::to_string(k);
        if (!has_symbol(candidate)) return candidate;
    }
}

SX Builder::constant(double value) { return SX(graph_.get(), graph_->constant(value)); }

MatrixExpr Builder::constant(int rows, int cols, std::span<const double> column_major) {
    if (static_cast<int>(column_major.size()) != rows * cols) throw Error("constant: size mismatch");
    std::vector<SX> nz;
    nz.reserve(column_major.size());
    for (double v : column_major) nz.push_back(constant(v));
    return MatrixExpr::dense(rows, cols, std::move(nz));
}

MatrixExpr Builder::constant(const Sparsity& sparsity, std::span<const double> nonzeros) {
    if (static_cast<int>(nonzeros.size()) != sparsity.nnz()) throw Error("constant: nnz mismatch");
    std::vector<SX> nz;
    nz.reserve(nonzeros.size());
    for (double v : nonzeros) nz.push_back(constant(v));
    return MatrixExpr(sparsity, std::move(nz));
}

MatrixExpr Builder::identity(int n) {
    std::vector<SX> nz(n, constant(1.0));
    return MatrixExpr(Sparsity::diagonal(n), std::move(nz));
}

SymbolicFunction Builder::function(const std::string& name, const std::vector<MatrixExpr>& inputs,
                                   const std::vector<MatrixExpr>& outputs,
                                   std::vector<std::string> output_names) const {
    if (!output_names.empty() && output_names.size() != outputs.size()) {
        throw Error(name + ": output name count does not match output count");
    }
    auto data = std::make_shared<SymbolicFunction::Data>();
    data->name = name;

    // (input position, nonzero) for each builder INPUT node that is declared.
    std::unordered_map<NodeId, std::pair<int, int>> slot;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const MatrixExpr& in = inputs[i];
        std::string in_name = "i" + std::to_string(i);
        for (int k = 0; k < in.nnz(); ++k) {
            const SX& s = in.nz(k);
            if (s.graph() != graph_.get()) throw Error(name + ": input " + std::to_string(i) + " is from another builder");
            if (!s.is_input()) throw Error(name + ": input " + std::to_string(i) + " is not a pure symbol");
            if (!slot.emplace(s.id(), std::make_pair(static_cast<int>(i), k)).second) {
                throw Error(name + ": symbol '" + symbol_name(s.node().input) + "' declared twice");
            }
            if (k == 0) in_name = symbol_name(s.node().input);
        }
        data->inputs.push_back({in_name, in.sparsity()});
    }

    const ExprGraph& g = *graph_;
    std::vector<char> live(g.size(), 0);
    for (const MatrixExpr& out : outputs) {
        for (const SX& s : out.nonzeros()) {
            if (s.graph() != graph_.get()) throw Error(name + ": output expression is from another builder");
            live[s.id()] = 1;
        }
    }
    for (std::size_t id = g.size(); id-- > 0;) {
        if (!live[id]) continue;
        for (NodeId a : g[static_cast<NodeId>(id)].args) {
            if (a != kNoNode) live[a] = 1;
        }
    }

    std::vector<NodeId> remap(g.size(), kNoNode);
    for (std::size_t id = 0; id < g.size(); ++id) {
        if (!live[id]) continue;
        Node n = g[static_cast<NodeId>(id)];
        if (n.op == OpCode::Input) {
            auto it = slot.find(static_cast<NodeId>(id));
            if (it == slot.end()) {
                throw Error(name + ": output depends on symbol '" + symbol_name(n.input) +
                            "' which is not a declared input");
            }
            n.input = it->second.first;
            n.nz = it->second.second;
        }
        for (NodeId& a : n.args) {
            if (a != kNoNode) a = remap[a];
        }
        remap[id] = static_cast<NodeId>(data->nodes.size());
        data->nodes.push_back(n);
    }

    for (std::size_t j = 0; j < outputs.size(); ++j) {
        std::vector<NodeId> ids;
        ids.reserve(outputs[j].nnz());
        for (const SX& s : outputs[j].nonzeros()) ids.push_back(remap[s.id()]);
        data->output_nodes.push_back(std::move(ids));
        data->outputs.push_back(
            {output_names.empty() ? "o" + std::to_string(j) : output_names[j], outputs[j].sparsity()});
    }

    SymbolicFunction f;
    f.data_ = std::move(data);
    return f;
}

std::vector<MatrixExpr> Builder::call(const SymbolicFunction& f, const std::vector<MatrixExpr>& args) {
    if (static_cast<int>(args.size()) != f.n_in()) throw Error("call " + f.name() + ": wrong argument count");
    for (int i = 0; i < f.n_in(); ++i) {
        if (args[i].sparsity() != f.inputs()[i].sparsity) {
            throw Error("call " + f.name() + ": argument " + std::to_string(i) + " sparsity mismatch");
        }
    }
    std::vector<NodeId> map(f.node_count());
    for (std::size_t i = 0; i < f.node_count(); ++i) {
        const Node& n = f.nodes()[i];
        if (n.op == OpCode::Const) {
            map[i] = graph_->constant(n.value);
        } else if (n.op == OpCode::Input) {
            const SX& s = args[n.input].nz(n.nz);
            if (s.graph() != graph_.get()) throw Error("call " + f.name() + ": argument from another builder");
            map[i] = s.id();
        } else {
            std::array<NodeId, 3> a{};
            const int ar = arity(n.op);
            for (int k = 0; k < ar; ++k) a[k] = map[n.args[k]];
            map[i] = graph_->apply(n.op, std::span<const NodeId>(a.data(), ar));
        }
    }
    std::vector<MatrixExpr> out;
    for (int j = 0; j < f.n_out(); ++j) {
        std::vector<SX> nz;
        for (NodeId id : f.output_nodes()[j]) nz.emplace_back(graph_.get(), map[id]);
        out.emplace_back(f.outputs()[j].sparsity, std::move(nz));
    }
    return out;
}

} // namespace vecsym
