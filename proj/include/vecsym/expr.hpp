#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vecsym/opcode.hpp"
#include "vecsym/sparsity.hpp"

namespace vecsym {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

struct Node {
    OpCode op = OpCode::Const;
    std::array<NodeId, 3> args{kNoNode, kNoNode, kNoNode};
    double value = 0.0;     // CONST
    std::int32_t input = -1; // INPUT: symbol (builder) or input position (function)
    std::int32_t nz = -1;    // INPUT: nonzero index inside that symbol
};

/// Append-only, hash-consed DAG of scalar nodes. Operands always precede the
/// nodes that use them, so node order is a topological order.
class ExprGraph {
public:
    NodeId constant(double value);
    NodeId input(int symbol, int nz);
    /// Creates (or finds) a computational node. Folds to a constant when every
    /// operand is constant; no other rewriting takes place.
    NodeId apply(OpCode op, std::span<const NodeId> args);

    const Node& operator[](NodeId id) const { return nodes_[id]; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Key {
        OpCode op;
        std::array<NodeId, 3> args;
        std::uint64_t bits;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const noexcept;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Key, NodeId, KeyHash> index_;
};

/// Handle to a scalar node of a builder's graph.
class SX {
public:
    SX() = default;
    SX(ExprGraph* graph, NodeId id) : graph_(graph), id_(id) {}

    ExprGraph* graph() const { return graph_; }
    NodeId id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }
    const Node& node() const { return (*graph_)[id_]; }
    OpCode op() const { return node().op; }
    bool is_constant() const { return op() == OpCode::Const; }
    bool is_constant(double v) const { return is_constant() && node().value == v; }
    bool is_input() const { return op() == OpCode::Input; }

    friend bool operator==(const SX& a, const SX& b) { return a.graph_ == b.graph_ && a.id_ == b.id_; }

private:
    ExprGraph* graph_ = nullptr;
    NodeId id_ = kNoNode;
};

/// Builds op(args...) after checking arity and that all operands share a graph.
SX apply(OpCode op, std::initializer_list<SX> args);
SX apply(OpCode op, std::span<const SX> args);
SX constant_like(const SX& ref, double value);

SX operator+(const SX& a, const SX& b);
SX operator-(const SX& a, const SX& b);
SX operator*(const SX& a, const SX& b);
SX operator/(const SX& a, const SX& b);
SX operator-(const SX& a);
SX operator+(const SX& a, double b);
SX operator+(double a, const SX& b);
SX operator-(const SX& a, double b);
SX operator-(double a, const SX& b);
SX operator*(const SX& a, double b);
SX operator*(double a, const SX& b);
SX operator/(const SX& a, double b);
SX operator/(double a, const SX& b);

SX exp(const SX& a);
SX log(const SX& a);
SX pow(const SX& a, const SX& b);
SX sqrt(const SX& a);
SX sq(const SX& a);
SX sin(const SX& a);
SX cos(const SX& a);
SX tan(const SX& a);
SX atan2(const SX& y, const SX& x);
SX fabs(const SX& a);
SX fmin(const SX& a, const SX& b);
SX fmax(const SX& a, const SX& b);
SX step(const SX& a);
SX if_else(const SX& cond, const SX& if_true, const SX& if_false);

/// Sparse matrix of scalar expressions; one node per stored nonzero,
/// column-major. Structural zeros have no node.
class MatrixExpr {
public:
    MatrixExpr() = default;
    MatrixExpr(Sparsity sparsity, std::vector<SX> nonzeros);
    explicit MatrixExpr(const SX& scalar);

    /// Empty pattern (all structural zeros).
    static MatrixExpr zeros(int rows, int cols);
    /// Dense matrix from column-major entries.
    static MatrixExpr dense(int rows, int cols, std::vector<SX> entries);
    static MatrixExpr column(std::vector<SX> entries);

    const Sparsity& sparsity() const { return sparsity_; }
    const std::vector<SX>& nonzeros() const { return nonzeros_; }
    int rows() const { return sparsity_.rows(); }
    int cols() const { return sparsity_.cols(); }
    int nnz() const { return sparsity_.nnz(); }
    int numel() const { return sparsity_.numel(); }
    bool is_scalar() const { return sparsity_.is_scalar(); }

    const SX& nz(int k) const { return nonzeros_.at(k); }
    /// Entry (r, c), or nullopt for a structural zero.
    std::optional<SX> at(int r, int c) const;
    /// Entry (r, c) with structural zeros materialized as a constant in `graph`.
    SX get(int r, int c, ExprGraph* graph) const;
    /// The single nonzero of a dense 1x1 matrix.
    SX scalar() const;
    /// Any graph referenced by the nonzeros (nullptr when empty).
    ExprGraph* graph() const;

private:
    Sparsity sparsity_;
    std::vector<SX> nonzeros_;
};

// Matrix algebra. Results are expanded to scalar nodes; structurally-zero
// accumulations are omitted from the result pattern.
MatrixExpr mtimes(const MatrixExpr& a, const MatrixExpr& b);
MatrixExpr add(const MatrixExpr& a, const MatrixExpr& b);
MatrixExpr sub(const MatrixExpr& a, const MatrixExpr& b);
MatrixExpr transpose(const MatrixExpr& a);
/// Elementwise binary operation. MUL uses the pattern intersection, ADD/SUB the
/// union; other operations use the union and become dense where op(0, 0) != 0.
MatrixExpr elementwise(OpCode op, const MatrixExpr& a, const MatrixExpr& b);
/// Elementwise unary map; the pattern is kept when op(0) == 0.
MatrixExpr map(OpCode op, const MatrixExpr& a);
MatrixExpr scale(const SX& s, const MatrixExpr& a);
MatrixExpr vertcat(std::span<const MatrixExpr> parts);
MatrixExpr vertcat(std::initializer_list<MatrixExpr> parts);
MatrixExpr horzcat(std::span<const MatrixExpr> parts);
MatrixExpr horzcat(std::initializer_list<MatrixExpr> parts);
/// Keeps entries whose (row, col) is in `sparsity`; drops the others.
MatrixExpr project(const MatrixExpr& a, const Sparsity& sparsity);
/// Rows [begin, end) of a matrix.
MatrixExpr row_slice(const MatrixExpr& a, int begin, int end);
/// Symmetric matrix whose lower triangle is copied from `a` and mirrored.
MatrixExpr mirror_lower(const MatrixExpr& a);
/// Column-major vectorization into a numel x 1 column.
MatrixExpr vec(const MatrixExpr& a);

struct IoSpec {
    std::string name;
    Sparsity sparsity;
    friend bool operator==(const IoSpec&, const IoSpec&) = default;
};

/// Immutable function: declared inputs and outputs over a pruned, compact
/// copy of the expression graph. Safe to share across threads.
class SymbolicFunction {
public:
    SymbolicFunction() = default;

    const std::string& name() const { return data_->name; }
    int n_in() const { return static_cast<int>(data_->inputs.size()); }
    int n_out() const { return static_cast<int>(data_->outputs.size()); }
    const std::vector<IoSpec>& inputs() const { return data_->inputs; }
    const std::vector<IoSpec>& outputs() const { return data_->outputs; }
    int nnz_in(int i) const { return data_->inputs.at(i).sparsity.nnz(); }
    int nnz_out(int i) const { return data_->outputs.at(i).sparsity.nnz(); }

    /// Topologically ordered nodes; INPUT nodes carry (input position, nonzero).
    const std::vector<Node>& nodes() const { return data_->nodes; }
    const std::vector<std::vector<NodeId>>& output_nodes() const { return data_->output_nodes; }
    std::size_t node_count() const { return data_->nodes.size(); }
    std::size_t input_node_count() const;

    /// Reference evaluation directly on the graph.
    std::vector<std::vector<double>> evaluate(const std::vector<std::vector<double>>& inputs) const;

private:
    friend class Builder;
    struct Data {
        std::string name;
        std::vector<IoSpec> inputs;
        std::vector<IoSpec> outputs;
        std::vector<Node> nodes;
        std::vector<std::vector<NodeId>> output_nodes;
    };
    std::shared_ptr<const Data> data_;
};

/// Owns one expression graph and the symbols declared in it. Single-threaded.
class Builder {
public:
    Builder();
    Builder(const Builder&) = delete;
    Builder& operator=(const Builder&) = delete;
    Builder(Builder&&) = default;
    Builder& operator=(Builder&&) = default;

    MatrixExpr sym(const std::string& name, int rows, int cols = 1);
    MatrixExpr sym(const std::string& name, const Sparsity& sparsity);

    SX constant(double value);
    MatrixExpr constant(int rows, int cols, std::span<const double> column_major);
    MatrixExpr constant(const Sparsity& sparsity, std::span<const double> nonzeros);
    MatrixExpr identity(int n);

    /// Snapshot `outputs` as a function of `inputs`. Every input must be a
    /// declared symbol; every INPUT leaf reachable from the outputs must
    /// belong to one of them.
    SymbolicFunction function(const std::string& name, const std::vector<MatrixExpr>& inputs,
                              const std::vector<MatrixExpr>& outputs,
                              std::vector<std::string> output_names = {}) const;

    /// Inlines a function's graph on the given arguments.
    std::vector<MatrixExpr> call(const SymbolicFunction& f, const std::vector<MatrixExpr>& args);

    /// `base` if no symbol has that name yet, else `base_<k>` for the first free k.
    std::string unique_name(const std::string& base) const;
    bool has_symbol(const std::string& name) const;

    ExprGraph& graph() { return *graph_; }
    const ExprGraph& graph() const { return *graph_; }
    const std::string& symbol_name(int symbol) const { return symbols_.at(symbol).name; }
    const Sparsity& symbol_sparsity(int symbol) const { return symbols_.at(symbol).sparsity; }

private:
    struct Symbol {
        std::string name;
        Sparsity sparsity;
    };
    std::unique_ptr<ExprGraph> graph_;
    std::vector<Symbol> symbols_;
};

} // namespace vecsym
