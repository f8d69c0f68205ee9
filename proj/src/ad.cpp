#include "vecsym/ad.hpp"

#include <algorithm>
#include <string>
#include <tuple>
#include <unordered_map>

#include "vecsym/error.hpp"

namespace vecsym {
namespace {

// Products and sums that recognize literal 0/1/-1 so adjoint expressions do
// not accumulate multiplications by the unit seed.
class AdjointAlgebra {
public:
    explicit AdjointAlgebra(ExprGraph& g) : g_(g) {}

    bool is_const(NodeId id, double v) const { return g_[id].op == OpCode::Const && g_[id].value == v; }

    NodeId c(double v) { return g_.constant(v); }
    NodeId op1(OpCode op, NodeId a) { return g_.apply(op, std::array<NodeId, 1>{a}); }
    NodeId op2(OpCode op, NodeId a, NodeId b) { return g_.apply(op, std::array<NodeId, 2>{a, b}); }
    NodeId op3(OpCode op, NodeId a, NodeId b, NodeId d) { return g_.apply(op, std::array<NodeId, 3>{a, b, d}); }

    /// adjoint * partial; kNoNode stands for an exact zero.
    NodeId mul(NodeId adj, NodeId partial) {
        if (adj == kNoNode || partial == kNoNode) return kNoNode;
        if (is_const(adj, 0.0) || is_const(partial, 0.0)) return kNoNode;
        if (is_const(adj, 1.0)) return partial;
        if (is_const(partial, 1.0)) return adj;
        if (is_const(partial, -1.0)) return op1(OpCode::Neg, adj);
        if (is_const(adj, -1.0)) return op1(OpCode::Neg, partial);
        return op2(OpCode::Mul, adj, partial);
    }

    NodeId accumulate(NodeId acc, NodeId term) {
        if (term == kNoNode) return acc;
        if (acc == kNoNode) return term;
        return op2(OpCode::Add, acc, term);
    }

private:
    ExprGraph& g_;
};

struct SweepState {
    std::vector<std::uint32_t> stamp;
    std::vector<NodeId> adj;
    std::vector<NodeId> cone;
    std::uint32_t epoch = 0;
};

void collect_cone(const ExprGraph& g, NodeId root, SweepState& st) {
    ++st.epoch;
    st.cone.clear();
    std::vector<NodeId> stack{root};
    st.stamp[root] = st.epoch;
    while (!stack.empty()) {
        NodeId id = stack.back();
        stack.pop_back();
        st.cone.push_back(id);
        for (NodeId a : g[id].args) {
            if (a != kNoNode && st.stamp[a] != st.epoch) {
                st.stamp[a] = st.epoch;
                stack.push_back(a);
            }
        }
    }
    std::sort(st.cone.begin(), st.cone.end(), std::greater<>());
}

/// Propagates the adjoint of node `id` (value `adj`) to its operands.
void propagate(ExprGraph& g, AdjointAlgebra& alg, NodeId id, NodeId adj, SweepState& st) {
    const Node n = g[id];
    const NodeId a = n.args[0];
    const NodeId b = n.args[1];
    const NodeId d = n.args[2];
    auto is_leaf_const = [&g](NodeId x) { return x == kNoNode || g[x].op == OpCode::Const; };
    auto push = [&](NodeId target, NodeId term) {
        if (is_leaf_const(target)) return;
        st.adj[target] = alg.accumulate(st.adj[target], term);
    };
    auto wants = [&](NodeId target) { return !is_leaf_const(target); };

    switch (n.op) {
    case OpCode::Assign:
        push(a, adj);
        break;
    case OpCode::Add:
        push(a, adj);
        push(b, adj);
        break;
    case OpCode::Sub:
        push(a, adj);
        if (wants(b)) push(b, alg.op1(OpCode::Neg, adj));
        break;
    case OpCode::Mul:
        if (wants(a)) push(a, alg.mul(adj, b));
        if (wants(b)) push(b, alg.mul(adj, a));
        break;
    case OpCode::Div:
        if (wants(a)) push(a, alg.op2(OpCode::Div, adj, b));
        if (wants(b)) push(b, alg.mul(adj, alg.op1(OpCode::Neg, alg.op2(OpCode::Div, id, b))));
        break;
    case OpCode::Neg:
        if (wants(a)) push(a, alg.op1(OpCode::Neg, adj));
        break;
    case OpCode::Exp:
        if (wants(a)) push(a, alg.mul(adj, id));
        break;
    case OpCode::Log:
        if (wants(a)) push(a, alg.op2(OpCode::Div, adj, a));
        break;
    case OpCode::Pow:
        if (wants(a)) {
            NodeId e1 = alg.op2(OpCode::Sub, b, alg.c(1.0));
            push(a, alg.mul(adj, alg.op2(OpCode::Mul, b, alg.op2(OpCode::Pow, a, e1))));
        }
        if (wants(b)) push(b, alg.mul(adj, alg.op2(OpCode::Mul, id, alg.op1(OpCode::Log, a))));
        break;
    case OpCode::Sqrt:
        if (wants(a)) push(a, alg.op2(OpCode::Div, adj, alg.op2(OpCode::Mul, alg.c(2.0), id)));
        break;
    case OpCode::Sq:
        if (wants(a)) push(a, alg.mul(adj, alg.op2(OpCode::Mul, alg.c(2.0), a)));
        break;
    case OpCode::Sin:
        if (wants(a)) push(a, alg.mul(adj, alg.op1(OpCode::Cos, a)));
        break;
    case OpCode::Cos:
        if (wants(a)) push(a, alg.mul(adj, alg.op1(OpCode::Neg, alg.op1(OpCode::Sin, a))));
        break;
    case OpCode::Tan:
        if (wants(a)) push(a, alg.mul(adj, alg.op2(OpCode::Add, alg.c(1.0), alg.op1(OpCode::Sq, id))));
        break;
    case OpCode::Atan2: {
        // atan2(y, x): dy = x / (x^2 + y^2), dx = -y / (x^2 + y^2)
        NodeId den = alg.op2(OpCode::Add, alg.op1(OpCode::Sq, b), alg.op1(OpCode::Sq, a));
        if (wants(a)) push(a, alg.mul(adj, alg.op2(OpCode::Div, b, den)));
        if (wants(b)) push(b, alg.mul(adj, alg.op2(OpCode::Div, alg.op1(OpCode::Neg, a), den)));
        break;
    }
    case OpCode::Fabs:
        if (wants(a)) {
            NodeId sign = alg.op2(OpCode::Sub, alg.op1(OpCode::Step, a),
                                  alg.op1(OpCode::Step, alg.op1(OpCode::Neg, a)));
            push(a, alg.mul(adj, sign));
        }
        break;
    case OpCode::Fmin: {
        // ties follow the first argument
        NodeId second = alg.op1(OpCode::Step, alg.op2(OpCode::Sub, a, b));
        if (wants(a)) push(a, alg.mul(adj, alg.op2(OpCode::Sub, alg.c(1.0), second)));
        if (wants(b)) push(b, alg.mul(adj, second));
        break;
    }
    case OpCode::Fmax: {
        NodeId second = alg.op1(OpCode::Step, alg.op2(OpCode::Sub, b, a));
        if (wants(a)) push(a, alg.mul(adj, alg.op2(OpCode::Sub, alg.c(1.0), second)));
        if (wants(b)) push(b, alg.mul(adj, second));
        break;
    }
    case OpCode::IfElse:
        if (wants(b)) push(b, alg.op3(OpCode::IfElse, a, adj, alg.c(0.0)));
        if (wants(d)) push(d, alg.op3(OpCode::IfElse, a, alg.c(0.0), adj));
        break;
    case OpCode::Step:
    case OpCode::Const:
    case OpCode::Input:
    case OpCode::Output:
        break;
    }
}

} // namespace

MatrixExpr jacobian(const MatrixExpr& f, const MatrixExpr& x) {
    ExprGraph* g = f.graph();
    ExprGraph* gx = x.graph();
    if (g != nullptr && gx != nullptr && g != gx) throw Error("jacobian: f and x belong to different builders");
    const int n_rows = f.numel();
    const int n_cols = x.numel();
    if (g == nullptr || gx == nullptr) return MatrixExpr::zeros(n_rows, n_cols);

    std::unordered_map<NodeId, int> column;
    {
        int k = 0;
        for (const auto& [r, c] : x.sparsity().entries()) {
            const SX& s = x.nz(k++);
            if (!s.is_input()) throw Error("jacobian: differentiation variable is not a symbol");
            if (!column.emplace(s.id(), r + c * x.rows()).second) {
                throw Error("jacobian: differentiation variable repeats a symbol");
            }
        }
    }

    AdjointAlgebra alg(*g);
    SweepState st;
    const std::size_t size0 = g->size();
    st.stamp.assign(size0, 0);
    st.adj.assign(size0, kNoNode);

    std::vector<std::tuple<int, int, SX>> entries;
    int k = 0;
    for (const auto& [fr, fc] : f.sparsity().entries()) {
        const NodeId root = f.nz(k++).id();
        const int row = fr + fc * f.rows();
        collect_cone(*g, root, st);
        st.adj[root] = g->constant(1.0);
        std::vector<std::pair<int, NodeId>> found;
        for (NodeId id : st.cone) {
            const NodeId adj = st.adj[id];
            if (adj == kNoNode) continue;
            const Node& n = (*g)[id];
            if (n.op == OpCode::Input) {
                auto it = column.find(id);
                if (it != column.end()) found.emplace_back(it->second, adj);
            } else {
                propagate(*g, alg, id, adj, st);
            }
        }
        for (NodeId id : st.cone) st.adj[id] = kNoNode;
        std::sort(found.begin(), found.end());
        for (const auto& [col, adj] : found) {
            if (alg.is_const(adj, 0.0)) continue;
            entries.emplace_back(row, col, SX(g, adj));
        }
    }

    std::vector<std::pair<int, int>> coords;
    coords.reserve(entries.size());
    for (const auto& [r, c, s] : entries) coords.emplace_back(r, c);
    Sparsity sp = Sparsity::triplets(n_rows, n_cols, coords);
    std::vector<SX> nz(entries.size());
    for (const auto& [r, c, s] : entries) nz[sp.find(r, c)] = s;
    return MatrixExpr(std::move(sp), std::move(nz));
}

MatrixExpr gradient(const MatrixExpr& f, const MatrixExpr& x) {
    if (!f.sparsity().is_scalar()) throw Error("gradient: expression is not 1x1");
    return transpose(jacobian(f, x));
}

MatrixExpr hessian(const MatrixExpr& f, const MatrixExpr& x) {
    if (!f.sparsity().is_scalar()) {
        throw Error("hessian: expression must be 1x1, got " + std::to_string(f.rows()) + "x" +
                    std::to_string(f.cols()));
    }
    return mirror_lower(jacobian(gradient(f, x), x));
}

std::vector<MatrixExpr> substitute(const std::vector<MatrixExpr>& exprs, const std::vector<MatrixExpr>& from,
                                   const std::vector<MatrixExpr>& to) {
    if (from.size() != to.size()) throw Error("substitute: from/to count mismatch");
    ExprGraph* g = nullptr;
    for (const MatrixExpr& e : exprs) {
        if (ExprGraph* ge = e.graph()) {
            if (g != nullptr && g != ge) throw Error("substitute: expressions from different builders");
            g = ge;
        }
    }
    if (g == nullptr) return exprs;

    const std::size_t size0 = g->size();
    std::vector<NodeId> map(size0, kNoNode);
    std::vector<char> replaced(size0, 0);
    for (std::size_t i = 0; i < from.size(); ++i) {
        if (from[i].nnz() != to[i].nnz()) {
            throw Error("substitute: replacement " + std::to_string(i) + " has a different number of nonzeros");
        }
        for (int k = 0; k < from[i].nnz(); ++k) {
            const SX& s = from[i].nz(k);
            if (!s.is_input()) throw Error("substitute: only symbols can be replaced");
            if (s.graph() != g || to[i].nz(k).graph() != g) throw Error("substitute: builder mismatch");
            map[s.id()] = to[i].nz(k).id();
            replaced[s.id()] = 1;
        }
    }

    std::vector<char> live(size0, 0);
    for (const MatrixExpr& e : exprs) {
        for (const SX& s : e.nonzeros()) live[s.id()] = 1;
    }
    for (std::size_t id = size0; id-- > 0;) {
        if (!live[id]) continue;
        for (NodeId a : (*g)[static_cast<NodeId>(id)].args) {
            if (a != kNoNode) live[a] = 1;
        }
    }
    for (std::size_t id = 0; id < size0; ++id) {
        if (!live[id] || replaced[id]) continue;
        const Node n = (*g)[static_cast<NodeId>(id)];
        if (n.op == OpCode::Const || n.op == OpCode::Input) {
            map[id] = static_cast<NodeId>(id);
            continue;
        }
        const int ar = arity(n.op);
        std::array<NodeId, 3> a{};
        bool same = true;
        for (int k = 0; k < ar; ++k) {
            a[k] = map[n.args[k]];
            same = same && a[k] == n.args[k];
        }
        map[id] = same ? static_cast<NodeId>(id) : g->apply(n.op, std::span<const NodeId>(a.data(), ar));
    }

    std::vector<MatrixExpr> out;
    out.reserve(exprs.size());
    for (const MatrixExpr& e : exprs) {
        std::vector<SX> nz;
        nz.reserve(e.nnz());
        for (const SX& s : e.nonzeros()) nz.emplace_back(g, map[s.id()]);
        out.emplace_back(e.sparsity(), std::move(nz));
    }
    return out;
}

MatrixExpr substitute(const MatrixExpr& expr, const std::vector<MatrixExpr>& from,
                      const std::vector<MatrixExpr>& to) {
    return substitute(std::vector<MatrixExpr>{expr}, from, to).front();
}

} // namespace vecsym
