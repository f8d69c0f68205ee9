#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace vecsym {

/// Compressed-column sparsity pattern. Row indices are strictly increasing
/// within each column.
class Sparsity {
public:
    Sparsity() = default;
    Sparsity(int rows, int cols, std::vector<int> colind, std::vector<int> row);

    static Sparsity dense(int rows, int cols);
    static Sparsity diagonal(int n);
    static Sparsity empty(int rows, int cols);
    static Sparsity lower(int n);
    /// Builds a pattern from (row, col) pairs; duplicates are merged.
    static Sparsity triplets(int rows, int cols, std::vector<std::pair<int, int>> entries);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int nnz() const { return static_cast<int>(row_.size()); }
    int numel() const { return rows_ * cols_; }
    bool is_dense() const { return nnz() == numel(); }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    bool is_symmetric() const;

    const std::vector<int>& colind() const { return colind_; }
    const std::vector<int>& row() const { return row_; }

    /// Nonzero index of (r, c), or -1 for a structural zero.
    int find(int r, int c) const;
    /// Column of the k-th stored nonzero.
    int col_of(int k) const;
    /// (row, col) of every stored nonzero, in storage order.
    std::vector<std::pair<int, int>> entries() const;

    Sparsity transpose() const;

    friend bool operator==(const Sparsity&, const Sparsity&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> colind_{0};
    std::vector<int> row_;
};

} // namespace vecsym
