#include "vecsym/sparsity.hpp"

#include <algorithm>
#include <string>

#include "vecsym/error.hpp"

namespace vecsym {

Sparsity::Sparsity(int rows, int cols, std::vector<int> colind, std::vector<int> row)
    : rows_(rows), cols_(cols), colind_(std::move(colind)), row_(std::move(row)) {
    if (rows < 0 || cols < 0) throw Error("sparsity: negative dimension");
    if (static_cast<int>(colind_.size()) != cols + 1 || colind_.front() != 0 ||
        colind_.back() != static_cast<int>(row_.size())) {
        throw Error("sparsity: inconsistent column pointers");
    }
    for (int c = 0; c < cols; ++c) {
        if (colind_[c] > colind_[c + 1]) throw Error("sparsity: decreasing column pointers");
        for (int k = colind_[c]; k < colind_[c + 1]; ++k) {
            if (row_[k] < 0 || row_[k] >= rows) {
                throw Error("sparsity: row index " + std::to_string(row_[k]) + " out of range");
            }
            if (k > colind_[c] && row_[k] <= row_[k - 1]) {
                throw Error("sparsity: row indices not strictly increasing in column " +
                            std::to_string(c));
            }
        }
    }
}

Sparsity Sparsity::dense(int rows, int cols) {
    std::vector<int> colind(cols + 1);
    std::vector<int> row;
    row.reserve(static_cast<std::size_t>(rows) * cols);
    for (int c = 0; c < cols; ++c) {
        colind[c] = c * rows;
        for (int r = 0; r < rows; ++r) row.push_back(r);
    }
    colind[cols] = rows * cols;
    return Sparsity(rows, cols, std::move(colind), std::move(row));
}

Sparsity Sparsity::diagonal(int n) {
    std::vector<int> colind(n + 1);
    std::vector<int> row(n);
    for (int i = 0; i < n; ++i) {
        colind[i] = i;
        row[i] = i;
    }
    colind[n] = n;
    return Sparsity(n, n, std::move(colind), std::move(row));
}

Sparsity Sparsity::empty(int rows, int cols) {
    return Sparsity(rows, cols, std::vector<int>(cols + 1, 0), {});
}

Sparsity Sparsity::lower(int n) {
    std::vector<int> colind(n + 1, 0);
    std::vector<int> row;
    for (int c = 0; c < n; ++c) {
        colind[c] = static_cast<int>(row.size());
        for (int r = c; r < n; ++r) row.push_back(r);
    }
    colind[n] = static_cast<int>(row.size());
    return Sparsity(n, n, std::move(colind), std::move(row));
}

Sparsity Sparsity::triplets(int rows, int cols, std::vector<std::pair<int, int>> entries) {
    for (const auto& [r, c] : entries) {
        if (r < 0 || r >= rows || c < 0 || c >= cols) throw Error("sparsity: triplet out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
    std::vector<int> colind(cols + 1, 0);
    std::vector<int> row;
    row.reserve(entries.size());
    for (const auto& [r, c] : entries) {
        ++colind[c + 1];
        row.push_back(r);
    }
    for (int c = 0; c < cols; ++c) colind[c + 1] += colind[c];
    return Sparsity(rows, cols, std::move(colind), std::move(row));
}

bool Sparsity::is_symmetric() const {
    if (rows_ != cols_) return false;
    for (const auto& [r, c] : entries()) {
        if (find(c, r) < 0) return false;
    }
    return true;
}

int Sparsity::find(int r, int c) const {
    if (r < 0 || r >= rows_ || c < 0 || c >= cols_) return -1;
    auto first = row_.begin() + colind_[c];
    auto last = row_.begin() + colind_[c + 1];
    auto it = std::lower_bound(first, last, r);
    if (it != last && *it == r) return static_cast<int>(it - row_.begin());
    return -1;
}

int Sparsity::col_of(int k) const {
    auto it = std::upper_bound(colind_.begin(), colind_.end(), k);
    return static_cast<int>(it - colind_.begin()) - 1;
}

std::vector<std::pair<int, int>> Sparsity::entries() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(row_.size());
    for (int c = 0; c < cols_; ++c) {
        for (int k = colind_[c]; k < colind_[c + 1]; ++k) out.emplace_back(row_[k], c);
    }
    return out;
}

Sparsity Sparsity::transpose() const {
    std::vector<std::pair<int, int>> t;
    t.reserve(row_.size());
    for (const auto& [r, c] : entries()) t.emplace_back(c, r);
    return triplets(cols_, rows_, std::move(t));
}

} // namespace vecsym
