#pragma once

#include <cstddef>
#include <memory>
#include <vector>

namespace cnagnn {

/// Compressed sparse row matrix of doubles. Column indices are sorted
/// ascending within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;  // rows + 1 entries
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return indices.size(); }

  /// Stored value at (row, col), or 0 when the entry is structurally absent.
  double value(std::size_t row, std::size_t col) const;

  CsrMatrix transpose() const;

  /// Exact (bitwise) symmetry check of structure and values.
  bool is_symmetric() const;

  bool operator==(const CsrMatrix&) const = default;
};

/// A constant sparse matrix usable on the autodiff tape. Keeps the transpose
/// around so the backward pass is a plain forward product.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(CsrMatrix matrix);

  const CsrMatrix& matrix() const { return *matrix_; }
  const CsrMatrix& transpose() const { return *transpose_; }
  bool defined() const noexcept { return matrix_ != nullptr; }

 private:
  std::shared_ptr<const CsrMatrix> matrix_;
  std::shared_ptr<const CsrMatrix> transpose_;
};

}  // namespace cnagnn
