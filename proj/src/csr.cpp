#include "cnagnn/csr.hpp"

#include <algorithm>

namespace cnagnn {

double CsrMatrix::value(std::size_t row, std::size_t col) const {
  const auto begin = indices.begin() + static_cast<std::ptrdiff_t>(offsets[row]);
  const auto end = indices.begin() + static_cast<std::ptrdiff_t>(offsets[row + 1]);
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values[static_cast<std::size_t>(it - indices.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.offsets.assign(cols + 1, 0);
  for (std::size_t c : indices) ++t.offsets[c + 1];
  for (std::size_t c = 0; c < cols; ++c) t.offsets[c + 1] += t.offsets[c];
  t.indices.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::size_t> cursor(t.offsets.begin(), t.offsets.end() - 1);
  // Walking rows in order keeps the transposed column indices sorted.
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = offsets[r]; e < offsets[r + 1]; ++e) {
      const std::size_t slot = cursor[indices[e]]++;
      t.indices[slot] = r;
      t.values[slot] = values[e];
    }
  }
  return t;
}

bool CsrMatrix::is_symmetric() const { return rows == cols && transpose() == *this; }

SparseOperator::SparseOperator(CsrMatrix matrix) {
  auto shared = std::make_shared<const CsrMatrix>(std::move(matrix));
  if (shared->is_symmetric()) {
    transpose_ = shared;
  } else {
    transpose_ = std::make_shared<const CsrMatrix>(shared->transpose());
  }
  matrix_ = std::move(shared);
}

}  // namespace cnagnn
