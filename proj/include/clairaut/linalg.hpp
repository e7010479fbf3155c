#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace clairaut {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

struct RankInfo {
  int rank = 0;
  std::vector<int> columns;  // pivot columns, ascending
  double scale = 0.0;        // largest absolute entry
};

/// Numeric rank by full-pivot LU. A pivot counts if it exceeds
/// tol * max(max|M|, floor); floor = 0 gives a purely relative threshold.
inline RankInfo numeric_rank(const Matrix& m, double tol, double floor = 0.0) {
  RankInfo info;
  if (m.size() == 0) return info;
  info.scale = m.cwiseAbs().maxCoeff();
  double ref = std::max(info.scale, floor);
  if (info.scale <= tol * ref || info.scale == 0.0) return info;
  Eigen::FullPivLU<Matrix> lu(m);
  lu.setThreshold(tol * ref / info.scale);
  info.rank = static_cast<int>(lu.rank());
  const auto& q = lu.permutationQ().indices();
  for (int k = 0; k < info.rank; ++k) info.columns.push_back(q(k));
  std::sort(info.columns.begin(), info.columns.end());
  return info;
}

inline Matrix principal_minor(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(idx.size(), idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b) out(a, b) = m(idx[a], idx[b]);
  return out;
}

/// True when the square matrix has full numeric rank under the same policy.
inline bool nonsingular(const Matrix& m, double tol, double floor = 0.0) {
  if (m.rows() == 0) return true;
  return numeric_rank(m, tol, floor).rank == m.rows();
}

}  // namespace clairaut
