#pragma once

// Dense kernels shared by the policies and the analysis tools: weighted ridge
// solves, alternating least squares over a sparse observation store, truncated
// SVD and rectangular maximum-weight assignment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "zkmrta/errors.hpp"

namespace zkmrta {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct RidgeProblem {
  Matrix basis;     // k x r design rows
  Vector weights;   // k, non-negative
  Vector values;    // k
  double lambda = 0.0;
};

// Minimizer of sum_t w_t (y_t - <B_t, x>)^2 + lambda |x|^2 by a direct
// Cholesky solve of the r x r normal equations.
inline Vector ridge_solve(const Matrix& basis, const Vector& weights, const Vector& values,
                          double lambda) {
  const auto k = basis.rows();
  const auto r = basis.cols();
  if (weights.size() != k || values.size() != k) {
    throw InputError("ridge_solve: basis, weights and values disagree in length");
  }
  if (lambda < 0.0) throw InputError("ridge_solve: lambda must be non-negative");

  Matrix normal = Matrix::Zero(r, r);
  Vector rhs = Vector::Zero(r);
  for (Eigen::Index t = 0; t < k; ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    normal.selfadjointView<Eigen::Lower>().rankUpdate(basis.row(t).transpose(), w);
    rhs.noalias() += (w * values[t]) * basis.row(t).transpose();
  }
  normal.diagonal().array() += lambda;
  normal = normal.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) throw SingularError("ridge_solve: normal matrix is singular");
  // Pivots of the factor; a cancelled pivot leaves only rounding noise.
  const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
  if (r > 0 && !(diag.minCoeff() > 1e-7 * diag.maxCoeff())) {
    throw SingularError("ridge_solve: normal matrix is singular");
  }
  return llt.solve(rhs);
}

inline Vector ridge_solve(const RidgeProblem& p) {
  return ridge_solve(p.basis, p.weights, p.values, p.lambda);
}

// One observed matrix cell reading. Unobserved cells have no entry at all.
struct Entry {
  int row = 0;
  int col = 0;
  double value = 0.0;
  double weight = 1.0;
};

// Append-only store of entries with per-row and per-column indices.
class ObservationStore {
 public:
  ObservationStore() = default;
  ObservationStore(int rows, int cols)
      : by_row_(static_cast<std::size_t>(rows)), by_col_(static_cast<std::size_t>(cols)) {}

  void add(const Entry& e) {
    by_row_[static_cast<std::size_t>(e.row)].push_back(entries_.size());
    by_col_[static_cast<std::size_t>(e.col)].push_back(entries_.size());
    entries_.push_back(e);
  }

  int rows() const noexcept { return static_cast<int>(by_row_.size()); }
  int cols() const noexcept { return static_cast<int>(by_col_.size()); }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Entry> entries() const noexcept { return entries_; }
  std::span<const std::size_t> row_entries(int i) const noexcept {
    return by_row_[static_cast<std::size_t>(i)];
  }
  std::span<const std::size_t> col_entries(int j) const noexcept {
    return by_col_[static_cast<std::size_t>(j)];
  }
  const Entry& operator[](std::size_t k) const noexcept { return entries_[k]; }

 private:
  std::vector<Entry> entries_;
  std::vector<std::vector<std::size_t>> by_row_;
  std::vector<std::vector<std::size_t>> by_col_;
};

// sum w (r - <p_row, u_col>)^2 + lambda (|P|^2 + |U|^2)
inline double als_objective(const ObservationStore& store, const Matrix& P, const Matrix& U,
                            double lambda) {
  double loss = 0.0;
  for (const auto& e : store.entries()) {
    const double resid = e.value - P.row(e.row).dot(U.row(e.col));
    loss += e.weight * resid * resid;
  }
  return loss + lambda * (P.squaredNorm() + U.squaredNorm());
}

namespace detail {

// Solve every factor row of `target` against the fixed `other` factors.
// `by_target` yields the entry ids of one target row; `other_of` maps an
// entry to the row of `other` it pairs with.
template <typename EntriesOf, typename OtherOf>
void als_half_sweep(const ObservationStore& store, Matrix& target, const Matrix& other,
                    double lambda, EntriesOf entries_of, OtherOf other_of) {
  const auto r = target.cols();
  Matrix normal(r, r);
  Vector rhs(r);
  Eigen::LLT<Matrix> llt(r);
  for (Eigen::Index t = 0; t < target.rows(); ++t) {
    const auto ids = entries_of(static_cast<int>(t));
    if (ids.empty()) continue;
    normal.setZero();
    rhs.setZero();
    for (const auto id : ids) {
      const Entry& e = store[id];
      const auto o = other.row(other_of(e)).transpose();
      normal.selfadjointView<Eigen::Lower>().rankUpdate(o, e.weight);
      rhs.noalias() += (e.weight * e.value) * o;
    }
    normal.diagonal().array() += lambda;
    llt.compute(normal);  // reads the lower triangle only
    if (llt.info() != Eigen::Success) continue;
    target.row(t) = llt.solve(rhs).transpose();
  }
}

}  // namespace detail

// Weighted ridge ALS. Each sweep solves every observed column (task) factor,
// then every observed row (robot) factor. Rows and columns without entries
// keep their current factors. With lambda > 0 every update is an exact block
// minimizer, so the objective is non-increasing.
inline void als_sweep(const ObservationStore& store, Matrix& P, Matrix& U, double lambda,
                      int sweeps) {
  if (store.empty()) return;
  for (int s = 0; s < sweeps; ++s) {
    detail::als_half_sweep(
        store, U, P, lambda, [&](int j) { return store.col_entries(j); },
        [](const Entry& e) { return e.row; });
    detail::als_half_sweep(
        store, P, U, lambda, [&](int i) { return store.row_entries(i); },
        [](const Entry& e) { return e.col; });
  }
}

struct SingularTriplets {
  Matrix left;     // rows x k
  Vector values;   // k, non-increasing
  Matrix right;    // cols x k
};

// Top-k singular triplets from a full dense decomposition.
inline SingularTriplets top_singular(const Matrix& m, int k) {
  const auto rank_cap = std::min(m.rows(), m.cols());
  if (k < 0 || k > rank_cap) throw InputError("top_singular: k exceeds matrix dimensions");
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU().leftCols(k), svd.singularValues().head(k), svd.matrixV().leftCols(k)};
}

inline Vector singular_values(const Matrix& m) {
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues();
}

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  double value = 0.0;
};

namespace detail {

// Shortest-augmenting-path Hungarian method minimizing cost; requires
// rows <= cols. Returns col index per row.
inline std::vector<int> hungarian_min(const Matrix& cost) {
  const int a = static_cast<int>(cost.rows());
  const int b = static_cast<int>(cost.cols());
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(a + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(b + 1), 0.0);
  std::vector<int> owner(static_cast<std::size_t>(b + 1), 0);
  std::vector<int> way(static_cast<std::size_t>(b + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(b + 1));
  std::vector<char> used(static_cast<std::size_t>(b + 1));

  for (int i = 1; i <= a; ++i) {
    owner[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = owner[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= b; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
        if (cur < minv[js]) {
          minv[js] = cur;
          way[js] = j0;
        }
        if (minv[js] < delta) {
          delta = minv[js];
          j1 = j;
        }
      }
      for (int j = 0; j <= b; ++j) {
        const auto js = static_cast<std::size_t>(j);
        if (used[js]) {
          u[static_cast<std::size_t>(owner[js])] += delta;
          v[js] -= delta;
        } else {
          minv[js] -= delta;
        }
      }
      j0 = j1;
    } while (owner[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      owner[static_cast<std::size_t>(j0)] = owner[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> col_of(static_cast<std::size_t>(a), -1);
  for (int j = 1; j <= b; ++j) {
    const int i = owner[static_cast<std::size_t>(j)];
    if (i > 0) col_of[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return col_of;
}

}  // namespace detail

// Maximum-weight one-to-one matching. With rows <= cols every row is matched;
// otherwise every column is matched and the surplus rows stay unmatched.
inline Assignment assignment_max(const Matrix& scores) {
  Assignment out;
  if (scores.size() == 0) return out;
  if (scores.rows() <= scores.cols()) {
    const auto col_of = detail::hungarian_min(-scores);
    for (std::size_t i = 0; i < col_of.size(); ++i) {
      out.pairs.emplace_back(static_cast<int>(i), col_of[i]);
    }
  } else {
    const Matrix transposed = -scores.transpose();
    const auto row_of = detail::hungarian_min(transposed);
    for (std::size_t j = 0; j < row_of.size(); ++j) {
      out.pairs.emplace_back(row_of[j], static_cast<int>(j));
    }
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  for (const auto& [i, j] : out.pairs) out.value += scores(i, j);
  return out;
}

}  // namespace zkmrta
