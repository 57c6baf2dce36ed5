#pragma once

// Dense revised simplex for the convex-combination program behind the lower
// convex envelope:
//
//   minimise  sum_j c_j w_j   subject to  sum_j w_j t_j = t,  sum_j w_j = 1,  w >= 0.
//
// Columns are (t_j, 1) with t_j in R^n, so the basis has n + 1 columns. Pricing picks
// the most negative reduced cost until a run of degenerate pivots is seen, then
// switches to Bland's rule, which cannot cycle. Ties always go to the lowest column
// id, so the pivot sequence is deterministic. The basis inverse is rebuilt from
// scratch at every pivot.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"

namespace smooth_insert {

class EnvelopeLp {
 public:
  static constexpr int kMaxRows = kMaxDim + 1;

  struct Solution {
    double value = 0.0;
    /// Basic columns and their weights (weights may be zero for degenerate bases).
    std::vector<int> basis;
    std::vector<double> weights;
    /// Dual multipliers (a_0..a_{n-1}, b): the affine minorant t -> a.t + b supports the costs.
    std::array<double, kMaxRows> dual{};
    int pivots = 0;
  };

  EnvelopeLp(int dim, std::vector<Point> coords, std::vector<double> costs)
      : dim_(dim), rows_(dim + 1), coords_(std::move(coords)), costs_(std::move(costs)) {
    if (dim < 1 || dim > kMaxDim) throw InputError("LP dimension must be 1 to 3");
    if (coords_.size() != costs_.size() || coords_.empty()) throw InputError("LP needs one cost per column");
    double scale = 0.0;
    for (double c : costs_) scale = std::max(scale, std::abs(c));
    rc_tol_ = 1e-12 * std::max(scale, 1e-300);
  }

  std::size_t columns() const { return coords_.size(); }
  int rows() const { return rows_; }

  /// Solves for target `t`. A warm basis (n + 1 column ids) is used directly when it
  /// is primal feasible for `t`, repaired by dual simplex pivots when it is only dual
  /// feasible, and otherwise replaced by a two-phase start.
  Solution solve(const Point& t, std::span<const int> warm = {}) const {
    std::array<double, kMaxRows> b{};
    for (int i = 0; i < dim_; ++i) b[i] = t[i];
    b[dim_] = 1.0;

    Solution sol;
    std::vector<int> basis;
    if (static_cast<int>(warm.size()) == rows_) {
      basis.assign(warm.begin(), warm.end());
      Mat inv;
      if (invert(basis, inv)) {
        const auto x = apply(inv, b);
        bool feasible = true;
        for (int r = 0; r < rows_; ++r) feasible = feasible && x[r] >= -1e-12;
        if (!feasible && !dual_simplex(basis, b, sol.pivots)) basis.clear();
      } else {
        basis.clear();
      }
    }
    if (basis.empty()) basis = phase_one(b, sol.pivots);
    iterate(basis, b, /*phase_one=*/false, sol.pivots);

    Mat inv;
    if (!invert(basis, inv)) throw InvariantError("singular final basis in envelope LP");
    const auto x = apply(inv, b);
    sol.basis = basis;
    sol.weights.resize(rows_);
    sol.value = 0.0;
    for (int r = 0; r < rows_; ++r) {
      sol.weights[r] = std::max(0.0, x[r]);
      sol.value += costs_[basis[r]] * x[r];
    }
    for (int i = 0; i < rows_; ++i) {
      double pi = 0.0;
      for (int r = 0; r < rows_; ++r) pi += costs_[basis[r]] * inv[r][i];
      sol.dual[i] = pi;
    }
    return sol;
  }

 private:
  using Mat = std::array<std::array<double, kMaxRows>, kMaxRows>;

  // Column ids >= columns() denote artificial unit columns.
  double entry(int col, int row) const {
    const int n = static_cast<int>(coords_.size());
    if (col >= n) return (col - n) == row ? 1.0 : 0.0;
    return row < dim_ ? coords_[col][row] : 1.0;
  }

  bool invert(const std::vector<int>& basis, Mat& inv) const {
    Mat a{};
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < rows_; ++c) a[r][c] = entry(basis[c], r);
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < rows_; ++c) inv[r][c] = r == c ? 1.0 : 0.0;
    for (int c = 0; c < rows_; ++c) {
      int piv = c;
      for (int r = c + 1; r < rows_; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      if (std::abs(a[piv][c]) < 1e-12) return false;
      std::swap(a[piv], a[c]);
      std::swap(inv[piv], inv[c]);
      const double d = a[c][c];
      for (int k = 0; k < rows_; ++k) {
        a[c][k] /= d;
        inv[c][k] /= d;
      }
      for (int r = 0; r < rows_; ++r) {
        if (r == c || a[r][c] == 0.0) continue;
        const double m = a[r][c];
        for (int k = 0; k < rows_; ++k) {
          a[r][k] -= m * a[c][k];
          inv[r][k] -= m * inv[c][k];
        }
      }
    }
    return true;
  }

  std::array<double, kMaxRows> apply(const Mat& inv, const std::array<double, kMaxRows>& v) const {
    std::array<double, kMaxRows> out{};
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < rows_; ++c) out[r] += inv[r][c] * v[c];
    return out;
  }

  double cost(int col, bool phase_one) const {
    const int n = static_cast<int>(coords_.size());
    if (phase_one) return col >= n ? 1.0 : 0.0;
    return col >= n ? 0.0 : costs_[col];
  }

  // Pivots until optimal: most negative reduced cost first, switching to Bland's rule
  // for good after a run of degenerate pivots. Artificial columns never re-enter.
  void iterate(std::vector<int>& basis, const std::array<double, kMaxRows>& b, bool phase_one, int& pivots) const {
    const int n = static_cast<int>(coords_.size());
    const double tol = phase_one ? 1e-12 : rc_tol_;
    const long max_pivots = 200L * (n + rows_) + 1000;
    bool bland = false;
    int degenerate_run = 0;
    for (long it = 0;; ++it) {
      if (it > max_pivots) throw InvariantError("envelope LP exceeded its pivot budget");
      Mat inv;
      if (!invert(basis, inv)) throw InvariantError("singular basis in envelope LP");
      const auto x = apply(inv, b);
      std::array<double, kMaxRows> pi{};
      for (int i = 0; i < rows_; ++i)
        for (int r = 0; r < rows_; ++r) pi[i] += cost(basis[r], phase_one) * inv[r][i];

      int entering = -1;
      double most_negative = -tol;
      for (int j = 0; j < n; ++j) {
        double d = phase_one ? 0.0 : costs_[j];
        for (int i = 0; i < dim_; ++i) d -= pi[i] * coords_[j][i];
        d -= pi[dim_];
        if (d >= most_negative || std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
        entering = j;
        if (bland) break;
        most_negative = d;
      }
      if (entering < 0) return;
      std::array<double, kMaxRows> col{};
      for (int r = 0; r < rows_; ++r) col[r] = entry(entering, r);
      const auto u = apply(inv, col);
      // Basic values within round-off of zero are treated as exactly degenerate, so
      // that ties in the ratio test are exact and Bland's rule stays cycle-free.
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < rows_; ++r) {
        if (u[r] <= 1e-11) continue;
        const double xr = x[r] <= kZero ? 0.0 : x[r];
        const double ratio = xr / u[r];
        if (leave < 0 || ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[r] < basis[leave])) {
          if (leave < 0 || ratio < best - 1e-12) best = ratio;
          leave = r;
        }
      }
      if (leave < 0) throw InvariantError("envelope LP is unbounded, which the simplex constraint forbids");
      degenerate_run = best == 0.0 ? degenerate_run + 1 : 0;
      if (degenerate_run > kStallLimit) bland = true;
      basis[leave] = entering;
      ++pivots;
    }
  }

  // Restores primal feasibility from a dual-feasible basis (an optimal basis for a
  // nearby target). Returns false when the basis is not dual feasible or the
  // iteration budget runs out; the caller then starts cold.
  bool dual_simplex(std::vector<int>& basis, const std::array<double, kMaxRows>& b, int& pivots) const {
    const int n = static_cast<int>(coords_.size());
    for (int basic : basis)
      if (basic >= n) return false;
    for (int it = 0; it < 20 * (n + rows_); ++it) {
      Mat inv;
      if (!invert(basis, inv)) return false;
      const auto x = apply(inv, b);
      int leave = -1;
      for (int r = 0; r < rows_; ++r)
        if (x[r] < -kZero && (leave < 0 || x[r] < x[leave])) leave = r;
      if (leave < 0) return true;

      std::array<double, kMaxRows> pi{};
      for (int i = 0; i < rows_; ++i)
        for (int r = 0; r < rows_; ++r) pi[i] += costs_[basis[r]] * inv[r][i];
      int entering = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        double d = costs_[j], alpha = inv[leave][dim_];
        for (int i = 0; i < dim_; ++i) {
          d -= pi[i] * coords_[j][i];
          alpha += inv[leave][i] * coords_[j][i];
        }
        d -= pi[dim_];
        if (d < -rc_tol_ * 1e3) return false;
        if (alpha >= -1e-11) continue;
        const double ratio = std::max(0.0, d) / -alpha;
        if (ratio < best) {
          best = ratio;
          entering = j;
        }
      }
      if (entering < 0) throw DomainError("target lies outside the convex hull of the valid samples");
      basis[leave] = entering;
      ++pivots;
    }
    return false;
  }

  std::vector<int> phase_one(const std::array<double, kMaxRows>& b, int& pivots) const {
    const int n = static_cast<int>(coords_.size());
    for (int r = 0; r < rows_; ++r)
      if (b[r] < 0.0) throw DomainError("envelope LP target must have non-negative grid coordinates");
    std::vector<int> basis(rows_);
    for (int r = 0; r < rows_; ++r) basis[r] = n + r;
    iterate(basis, b, /*phase_one=*/true, pivots);

    Mat inv;
    invert(basis, inv);
    const auto x = apply(inv, b);
    double infeasibility = 0.0;
    for (int r = 0; r < rows_; ++r)
      if (basis[r] >= n) infeasibility += std::max(0.0, x[r]);
    if (infeasibility > 1e-9) throw DomainError("target lies outside the convex hull of the valid samples");

    // Drive zero-level artificials out of the basis.
    for (int r = 0; r < rows_; ++r) {
      if (basis[r] < n) continue;
      invert(basis, inv);
      bool replaced = false;
      for (int j = 0; j < n && !replaced; ++j) {
        if (std::find(basis.begin(), basis.end(), j) != basis.end()) continue;
        double ur = 0.0;
        for (int c = 0; c < rows_; ++c) ur += inv[r][c] * entry(j, c);
        if (std::abs(ur) > 1e-9) {
          basis[r] = j;
          replaced = true;
          ++pivots;
        }
      }
      if (!replaced) throw RankError("valid samples do not affinely span the domain");
    }
    return basis;
  }

  static constexpr double kZero = 1e-11;
  static constexpr int kStallLimit = 50;

  int dim_;
  int rows_;
  std::vector<Point> coords_;
  std::vector<double> costs_;
  double rc_tol_ = 0.0;
};

}  // namespace smooth_insert
