#ifndef TOKENSCREEN_LINPROG_HPP
#define TOKENSCREEN_LINPROG_HPP

#include <cmath>
#include <vector>

#include "entropy.hpp"

namespace tokenscreen {

enum class LPStatus { kOptimal, kInfeasible, kUnbounded };

// Dense two-phase primal simplex for min c^T x, A x = b, x >= 0.
// Supports appending columns after a solve and warm-starting from the
// previous optimal basis, which is what the cutting-plane oracle needs:
// its row count is fixed while cut columns accumulate.
//
// The original columns are kept so the tableau can be refactorized from the
// recorded basis at any time.  Long degenerate runs otherwise accumulate
// roundoff in the updated tableau until it silently stops describing the
// problem; every claimed optimum is re-verified on a fresh factorization and
// pivoting resumes if the clean reduced costs disagree.
class SimplexLP {
 public:
  SimplexLP(const Mat& A, const Vec& b, const Vec& c)
      : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())) {
    if (b.size() != static_cast<std::size_t>(m_) || c.size() != static_cast<std::size_t>(n_))
      throw validation_error("LP dimension mismatch");
    flip_.assign(m_, 1.0);
    c_.assign(c.begin(), c.end());
    rhs_f_.assign(m_, 0.0);
    cols_.assign(n_, Vec(m_, 0.0));
    for (int r = 0; r < m_; ++r) {
      double s = (b[r] < 0.0) ? -1.0 : 1.0;
      flip_[r] = s;
      rhs_f_[r] = s * b[r];
      for (int j = 0; j < n_; ++j) cols_[j][r] = s * A(r, j);
    }
    basis_.resize(m_);
    reset_to_artificial_basis();
  }

  void add_column(const Vec& col, double cost) {
    if (col.size() != static_cast<std::size_t>(m_))
      throw validation_error("LP column dimension mismatch");
    Vec f(m_);
    for (int r = 0; r < m_; ++r) f[r] = flip_[r] * col[r];
    T_.conservativeResize(Eigen::NoChange, n_ + m_ + 2);
    // shift the artificial block and rhs right by one
    for (int j = n_ + m_; j >= n_; --j) T_.col(j + 1) = T_.col(j);
    // incoming column in current basis coordinates: B^{-1} S col, where the
    // artificial block holds B^{-1} (S the row sign flips folded into f)
    Eigen::VectorXd v(m_);
    for (int r = 0; r < m_; ++r) v(r) = f[r];
    T_.col(n_) = T_.block(0, n_ + 1, m_, m_) * v;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= n_) basis_[r] += 1;
    cols_.push_back(std::move(f));
    c_.push_back(cost);
    n_ += 1;
  }

  LPStatus solve(int max_iter = 200000) {
    // warm path: the add_column updates were applied to a tableau that may
    // carry drift from the previous solve, so start from a clean factorization
    if (phase1_done_ && !rebuild_from_basis()) reset_to_artificial_basis();
    bool retried_unbounded = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (!phase1_done_) {
        Vec art_cost(n_, 0.0);
        RunResult st = run(art_cost, true, max_iter);
        if (st == RunResult::kUnbounded)
          throw certificate_error("phase-1 LP cannot be unbounded");
        if (st == RunResult::kCorrupt) {
          reset_to_artificial_basis();
          continue;
        }
        double infeas = 0.0;
        for (int r = 0; r < m_; ++r)
          if (basis_[r] >= n_) infeas += T_(r, n_ + m_);
        if (infeas > 1e-7) return LPStatus::kInfeasible;
        drive_out_artificials();
        phase1_done_ = true;
      }
      RunResult st = run(c_, false, max_iter);
      if (st == RunResult::kCorrupt || !rebuild_from_basis()) {
        reset_to_artificial_basis();
        continue;
      }
      if (st == RunResult::kUnbounded) {
        // rays found on a drifted tableau can be spurious; confirm once on
        // the fresh factorization
        if (retried_unbounded) return LPStatus::kUnbounded;
        retried_unbounded = true;
        continue;
      }
      double min_basic = 0.0;
      for (int r = 0; r < m_; ++r) min_basic = std::min(min_basic, T_(r, n_ + m_));
      if (min_basic < -1e-7) {
        // feasibility was lost to drift; restart from scratch
        reset_to_artificial_basis();
        continue;
      }
      // accept only if the clean reduced costs confirm optimality; the
      // acceptance band is looser than the pricing threshold so borderline
      // columns cannot flip-flop between attempts
      if (min_reduced_cost() >= -1e-8) return LPStatus::kOptimal;
    }
    throw certificate_error("simplex failed to stabilize");
  }

  double objective() const {
    double z = 0.0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] < n_) z += c_[basis_[r]] * T_(r, n_ + m_);
    return z;
  }

  Vec x() const {
    Vec out(n_, 0.0);
    for (int r = 0; r < m_; ++r)
      if (basis_[r] < n_) out[basis_[r]] = T_(r, n_ + m_);
    return out;
  }

  // row duals for the original (unflipped) system
  Vec duals() const {
    Vec y(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double v = 0.0;
      for (int r = 0; r < m_; ++r)
        if (basis_[r] < n_) v += c_[basis_[r]] * T_(r, n_ + i);
      y[i] = flip_[i] * v;
    }
    return y;
  }

 private:
  enum class RunResult { kOptimal, kUnbounded, kCorrupt };

  RunResult run(const Vec& cost, bool phase1, int max_iter) {
    int degenerate_streak = 0;
    std::vector<char> in_basis(static_cast<std::size_t>(n_) + m_, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
      if (iter > 0 && iter % 1500 == 0 && !rebuild_from_basis()) return RunResult::kCorrupt;
      Eigen::RowVectorXd cb(m_);
      for (int r = 0; r < m_; ++r) {
        int j = basis_[r];
        cb(r) = phase1 ? (j >= n_ ? 1.0 : 0.0) : (j < n_ ? cost[j] : 0.0);
      }
      std::fill(in_basis.begin(), in_basis.end(), 0);
      for (int r = 0; r < m_; ++r) in_basis[basis_[r]] = 1;

      // reduced costs in tableau space: d_j = c_j - c_B^T (B^{-1} S A_j)
      bool bland = degenerate_streak > 2 * m_ + 10;
      int enter = -1;
      double best = -1e-9;
      for (int j = 0; j < n_; ++j) {
        if (in_basis[j]) continue;  // drift can fake a negative basic column
        double cj = phase1 ? 0.0 : cost[j];
        double d = cj - (cb * T_.col(j)).value();
        if (d < -1e-9) {
          if (bland) {
            enter = j;
            break;
          }
          if (d < best) {
            best = d;
            enter = j;
          }
        }
      }
      if (enter < 0) return RunResult::kOptimal;

      // Harris two-pass ratio test.  Pass 1 bounds the step by the minimum of
      // (rhs + delta)/a, so a degenerate row whose entry in the entering
      // column is noise cannot force itself as the blocking row: its
      // quotient delta/a is huge.  Pass 2 picks the largest pivot among rows
      // whose true ratio fits under the bound, trading at most delta of
      // feasibility for a well-scaled pivot.
      const double delta = 1e-9;
      const double piv_tol = 1e-10;
      double qmax = kInf;
      for (int r = 0; r < m_; ++r) {
        double a = T_(r, enter);
        if (a > piv_tol) qmax = std::min(qmax, (std::max(T_(r, n_ + m_), 0.0) + delta) / a);
      }
      if (qmax == kInf) return RunResult::kUnbounded;
      int leave = -1;
      double best_piv = 0.0;
      double ratio = kInf;
      for (int r = 0; r < m_; ++r) {
        double a = T_(r, enter);
        if (a <= piv_tol) continue;
        double q = std::max(T_(r, n_ + m_), 0.0) / a;
        if (q > qmax) continue;
        if (bland) {
          if (a > 1e-9 && (leave < 0 || basis_[r] < basis_[leave])) {
            leave = r;
            ratio = q;
          }
        } else if (a > best_piv) {
          best_piv = a;
          leave = r;
          ratio = q;
        }
      }
      if (leave < 0) return RunResult::kUnbounded;
      degenerate_streak = (ratio < 1e-12) ? degenerate_streak + 1 : 0;
      pivot(leave, enter);
    }
    throw certificate_error("simplex iteration limit exceeded");
  }

  void pivot(int row, int col) {
    double p = T_(row, col);
    T_.row(row) /= p;
    for (int r = 0; r < m_; ++r) {
      if (r == row) continue;
      double f = T_(r, col);
      if (f != 0.0) T_.row(r) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  void drive_out_artificials() {
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      int col = -1;
      double best = 1e-9;
      for (int j = 0; j < n_; ++j)
        if (std::abs(T_(r, j)) > best) {
          best = std::abs(T_(r, j));
          col = j;
        }
      if (col >= 0) pivot(r, col);
      // else: redundant row, the artificial stays basic at zero
    }
  }

  void reset_to_artificial_basis() {
    T_.resize(m_, n_ + m_ + 1);
    for (int r = 0; r < m_; ++r) {
      for (int j = 0; j < n_; ++j) T_(r, j) = cols_[j][r];
      for (int i = 0; i < m_; ++i) T_(r, n_ + i) = (i == r) ? 1.0 : 0.0;
      T_(r, n_ + m_) = rhs_f_[r];
    }
    for (int r = 0; r < m_; ++r) basis_[r] = n_ + r;
    phase1_done_ = false;
  }

  bool rebuild_from_basis() {
    Mat B(m_, m_);
    for (int r = 0; r < m_; ++r) {
      int j = basis_[r];
      if (j < n_)
        for (int i = 0; i < m_; ++i) B(i, r) = cols_[j][i];
      else {
        B.col(r).setZero();
        B(j - n_, r) = 1.0;
      }
    }
    Eigen::FullPivLU<Mat> lu(B);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return false;
    Mat binv = lu.inverse();
    Mat C(m_, n_);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i < m_; ++i) C(i, j) = cols_[j][i];
    T_.resize(m_, n_ + m_ + 1);
    T_.block(0, 0, m_, n_) = binv * C;
    T_.block(0, n_, m_, m_) = binv;
    Eigen::VectorXd rb(m_);
    for (int i = 0; i < m_; ++i) rb(i) = rhs_f_[i];
    T_.col(n_ + m_) = binv * rb;
    return true;
  }

  double min_reduced_cost() const {
    Eigen::RowVectorXd cb(m_);
    for (int r = 0; r < m_; ++r) {
      int j = basis_[r];
      cb(r) = (j < n_) ? c_[j] : 0.0;
    }
    double worst = 0.0;
    for (int j = 0; j < n_; ++j) {
      double d = c_[j] - (cb * T_.col(j)).value();
      worst = std::min(worst, d);
    }
    return worst;
  }

  int m_, n_;
  std::vector<double> flip_;
  Vec c_;
  Vec rhs_f_;               // flipped rhs, entrywise >= 0
  std::vector<Vec> cols_;   // flipped original columns, one per variable
  Mat T_;                   // m x (n + m + 1): structural | B^{-1} | rhs
  std::vector<int> basis_;
  bool phase1_done_ = false;
};

}  // namespace tokenscreen

#endif
