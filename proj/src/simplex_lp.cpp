#include "coex/simplex_lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace coex {

namespace {

struct Tableau {
  int m = 0, n = 0;  // constraints, structural columns
  std::vector<std::vector<std::pair<int, double>>> cols;  // sign-fixed copies
  std::vector<double> cost, b;
  std::vector<int> basis;       // size m; values in [0, n + m)
  Eigen::MatrixXd binv;         // dense basis inverse
  Eigen::VectorXd xb;

  bool artificial(int j) const { return j >= n; }

  Eigen::VectorXd column(int j) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
    if (artificial(j))
      a[j - n] = 1.0;
    else
      for (auto& [r, v] : cols[j]) a[r] = v;
    return a;
  }

  void refactor() {
    Eigen::MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = column(basis[i]);
    binv = B.partialPivLu().inverse();
    Eigen::VectorXd bb = Eigen::Map<const Eigen::VectorXd>(b.data(), m);
    xb = binv * bb;
  }
};

}  // namespace

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::IterationLimit: return "iteration_limit";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

LpResult solve_lp(const LpProblem& lp, const LpOptions& opts) {
  const int m = lp.rows;
  const int n = (int)lp.cols.size();
  LpResult out;
  out.x.assign(n, 0.0);
  if (m == 0) {
    out.status = LpStatus::Optimal;
    return out;
  }

  Tableau T;
  T.m = m;
  T.n = n;
  T.cols.resize(n);
  T.b.assign(lp.rhs.begin(), lp.rhs.end());
  T.cost = lp.cost;
  std::vector<int> row_sign(m, 1);
  for (int r = 0; r < m; ++r)
    if (T.b[r] < 0) {
      row_sign[r] = -1;
      T.b[r] = -T.b[r];
    }
  for (int j = 0; j < n; ++j) {
    T.cols[j].reserve(lp.cols[j].size());
    for (auto& [r, v] : lp.cols[j])
      if (v != 0) T.cols[j].push_back({r, row_sign[r] * v});
  }
  T.basis.resize(m);
  for (int i = 0; i < m; ++i) T.basis[i] = n + i;
  T.binv = Eigen::MatrixXd::Identity(m, m);
  T.xb = Eigen::Map<const Eigen::VectorXd>(T.b.data(), m);

  const double big_scale = [&] {
    double s = 1;
    for (auto& c : lp.cost) s = std::max(s, std::abs(c));
    return s;
  }();
  const bool nonneg_costs = [&] {
    for (auto& c : lp.cost)
      if (c < 0) return false;
    return true;
  }();
  long max_iter = opts.max_iterations > 0
                      ? opts.max_iterations
                      : 200L + 50L * (long)(m + n);
  double rhs_norm = 1;
  for (double v : T.b) rhs_norm = std::max(rhs_norm, std::abs(v));

  bool bland = opts.always_bland;
  int degenerate_run = 0;
  long since_refactor = 0;

  std::vector<char> banned(n, 0);  // columns with numerically unusable pivots
  auto reduced_costs_pass = [&](int phase, int& enter) {
    // y = Binv^T c_B, then price structural columns.
    Eigen::VectorXd cb(m);
    for (int i = 0; i < m; ++i) {
      int j = T.basis[i];
      cb[i] = (phase == 1) ? (T.artificial(j) ? 1.0 : 0.0)
                           : (T.artificial(j) ? 0.0 : T.cost[j]);
    }
    Eigen::VectorXd y = T.binv.transpose() * cb;
    enter = -1;
    double best = -((phase == 1) ? 1e-10 : opts.cost_tol * big_scale);
    for (int j = 0; j < T.n; ++j) {
      if (banned[j]) continue;
      double cj = (phase == 1) ? 0.0 : T.cost[j];
      double rc = cj;
      for (auto& [r, v] : T.cols[j]) rc -= y[r] * v;
      if (rc < best) {
        if (bland) {
          enter = j;
          return;
        }
        best = rc;
        enter = j;
      }
    }
  };

  auto iterate_phase = [&](int phase) -> LpStatus {
    for (;;) {
      if (out.iterations >= max_iter) return LpStatus::IterationLimit;
      int q = -1;
      reduced_costs_pass(phase, q);
      if (q < 0) return LpStatus::Optimal;

      Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
      for (auto& [r, v] : T.cols[q]) d += v * T.binv.col(r);

      // Ratio test. Basic artificials must stay at zero in phase 2: any with
      // a nonzero direction entry leaves immediately in a degenerate pivot.
      int leave = -1;
      double theta = 0;
      if (phase == 2) {
        for (int i = 0; i < m; ++i)
          if (T.artificial(T.basis[i]) && std::abs(d[i]) > 1e-9) {
            leave = i;
            theta = 0;
            break;
          }
      }
      if (leave < 0) {
        // Pivot eligibility is relative to the column scale: with large
        // right-hand sides an absolute cutoff can reject every entry and
        // misreport an (impossible here) unbounded ray.
        double dscale = d.cwiseAbs().maxCoeff();
        double piv_tol = 1e-9 * std::max(1.0, dscale);
        double best_ratio = 0;
        for (int i = 0; i < m; ++i) {
          if (d[i] > piv_tol) {
            double ratio = std::max(0.0, T.xb[i]) / d[i];
            if (leave < 0 || ratio < best_ratio - 1e-12 ||
                (ratio < best_ratio + 1e-12 && T.basis[i] < T.basis[leave])) {
              leave = i;
              best_ratio = ratio;
            }
          }
        }
        if (leave < 0) {
          if (!nonneg_costs) return LpStatus::Unbounded;
          // Nonnegative costs keep the problem bounded, so an apparent ray
          // is numerical; retire the column and price again.
          banned[q] = 1;
          continue;
        }
        theta = best_ratio;
      }

      if (theta <= 1e-12) {
        if (++degenerate_run > 40) bland = true;
      } else {
        degenerate_run = 0;
      }

      // Pivot: update solution, basis, and the explicit inverse.
      T.xb -= theta * d;
      T.xb[leave] = theta;
      T.basis[leave] = q;
      double piv = d[leave];
      T.binv.row(leave) /= piv;
      for (int i = 0; i < m; ++i)
        if (i != leave && std::abs(d[i]) > 0)
          T.binv.row(i) -= d[i] * T.binv.row(leave);

      out.iterations++;
      bool want_refactor = ++since_refactor >= opts.refactor_every;
      if (!want_refactor && (out.iterations & 127) == 0) {
        // Drift check on the basic solution: B xb should reproduce b.
        Eigen::VectorXd bx = Eigen::VectorXd::Zero(m);
        for (int i = 0; i < m; ++i) {
          int j = T.basis[i];
          if (T.artificial(j))
            bx[j - T.n] += T.xb[i];
          else
            for (auto& [r, v] : T.cols[j]) bx[r] += v * T.xb[i];
        }
        double drift = 0;
        for (int r = 0; r < m; ++r) drift = std::max(drift, std::abs(bx[r] - T.b[r]));
        want_refactor = drift > 1e-7 * rhs_norm;
      }
      if (want_refactor) {
        since_refactor = 0;
        T.refactor();
      }
    }
  };

  LpStatus s1 = iterate_phase(1);
  if (s1 != LpStatus::Optimal) {
    out.status = s1;
    return out;
  }
  double art_sum = 0;
  for (int i = 0; i < m; ++i)
    if (T.artificial(T.basis[i])) art_sum += std::max(0.0, T.xb[i]);
  double rhs_scale = 1;
  for (double v : T.b) rhs_scale = std::max(rhs_scale, std::abs(v));
  if (art_sum > opts.feas_tol * rhs_scale * 10) {
    out.status = LpStatus::Infeasible;
    out.objective = art_sum;
    return out;
  }

  LpStatus s2 = iterate_phase(2);
  if (s2 == LpStatus::Unbounded || s2 == LpStatus::IterationLimit) {
    out.status = s2;
    return out;
  }

  T.refactor();  // tighten the solution before reporting
  out.status = LpStatus::Optimal;
  for (int i = 0; i < m; ++i) {
    int j = T.basis[i];
    if (!T.artificial(j)) out.x[j] = std::max(0.0, T.xb[i]);
  }
  out.objective = 0;
  for (int j = 0; j < n; ++j) out.objective += lp.cost[j] * out.x[j];
  // Residual against the original (unsigned) system.
  std::vector<double> ax(m, 0.0);
  for (int j = 0; j < n; ++j)
    if (out.x[j] != 0)
      for (auto& [r, v] : lp.cols[j]) ax[r] += v * out.x[j];
  for (int r = 0; r < m; ++r)
    out.max_infeasibility = std::max(out.max_infeasibility, std::abs(ax[r] - lp.rhs[r]));
  return out;
}

}  // namespace coex
