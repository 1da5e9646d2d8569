#include "coex/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace coex {

namespace {

using OpFn = std::function<Vec(const Vec&)>;

/// Lanczos iteration in the M inner product for a self-adjoint operator,
/// with full reorthogonalization and explicit deflation.
class MLanczos {
 public:
  MLanczos(const SpMat& M, OpFn op, std::vector<Vec> deflate, unsigned seed,
           OpFn purify = nullptr)
      : M_(M), op_(std::move(op)), defl_(std::move(deflate)), rng_(seed),
        purify_(std::move(purify)) {
    for (auto& d : defl_) mdefl_.push_back(M_ * d);
    seed_start();
  }

  bool exhausted() const { return exhausted_; }
  int steps() const { return (int)alpha_.size(); }

  /// Advance by `chunk` steps (or until breakdown). Returns false once the
  /// Krylov space cannot grow further.
  bool advance(int chunk) {
    for (int s = 0; s < chunk; ++s)
      if (!step()) return false;
    return true;
  }

  /// Ritz pairs with theta sorted descending; vectors assembled on demand.
  void ritz(std::vector<double>& theta, std::vector<Vec>& vectors, int top) const {
    const int k = (int)alpha_.size();
    theta.clear();
    vectors.clear();
    if (k == 0) return;
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha_[i];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta_[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    for (int j = k - 1; j >= 0 && (int)theta.size() < top; --j) {
      theta.push_back(es.eigenvalues()[j]);
      Vec y = Vec::Zero(V_[0].size());
      for (int i = 0; i < k; ++i) y += es.eigenvectors()(i, j) * V_[i];
      vectors.push_back(std::move(y));
    }
  }

  /// Move converged directions into the deflation set and restart fresh.
  void deflate_and_restart(const std::vector<Vec>& vs) {
    for (const auto& v : vs) {
      Vec u = v;
      project_out(u);
      double n = mnorm(u);
      if (n > 1e-10) {
        u /= n;
        defl_.push_back(u);
        mdefl_.push_back(M_ * u);
      }
    }
    V_.clear();
    mv_.clear();
    alpha_.clear();
    beta_.clear();
    exhausted_ = false;
    seed_start();
  }

 private:
  double mdot(const Vec& a, const Vec& mb) const { return a.dot(mb); }
  double mnorm(const Vec& a) const { return std::sqrt(std::max(0.0, a.dot(M_ * a))); }

  void project_out(Vec& w) const {
    for (size_t i = 0; i < defl_.size(); ++i) w -= mdot(w, mdefl_[i]) * defl_[i];
    for (size_t i = 0; i < V_.size(); ++i) w -= mdot(w, mv_[i]) * V_[i];
  }

  void seed_start() {
    std::normal_distribution<double> N01(0, 1);
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vec v(M_.rows());
      for (int i = 0; i < v.size(); ++i) v[i] = N01(rng_);
      if (purify_) v = purify_(v);
      project_out(v);
      project_out(v);
      double n = mnorm(v);
      if (n > 1e-12) {
        v /= n;
        V_.push_back(v);
        mv_.push_back(M_ * v);
        return;
      }
    }
    exhausted_ = true;
  }

  bool step() {
    if (exhausted_ || V_.empty()) {
      exhausted_ = true;
      return false;
    }
    const Vec& v = V_.back();
    Vec w = op_(v);
    double a = mdot(w, mv_.back());
    alpha_.push_back(a);
    project_out(w);
    project_out(w);  // second pass keeps the basis orthogonal at scale
    double b = mnorm(w);
    if (b < 1e-13 * std::max(1.0, std::abs(a))) {
      exhausted_ = true;
      return false;
    }
    beta_.push_back(b);
    w /= b;
    V_.push_back(w);
    mv_.push_back(M_ * V_.back());
    return true;
  }

  const SpMat& M_;
  OpFn op_;
  std::vector<Vec> defl_, mdefl_;
  std::vector<Vec> V_, mv_;
  std::vector<double> alpha_, beta_;
  std::mt19937 rng_;
  OpFn purify_;
  bool exhausted_ = false;
};

double trace_of(const SpMat& A) {
  double t = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      if (it.row() == it.col()) t += it.value();
  return t;
}

}  // namespace

std::vector<Vec> harmonic_basis(const MetricData& M, const HomologyBasis& H) {
  std::vector<Vec> out;
  const SpMat& D0 = M.d0();
  for (const auto& beta : H.dual_cocycles) {
    Vec b = Vec::Zero(M.X().simplex_count(1));
    for (auto& [e, c] : beta.coeffs) b[e] = (double)c;
    Vec rhs = D0.transpose() * (M.mass[1] * b);
    rhs[0] = 0;
    Vec f = M.llt_l0().solve(rhs);
    Vec h = b - D0 * f;
    for (const auto& prev : out) h -= prev.dot(M.mass[1] * h) * prev;
    double n = std::sqrt(h.dot(M.mass[1] * h));
    if (n < 1e-12) throw std::runtime_error("harmonic basis degenerated");
    out.push_back(h / n);
  }
  return out;
}

SpectralResult coexact_spectrum(const MetricData& M, int count, const HomologyBasis* H,
                                const SpectralOptions& opts) {
  if (count < 1) throw std::runtime_error("coexact_spectrum: count >= 1 required");
  const SimplicialComplex& X = M.X();
  if (!X.closed() || !X.orientable())
    throw std::runtime_error("coexact_spectrum requires a closed orientable complex");

  const SpMat& M1 = M.mass[1];
  const SpMat& D0 = M.d0();
  const SpMat& D1 = M.d1();

  SpMat A = SpMat(D1.transpose() * M.mass[2] * D1);

  const double scale = trace_of(A) / std::max(trace_of(M1), 1e-300);
  const double sigma = 1e-8 * scale;
  SpMat Asig = A + sigma * M1;
  Eigen::SimplicialLLT<SpMat> llt(Asig);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("coexact_spectrum: factorization failed");

  // Harmonic deflation needs the homology basis; without one the caller
  // asserts H1 = 0 (the S^3 models), otherwise harmonic kernel modes would
  // ride the 1/sigma amplification below unchecked.
  std::vector<Vec> deflate;
  if (H && H->rank > 0) deflate = harmonic_basis(M, *H);

  // The shifted operator preserves the coexact subspace, but its kernel
  // directions (closed cochains) amplify by 1/sigma per application, so
  // every iterate is projected back: exact parts through the pinned 0-form
  // solve, harmonic parts against the deflation basis.
  std::vector<Vec> m1_harm;
  for (const auto& h : deflate) m1_harm.push_back(M1 * h);
  auto project_coexact = [&](const Vec& v) -> Vec {
    Vec rhs = D0.transpose() * (M1 * v);
    rhs[0] = 0;
    Vec w = v - D0 * M.llt_l0().solve(rhs);
    for (size_t i = 0; i < deflate.size(); ++i) w -= w.dot(m1_harm[i]) * deflate[i];
    return w;
  };

  SpectralResult out;
  out.zero_threshold = opts.zero_threshold_rel * scale;

  auto op = [&](const Vec& v) -> Vec { return project_coexact(llt.solve(M1 * v)); };
  const auto& m1llt = M.llt_m1();
  auto pencil_residual = [&](double lambda, const Vec& u) {
    Vec r = A * u - lambda * (M1 * u);
    double un = std::sqrt(u.dot(M1 * u));
    return std::sqrt(std::max(0.0, r.dot(m1llt.solve(r)))) / std::max(un, 1e-300);
  };

  unsigned seed = (unsigned)opts.seed;
  MLanczos lan(M1, op, deflate, seed, project_coexact);
  int restarts = 0, total_steps = 0;
  std::vector<double> theta;
  std::vector<Vec> vectors;

  // Accepted pairs persist across restarts (their directions get deflated,
  // so the restarted iteration cannot rediscover them).
  std::vector<double> acc_lambda, acc_res;
  std::vector<Vec> acc_form;

  while ((int)acc_lambda.size() < count) {
    bool grew = lan.advance(20);
    total_steps += 20;
    lan.ritz(theta, vectors, count + 6 + (int)(H ? H->rank : 3));

    std::vector<std::pair<double, int>> candidates;  // (lambda, ritz index)
    for (size_t i = 0; i < theta.size(); ++i)
      if (theta[i] > 0) candidates.push_back({1.0 / theta[i] - sigma, (int)i});
    std::sort(candidates.begin(), candidates.end());

    std::vector<double> fresh_lambda, fresh_res;
    std::vector<Vec> fresh_form;
    for (auto& [lambda, idx] : candidates) {
      if ((int)(acc_lambda.size() + fresh_lambda.size()) >= count) break;
      if (lambda < out.zero_threshold) continue;  // kernel / harmonic leftovers
      Vec& u = vectors[idx];
      double res = pencil_residual(lambda, u);
      if (res > opts.tol) break;  // in shift-invert the smaller ones converge first
      // Closed contamination check: exact part through the pinned potential
      // solve, harmonic part against the deflation basis.
      double un = std::sqrt(u.dot(M1 * u));
      {
        Vec rhs = D0.transpose() * (M1 * u);
        rhs[0] = 0;
        Vec ex_part = D0 * M.llt_l0().solve(rhs);
        double ex = std::sqrt(std::max(0.0, ex_part.dot(M1 * ex_part)));
        double ha = 0;
        for (size_t i = 0; i < deflate.size(); ++i)
          ha = std::max(ha, std::abs(u.dot(m1_harm[i])));
        if (ex > 1e-5 * un || ha > 1e-5 * un) {
          out.discarded_non_coexact++;
          continue;
        }
      }
      fresh_lambda.push_back(lambda);
      fresh_res.push_back(res);
      fresh_form.push_back(u / un);
    }

    bool done = (int)(acc_lambda.size() + fresh_lambda.size()) >= count;
    bool budget = lan.steps() >= opts.max_lanczos;
    if (done || !grew || budget) {
      // Bank the converged pairs before any restart.
      for (size_t i = 0; i < fresh_lambda.size(); ++i) {
        acc_lambda.push_back(fresh_lambda[i]);
        acc_res.push_back(fresh_res[i]);
        acc_form.push_back(fresh_form[i]);
      }
      if (done) break;
      if (restarts >= opts.max_restarts) {
        if (!grew) break;  // truncated spectrum, flagged by its size
        throw std::runtime_error("coexact_spectrum: no convergence within budget");
      }
      restarts++;
      lan.deflate_and_restart(acc_form);
    }
  }

  // Merge ascending (restarted rounds can interleave).
  std::vector<int> order(acc_lambda.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return acc_lambda[a] < acc_lambda[b]; });
  for (int i : order) {
    out.eigenvalues.push_back(acc_lambda[i]);
    out.residuals.push_back(acc_res[i]);
    out.eigenforms.push_back(acc_form[i]);
  }

  out.lanczos_steps = total_steps;
  out.restarts = restarts;
  if (!opts.keep_eigenforms) out.eigenforms.clear();
  return out;
}

double sup_l2_ratio(const MetricData& M, const Vec& alpha) {
  auto n = norms(M, alpha, 1);
  if (n.L2 <= 0) throw std::runtime_error("sup_l2_ratio: zero form");
  return std::sqrt(M.total_volume) * n.Linf / n.L2;
}

double smallest_function_eigenvalue(const MetricData& M, const SpectralOptions& opts) {
  const SpMat& M0 = M.mass[0];
  SpMat L0 = SpMat(M.d0().transpose() * M.mass[1] * M.d0());
  const double scale = trace_of(L0) / std::max(trace_of(M0), 1e-300);
  const double sigma = 1e-9 * scale;
  SpMat Ls = L0 + sigma * M0;
  Eigen::SimplicialLLT<SpMat> llt(Ls);
  Vec ones = Vec::Ones(M0.rows());
  Vec c = ones / std::sqrt(ones.dot(M0 * ones));
  MLanczos lan(M0, [&](const Vec& v) -> Vec { return llt.solve(M0 * v); }, {c},
               (unsigned)opts.seed);
  std::vector<double> theta;
  std::vector<Vec> vectors;
  for (int round = 0; round < 40; ++round) {
    if (!lan.advance(20)) break;
    lan.ritz(theta, vectors, 2);
    if (!theta.empty() && theta[0] > 0) {
      double lambda = 1.0 / theta[0] - sigma;
      Vec r = L0 * vectors[0] - lambda * (M0 * vectors[0]);
      if (r.norm() <= opts.tol * scale * vectors[0].norm()) return lambda;
    }
  }
  if (theta.empty() || theta[0] <= 0)
    throw std::runtime_error("function eigenvalue iteration failed");
  return 1.0 / theta[0] - sigma;
}

double smallest_exact_eigenvalue_via_down(const MetricData& M, const SpectralOptions& opts) {
  const SpMat& M1 = M.mass[1];
  const SpMat& D0 = M.d0();
  Eigen::SimplicialLLT<SpMat> m0llt(M.mass[0]);
  auto down = [&](const Vec& v) -> Vec {
    return M1 * (D0 * m0llt.solve(D0.transpose() * (M1 * v)));
  };
  // Projection onto the exact subspace in the M1 inner product.
  auto project_exact = [&](const Vec& v) -> Vec {
    Vec rhs = D0.transpose() * (M1 * v);
    rhs[0] = 0;
    return D0 * M.llt_l0().solve(rhs);
  };
  const double sigma_rel = 1e-6;
  double sigma = sigma_rel;
  {
    // crude operator scale: Rayleigh quotient of a deterministic vector
    std::mt19937 rng(7);
    std::normal_distribution<double> N01(0, 1);
    Vec v(M1.rows());
    for (int i = 0; i < v.size(); ++i) v[i] = N01(rng);
    v = project_exact(v);
    double vn = v.dot(M1 * v);
    sigma = sigma_rel * v.dot(down(v)) / std::max(vn, 1e-300);
  }
  // Shift-inverted operator applied by CG, all within the exact subspace.
  auto op = [&](const Vec& v) -> Vec {
    Vec b = M1 * v;
    Vec x = Vec::Zero(v.size());
    Vec r = b, p = r;
    double rr = r.squaredNorm();
    double stop = 1e-24 * std::max(rr, 1e-300);
    for (int it = 0; it < 2000 && rr > stop; ++it) {
      Vec Ap = down(p) + sigma * (M1 * p);
      double alpha = rr / p.dot(Ap);
      x += alpha * p;
      r -= alpha * Ap;
      double rr2 = r.squaredNorm();
      p = r + (rr2 / rr) * p;
      rr = rr2;
    }
    return project_exact(x);
  };
  MLanczos lan(M1, op, {}, (unsigned)opts.seed + 1);
  std::vector<double> theta;
  std::vector<Vec> vectors;
  double lambda = 0;
  for (int round = 0; round < 30; ++round) {
    if (!lan.advance(10)) break;
    lan.ritz(theta, vectors, 1);
    if (theta.empty() || theta[0] <= 0) continue;
    lambda = 1.0 / theta[0] - sigma;
    Vec u = project_exact(vectors[0]);
    Vec r = down(u) - lambda * (M1 * u);
    double un = std::sqrt(u.dot(M1 * u));
    if (r.norm() <= 1e-7 * std::max(1.0, lambda) * un * std::sqrt(trace_of(M1))) break;
    // otherwise grow the Krylov space and try again
  }
  return lambda;
}

std::string SpectralResult::to_json(bool with_forms) const {
  nlohmann::json j;
  j["eigenvalues"] = eigenvalues;
  j["residuals"] = residuals;
  j["zero_threshold"] = zero_threshold;
  j["lanczos_steps"] = lanczos_steps;
  j["restarts"] = restarts;
  j["discarded_non_coexact"] = discarded_non_coexact;
  if (with_forms) {
    auto& forms = j["eigenforms"] = nlohmann::json::array();
    for (const auto& u : eigenforms)
      forms.push_back(std::vector<double>(u.data(), u.data() + u.size()));
  }
  return j.dump(2);
}

}  // namespace coex
