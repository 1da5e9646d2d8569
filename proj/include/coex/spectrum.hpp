#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coex/homology.hpp"
#include "coex/metric.hpp"

namespace coex {

struct SpectralOptions {
  int seed = 1;
  double tol = 1e-9;           // residual target per eigenpair
  int max_lanczos = 400;       // Krylov dimension cap
  int max_restarts = 3;
  double zero_threshold_rel = 1e-10;  // kernel classification, relative to scale
  bool keep_eigenforms = true;
};

struct SpectralResult {
  std::vector<double> eigenvalues;  // ascending, coexact modes only
  std::vector<Vec> eigenforms;      // M1-orthonormal when kept
  std::vector<double> residuals;    // ||A u - lambda M1 u||_{M1^-1} / ||u||_{M1}
  double zero_threshold = 0;
  int lanczos_steps = 0;
  int restarts = 0;
  int discarded_non_coexact = 0;

  std::string to_json(bool with_forms = false) const;
};

/// The m smallest coexact 1-form eigenvalues of the pencil
/// D1^T M2 D1 u = lambda M1 u. Exact modes are pushed out of the window by a
/// lumped grad-grad augmentation, harmonic modes are deflated via the basis
/// (built from H when b1 > 0) and every returned pair is classified by its
/// Hodge parts before being accepted.
SpectralResult coexact_spectrum(const MetricData& M, int count,
                                const HomologyBasis* H = nullptr,
                                const SpectralOptions& opts = {});

/// Discrete harmonic 1-cochains spanning the kernel: the dual cocycles of H
/// made M1-orthogonal to the exact subspace, then orthonormalized.
std::vector<Vec> harmonic_basis(const MetricData& M, const HomologyBasis& H);

/// mu(M)^(1/2) * Linf / L2 of a 1-cochain; raises on zero input.
double sup_l2_ratio(const MetricData& M, const Vec& alpha);

/// Smallest non-zero eigenvalue of the 0-form pencil
/// D0^T M1 D0 f = lambda M0 f (constants deflated). The nonzero spectrum of
/// the 1-form down-Laplacian coincides with it.
double smallest_function_eigenvalue(const MetricData& M, const SpectralOptions& opts = {});

/// Same quantity reached through the 1-form side: inverse iteration of the
/// down operator M1 D0 M0^-1 D0^T M1 against M1 on the exact subspace.
double smallest_exact_eigenvalue_via_down(const MetricData& M, const SpectralOptions& opts = {});

}  // namespace coex
