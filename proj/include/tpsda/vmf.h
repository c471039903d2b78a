// include/tpsda/vmf.h

// Copyright 2026  The tpsda authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TPSDA_VMF_H_
#define TPSDA_VMF_H_

#include <Eigen/Dense>

#include "tpsda/common.h"
#include "tpsda/rng.h"

// The Von Mises-Fisher distribution on S^{d-1}: density in the (mu, kappa)
// and natural parametrizations, first moment, maximum-likelihood fitting,
// and sampling.  The degenerate circle-free case d = 1 (S^0 = {-1, +1}) is
// handled by closed forms.

namespace tpsda {

constexpr double kVmfKappaMax = 1e8;  // ML fit cap when the resultant -> 1

struct VmfParams {
  Eigen::VectorXd mu;  // unit-norm mean direction
  double kappa = 0.0;  // concentration, >= 0
  bool mu_arbitrary = false;  // kappa == 0: mu is a placeholder (e_1)
  bool kappa_capped = false;  // ML fit hit kVmfKappaMax

  VmfParams(Eigen::VectorXd mu_in, double kappa_in);

  /// From the natural parameter a = kappa * mu; kappa = |a|.  When |a| = 0
  /// the direction is arbitrary and e_1 is stored, flagged.
  static VmfParams FromNatural(const Eigen::VectorXd &a);

  int Dim() const { return static_cast<int>(mu.size()); }
};

/// log density on S^{d-1}, d >= 2:
///   log Cbar_nu(kappa) - (d/2) log 2pi + kappa mu'x - kappa,
/// nu = d/2 - 1.  Requires |x| = 1 within 1e-6.
double VmfLogPdf(const Eigen::VectorXd &x, const VmfParams &params);

/// Same density evaluated from a natural parameter a (kappa = |a|).
/// Defined for d >= 1; at d = 1 the value is the two-point log pmf.
double VmfLogPdfNatural(const Eigen::VectorXd &x, const Eigen::VectorXd &a);

/// d = 1 two-point log pmf: log P(x) = kappa mu x - log(2 cosh kappa),
/// x and mu in {-1, +1}.
double VmfLogPmfS0(double x, const VmfParams &params);

/// First moment E[x] = A_nu(kappa) mu (tanh(kappa) mu for d = 1).
Eigen::VectorXd VmfMean(const VmfParams &params);

/// First moment of the VMF with natural parameter a; zero vector at a = 0.
Eigen::VectorXd VmfMeanNatural(const Eigen::VectorXd &a);

/// Solves A_nu(kappa) = rho for kappa, nu = dim/2 - 1, to |A - rho| <= 1e-10
/// (Newton with a bisection fallback from the Banerjee initializer).
/// rho <= 1e-12 gives 0; solutions beyond kVmfKappaMax are capped and
/// *capped (when non-null) is set.
double VmfKappaFromResultant(int dim, double rho, bool *capped = nullptr);

/// Weighted maximum-likelihood fit.  Rows of `vectors` may have norm < 1
/// (posterior means); the fit solves A_nu(kappa) = |rbar| with
/// rbar = sum_i w_i v_i / sum_i w_i, and mu = rbar/|rbar|.
VmfParams VmfFitMl(const Eigen::MatrixXd &vectors,
                   const Eigen::VectorXd &weights);

/// Unweighted fit.
VmfParams VmfFitMl(const Eigen::MatrixXd &vectors);

/// count i.i.d. draws (rows).  Wood's rejection sampler for d >= 2,
/// Bernoulli on {-1,+1} for d = 1.  Deterministic given the stream.
Eigen::MatrixXd VmfSample(const VmfParams &params, int count, Rng &rng);

/// Convenience overload seeding a fresh stream.
Eigen::MatrixXd VmfSample(const VmfParams &params, int count,
                          std::uint64_t seed);

}  // namespace tpsda

#endif  // TPSDA_VMF_H_
