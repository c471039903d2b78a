// include/tpsda/specfun.h

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

#ifndef TPSDA_SPECFUN_H_
#define TPSDA_SPECFUN_H_

#include "tpsda/common.h"

// Log-domain modified Bessel functions of the first kind and the derived
// VMF normalizer terms.  All routines are pure functions, accurate to
// ~1e-12 relative over order nu in [-1/2, ~512] and argument kappa in
// [0, ~1e5], with no intermediate overflow anywhere in that range.
//
// Evaluation regimes:
//   - power series (all terms positive, renormalized accumulation) for
//     small arguments,
//   - Hankel's large-argument expansion of the scaled function
//     e^{-kappa} I_nu(kappa) for large kappa at small order,
//   - the uniform large-order (Debye-type) expansion for nu >= 25,
//   - a Gauss continued fraction (modified Lentz) for the ratio
//     I_{nu+1}/I_nu, switching to a ratio of Hankel expansions where the
//     fraction would need too many levels.

namespace tpsda {

/// Order of a modified Bessel function; nu = D/2 - 1 for a VMF on the
/// (D-1)-sphere, so nu >= -1/2.
struct BesselOrder {
  double nu;
  explicit BesselOrder(double nu_in) : nu(nu_in) {
    if (!(nu >= -0.5)) {
      throw ValidationError("BesselOrder: nu must be >= -0.5, got " +
                            std::to_string(nu_in));
    }
  }
};

/// log I_nu(kappa).  At kappa == 0: 0 for nu == 0, -inf for nu > 0,
/// +inf for nu in [-1/2, 0).
double LogBesselI(BesselOrder nu, double kappa);

/// log of the exponentially scaled function, log I_nu(kappa) - kappa.
/// Finite for all kappa >= 0 with nu > 0 excepted at kappa == 0 (-inf).
double LogBesselIScaled(BesselOrder nu, double kappa);

/// log Cbar_nu(kappa) = kappa + nu log kappa - log I_nu(kappa), the log
/// numerator of the natural-parameter VMF density.  Finite for all
/// kappa >= 0; the kappa -> 0 limit is nu log 2 + lgamma(nu + 1).
double LogCbar(BesselOrder nu, double kappa);

/// A_nu(kappa) = I_{nu+1}(kappa) / I_nu(kappa), the mean resultant length
/// of a VMF with concentration kappa on S^{2nu+1}.  In [0, 1), strictly
/// increasing in kappa, A_nu(0) = 0.
double BesselRatio(BesselOrder nu, double kappa);

/// d/dkappa of BesselRatio, via the standard identity
/// A' = 1 - A^2 - (2 nu + 1) A / kappa.
double BesselRatioDerivative(BesselOrder nu, double kappa);

}  // namespace tpsda

#endif  // TPSDA_SPECFUN_H_
