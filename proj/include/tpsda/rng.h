// include/tpsda/rng.h

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

#ifndef TPSDA_RNG_H_
#define TPSDA_RNG_H_

#include <cstdint>
#include <random>

namespace tpsda {

// Seeded random stream with hand-rolled variate transforms, so that a given
// seed reproduces the same draws on any standard library (std distributions
// are not portable).  Each parallel caller owns its own Rng.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  /// Uniform in (0, 1] (never exactly 0, safe for log()).
  double Uniform();

  /// Standard normal via Box-Muller (one spare cached).
  double Gaussian();

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; any shape > 0.
  double Gamma(double shape);

  /// Beta(a, b) as X/(X+Y) of two Gammas.
  double Beta(double a, double b);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tpsda

#endif  // TPSDA_RNG_H_
