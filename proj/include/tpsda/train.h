// include/tpsda/train.h

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

#ifndef TPSDA_TRAIN_H_
#define TPSDA_TRAIN_H_

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "tpsda/model.h"

// Maximum-likelihood EM training.  The E-step reduces the data to
// cross-accumulators R_i between observations and posterior factor means
// plus the factor-mean resultants; the M-step fits the VMF priors in
// closed form, runs coordinate ascent on (w, F) under the unit/orthonormal
// constraints, and optimizes kappa by a derivative-free scalar search.
// Every sub-step improves the EM auxiliary exactly, so the marginal
// likelihood trace is nondecreasing (generalized EM).

namespace tpsda {

struct SufficientStats {
  // Per factor i: R_i in R^{D x d_i}; for i <= m the cross-accumulator
  // sum_s (sum_t x_st) zbar_si', for i > m  sum_{s,t} x_st ybar_sti'.
  std::vector<Eigen::MatrixXd> r;
  // Per factor: resultant of the posterior means (sum over speakers for
  // i <= m, over observations for i > m) and the matching count.
  std::vector<Eigen::VectorXd> factor_resultant;
  std::vector<double> factor_count;
  long total_obs = 0;     // T
  long num_speakers = 0;  // S
};

struct EmConfig {
  int iterations = 200;
  int wf_inner_iterations = 5;  // coordinate-ascent rounds on (w, F)
  double kappa_bracket_lo = 1e-2;
  double kappa_bracket_hi = 1e6;
  std::uint64_t seed = 0;
  bool learn_priors = false;  // default pins all gamma_i = 0
  double convergence_tol = 1e-7;  // relative log-marginal change
  int threads = 1;
};

struct FitResult {
  TPsdaModel model;
  // log_marginal_trace[0] is the initial model; one entry per iteration
  // follows.  Nondecreasing within numerical tolerance.
  std::vector<double> log_marginal_trace;
  int iterations_run = 0;
};

/// Accumulates sufficient statistics.  Parallel over speakers on a fixed
/// chunk grid, so results do not depend on the thread count.
SufficientStats EStep(const TPsdaModel &model, const Eigen::MatrixXd &x,
                      const std::vector<std::vector<int>> &speakers,
                      int threads = 1);

/// Closed-form VMF ML refit of every (v_i, gamma_i) from the posterior-mean
/// resultants; an all-zero resultant yields gamma = 0.
std::vector<FactorPrior> MStepPriors(const ModelStructure &structure,
                                     const SufficientStats &stats);

/// Coordinate ascent on sum_i w_i tr(K_i R_i') under |w| = 1, F'F = I:
/// w <- wtilde/|wtilde| with wtilde_i = tr(K_i R_i'), then
/// F <- Ftilde (Ftilde'Ftilde)^{-1/2} with Ftilde = [w_1 R_1 ... w_n R_n],
/// alternated inner_iterations times.  The objective never decreases.
void MStepWf(const ModelStructure &structure, const SufficientStats &stats,
             Eigen::VectorXd *w, Eigen::MatrixXd *f, int inner_iterations);

/// argmax_kappa  T (nu log kappa - log I_nu(kappa)) + kappa c, with
/// nu = D/2 - 1 and c = sum_i w_i tr(K_i R_i'), solved by Brent search on
/// log kappa inside [lo, hi] (expanded once if the optimum hits an edge).
double MStepKappa(const ModelStructure &structure,
                  const SufficientStats &stats, const Eigen::VectorXd &w,
                  const Eigen::MatrixXd &f, double bracket_lo,
                  double bracket_hi);

/// Deterministic starting point: F from the top singular directions of the
/// speaker-mean matrix (seeded random completion when rank-short), balanced
/// w, kappa from a pooled within-speaker VMF fit, uniform priors.
TPsdaModel InitModel(const ModelStructure &structure, const Eigen::MatrixXd &x,
                     const std::vector<std::vector<int>> &speakers,
                     std::uint64_t seed);

/// Full EM loop.  Optional log stream receives one machine-parseable line
/// per iteration: iter<TAB>log_marginal<TAB>kappa<TAB>wall_ms.
FitResult Fit(const Eigen::MatrixXd &x,
              const std::vector<std::vector<int>> &speakers,
              const ModelStructure &structure, const EmConfig &config,
              std::ostream *log = nullptr);

}  // namespace tpsda

#endif  // TPSDA_TRAIN_H_
