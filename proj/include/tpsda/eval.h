// include/tpsda/eval.h

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

#ifndef TPSDA_EVAL_H_
#define TPSDA_EVAL_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tpsda/scoring.h"

// Detection metrics and adaptive symmetric score normalization.  Both
// metrics depend on the scores only through their ordering plus the
// miss/false-alarm counts at each operating point, so they are exactly
// invariant under strictly increasing score transforms.

namespace tpsda {

struct DetectionCostParams {
  double p_target = 0.05;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

/// Equal error rate: sweep thresholds over the unique scores (accept when
/// score >= threshold; tied scores form one step) and linearly interpolate
/// the miss/false-alarm crossing.
double Eer(const std::vector<double> &target,
           const std::vector<double> &nontarget);

/// Normalized minimum detection cost:
///   min_theta [p c_miss P_miss + (1-p) c_fa P_fa] / min(p c_miss, (1-p) c_fa)
/// over the same operating points plus both always-accept/always-reject
/// endpoints, hence always in [0, 1].
double MinDcf(const std::vector<double> &target,
              const std::vector<double> &nontarget,
              const DetectionCostParams &params);

/// Pulls labeled trial scores out of a keyed TrialScores.
void SplitByKey(const TrialScores &trials, std::vector<double> *target,
                std::vector<double> *nontarget);

struct CohortStats {
  Eigen::VectorXd mean;  // per side, over its top_k cohort scores
  Eigen::VectorXd std;   // population std, floored at 1e-12
  int top_k = 0;
  int cohort_size = 0;
  int floored = 0;  // sides whose variance hit the floor
};

/// Per-side top-K statistics (score-descending selection with
/// index-ascending tiebreak) over a side x cohort score matrix.
CohortStats ComputeCohortStats(const Eigen::MatrixXd &side_vs_cohort,
                               int top_k);

/// Adaptive S-norm: s' = [(s - mu_e)/sigma_e + (s - mu_t)/sigma_t] / 2 with
/// each side's statistics taken over its top_k cohort scores.  Optionally
/// reports how many sides needed the variance floor.
TrialScores AdaptiveSnorm(const TrialScores &raw,
                          const Eigen::MatrixXd &enroll_vs_cohort,
                          const Eigen::MatrixXd &test_vs_cohort, int top_k,
                          int *floored_sides = nullptr);

struct KeyEntry {
  std::string enroll;
  std::string test;
  bool target = false;
};

/// Key file: `enroll_id<TAB>test_id<TAB>target|nontarget` per line.
std::vector<KeyEntry> LoadTrialKey(const std::string &path);

/// Labels the trials listed in the key; every key trial must have a score.
/// Scored trials absent from the key stay unlabeled (-1).
void ApplyKey(TrialScores *trials, const std::vector<KeyEntry> &key);

/// `eer=... min_dcf=... p_target=... n_target=... n_nontarget=...`
std::string FormatMetricReport(double eer, double min_dcf,
                               const DetectionCostParams &params,
                               std::size_t n_target, std::size_t n_nontarget);

}  // namespace tpsda

#endif  // TPSDA_EVAL_H_
