// include/tpsda/scoring.h

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

#ifndef TPSDA_SCORING_H_
#define TPSDA_SCORING_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tpsda/model.h"

// Closed-form same-speaker vs different-speakers log-likelihood-ratio
// scoring.  A trial side is summarized by the vector sum of its unit-norm
// embeddings; the exact log LR needs only the per-speaker-factor natural
// parameters built from that sum, so channel factors never enter.

namespace tpsda {

struct SideSummary {
  Eigen::VectorXd sum;  // sum of the side's embeddings (norm <= count)
  int count = 0;
  // Cached projections K_i' * sum for the speaker factors i = 1..m.
  std::vector<Eigen::VectorXd> projected;
};

/// Builds the summary from the side's embeddings (rows, unit-norm).
SideSummary SummarizeSide(const TPsdaModel &model,
                          const Eigen::MatrixXd &rows);

/// Same, from row indices into a larger matrix.
SideSummary SummarizeSide(const TPsdaModel &model, const Eigen::MatrixXd &x,
                          const std::vector<int> &rows);

/// Exact log likelihood ratio between the same-speaker and
/// different-speakers hypotheses.  Writing l_i = gamma_i v_i +
/// kappa w_i K_i' e, r_i likewise from t, b_i from e + t and n_i =
/// gamma_i v_i, the score is
///   sum_{i<=m} [ g(|l_i|) + g(|r_i|) - g(|b_i|) - g(|n_i|) ],
/// with g(x) = log Cbar_{nu_i}(x) - x.  Symmetric in its two sides.
double Llr(const TPsdaModel &model, const SideSummary &enroll,
           const SideSummary &test);

/// Fast approximation, exact up to a slowly-varying additive term when all
/// gamma_i = 0:
///   kappa sum_{i<=m} |w_i| (|K_i'(e+t)| - |K_i'e| - |K_i't|).
/// Uncalibrated: the additive constant is dropped.
double LlrApprox(const TPsdaModel &model, const SideSummary &enroll,
                 const SideSummary &test);

struct TrialScores {
  std::vector<std::string> enroll_ids;
  std::vector<std::string> test_ids;
  Eigen::MatrixXd scores;  // enroll x test
  // Empty => every entry is a scored trial; else 1 = scored, 0 = absent.
  Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic> mask;
  // Empty => unlabeled; else 1 = target, 0 = nontarget, -1 = unknown.
  Eigen::Matrix<signed char, Eigen::Dynamic, Eigen::Dynamic> key;

  bool HasTrial(int i, int j) const {
    return mask.size() == 0 || mask(i, j) != 0;
  }
};

/// Full score matrix; entry (i, j) equals Llr(enroll[i], test[j]) (or
/// LlrApprox when exact = false) bit-for-bit regardless of thread count.
TrialScores ScoreMatrix(const TPsdaModel &model,
                        const std::vector<SideSummary> &enroll_sides,
                        const std::vector<SideSummary> &test_sides,
                        bool exact = true, int threads = 1);

/// Text trial-score I/O: one line per scored trial,
/// `enroll_id<TAB>test_id<TAB>score` at 9 significant digits.  Lines
/// starting with '#' are metadata comments and are skipped on load.
void SaveTrialScoresText(const TrialScores &trials, const std::string &path,
                         const std::vector<std::string> &comments = {});
TrialScores LoadTrialScoresText(const std::string &path);

/// Binary matrix-only format (magic, dims, row-major 8-byte floats).
void SaveScoreMatrixBinary(const Eigen::MatrixXd &scores,
                           const std::string &path);
Eigen::MatrixXd LoadScoreMatrixBinary(const std::string &path);

}  // namespace tpsda

#endif  // TPSDA_SCORING_H_
