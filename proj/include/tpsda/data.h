// include/tpsda/data.h

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

#ifndef TPSDA_DATA_H_
#define TPSDA_DATA_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tpsda/model.h"

// Embedding ingestion and preprocessing: centering, optional Fisher LDA,
// length normalization, speaker partitioning, and a synthetic-data
// generator that samples the full generative process of a model.

namespace tpsda {

struct EmbeddingSet {
  Eigen::MatrixXd x;                // N x D, one embedding per row
  std::vector<std::string> ids;     // N unique opaque ids
  std::vector<std::string> labels;  // empty, or N speaker keys

  int Count() const { return static_cast<int>(x.rows()); }
  int Dim() const { return static_cast<int>(x.cols()); }
  bool HasLabels() const { return !labels.empty(); }
};

/// Checks id/label table sizes and id uniqueness.
void ValidateEmbeddingSet(const EmbeddingSet &set);

/// Binary format: 4-byte float storage (embeddings are extractor outputs),
/// 8-byte compute after load.  Bit-exact save -> load -> save round trip.
void SaveEmbeddings(const EmbeddingSet &set, const std::string &path);
EmbeddingSet LoadEmbeddings(const std::string &path);

/// Plain-text alternative: one embedding per line, id first, then D values
/// whitespace-separated.  No label column; see LoadLabelMap.
EmbeddingSet LoadEmbeddingsText(const std::string &path);

/// `id<TAB>speaker` lines; attaches labels to a loaded set.
void AttachLabels(EmbeddingSet *set, const std::string &label_path);

/// Row-index groups by speaker label, in label first-appearance order.
std::vector<std::vector<int>> PartitionBySpeaker(const EmbeddingSet &set);

struct Preprocessor {
  Eigen::VectorXd mean;        // input-space mean
  Eigen::MatrixXd projection;  // input_dim x output_dim; 0x0 = identity
  bool fitted = false;

  int InputDim() const { return static_cast<int>(mean.size()); }
  int OutputDim() const {
    return projection.size() ? static_cast<int>(projection.cols())
                             : InputDim();
  }
};

/// Centering statistics plus optional Fisher LDA to lda_dim dimensions
/// (lda_dim <= 0 disables LDA).  LDA needs labels and lda_dim bounded by
/// the rank limit min(D, #classes - 1).  Deterministic eigenvector sign
/// convention: largest-magnitude entry positive.
Preprocessor FitPreprocessor(const EmbeddingSet &train, int lda_dim = 0);

/// Fixed order: subtract mean, project, length-normalize.  A row with
/// zero norm after centering is an error (reported with its id).  Not
/// idempotent: re-applying re-subtracts the training mean.
EmbeddingSet ApplyPreprocessor(const Preprocessor &prep,
                               const EmbeddingSet &set);

void SavePreprocessor(const Preprocessor &prep, const std::string &path);
Preprocessor LoadPreprocessor(const std::string &path);

/// Samples `speakers` x `per_speaker` labeled observations from the model's
/// generative process: per speaker z_i ~ VMF(v_i, gamma_i), per observation
/// y_ti ~ VMF(v_i, gamma_i), then x_t ~ VMF(mu_t, kappa).  Deterministic
/// under the seed.
EmbeddingSet SynthGenerate(const TPsdaModel &model, int speakers,
                           int per_speaker, std::uint64_t seed);

}  // namespace tpsda

#endif  // TPSDA_DATA_H_
