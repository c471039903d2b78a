// include/tpsda/model.h

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

#ifndef TPSDA_MODEL_H_
#define TPSDA_MODEL_H_

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tpsda/common.h"
#include "tpsda/vmf.h"

// The toroidal generative model for unit-norm embeddings.  An observation
// x in S^{D-1} is VMF-distributed around a mean direction that is a
// weighted combination of hidden unit vectors: m per-speaker factors z_i
// and n-m per-observation channel factors y_ti, mapped into the embedding
// space by mutually orthogonal factor loading blocks K_i with |w| = 1, so
// the mean direction is exactly unit-norm.  Each hidden factor carries a
// conjugate VMF prior (v_i, gamma_i); posteriors stay factorial with
// closed-form natural parameters.

namespace tpsda {

struct ModelStructure {
  int D = 0;               // embedding dimension
  std::vector<int> dims;   // factor dimensions d_1..d_n
  int m = 0;               // number of speaker factors (first m of n)

  int NumFactors() const { return static_cast<int>(dims.size()); }
  int SubspaceDim() const {
    int s = 0;
    for (int d : dims) s += d;
    return s;
  }
};

/// Structure check; returns one message per violated invariant
/// (empty result means valid).
std::vector<std::string> Validate(const ModelStructure &structure);

/// Throws ValidationError listing every violation.
void ValidateOrThrow(const ModelStructure &structure);

struct FactorPrior {
  Eigen::VectorXd v;   // unit vector in R^{d_i}
  double gamma = 0.0;  // prior concentration, >= 0
};

class TPsdaModel {
 public:
  /// Validates all invariants: structure, kappa > 0, |w| = 1 and
  /// F'F = I within 1e-6 (drift beyond 1e-10 is repaired, larger is
  /// rejected), unit priors.  Factors are canonicalized to w_i >= 0 by
  /// flipping (w_i, K_i) pairs, which leaves the model law unchanged.
  TPsdaModel(ModelStructure structure, double kappa, Eigen::VectorXd w,
             Eigen::MatrixXd f, std::vector<FactorPrior> priors);

  const ModelStructure &Structure() const { return structure_; }
  int Dim() const { return structure_.D; }
  int NumFactors() const { return structure_.NumFactors(); }
  int NumSpeakerFactors() const { return structure_.m; }
  int FactorDim(int i) const { return structure_.dims[i]; }
  double Kappa() const { return kappa_; }
  const Eigen::VectorXd &W() const { return w_; }
  const Eigen::MatrixXd &F() const { return f_; }
  const FactorPrior &Prior(int i) const { return priors_[i]; }

  /// Loading block K_i (D x d_i columns of F).
  Eigen::Ref<const Eigen::MatrixXd> K(int i) const {
    return f_.middleCols(offsets_[i], structure_.dims[i]);
  }

 private:
  ModelStructure structure_;
  double kappa_;
  Eigen::VectorXd w_;
  Eigen::MatrixXd f_;  // D x D_s, orthonormal columns
  std::vector<FactorPrior> priors_;
  std::vector<int> offsets_;  // column offset of each K_i in F
};

/// Natural parameters of the factorial posterior.  A call fills only the
/// part it computes: `speaker` from a full speaker's observations,
/// `channel` from a single observation.
struct FactorPosterior {
  std::vector<Eigen::VectorXd> speaker;  // vtilde_i,  i = 1..m
  std::vector<Eigen::VectorXd> channel;  // vtilde_ti, i = m+1..n, one obs
};

/// mu_t = sum_{i<=m} w_i K_i z_i + sum_{i>m} w_i K_i y_i.  Inputs must be
/// unit within 1e-6; the result is asserted unit within 1e-9 (never
/// re-normalized).
Eigen::VectorXd MeanDirection(const TPsdaModel &model,
                              const std::vector<Eigen::VectorXd> &z,
                              const std::vector<Eigen::VectorXd> &y);

/// vtilde_i = gamma_i v_i + kappa w_i K_i' sum_t x_t for i <= m, from all
/// rows (observations) of one speaker.
FactorPosterior PosteriorSpeaker(const TPsdaModel &model,
                                 const Eigen::MatrixXd &rows);

/// vtilde_ti = gamma_i v_i + kappa w_i K_i' x_t for i > m.
FactorPosterior PosteriorChannel(const TPsdaModel &model,
                                 const Eigen::VectorXd &x);

/// Total marginal log-likelihood sum_s log P(X_s) over a speaker partition
/// (lists of row indices into X).  Hidden variables are integrated out in
/// closed form via the candidate identity P(X) = P(X|h)P(h)/P(h|X); the
/// result does not depend on the candidate values.
double LogMarginal(const TPsdaModel &model, const Eigen::MatrixXd &x,
                   const std::vector<std::vector<int>> &speakers,
                   int threads = 1);

/// As above with explicit candidate values (z0 has m entries, y0 has n-m),
/// used to exercise the invariance; null pointers select the defaults
/// (prior mode v_i when gamma_i > 0, else e_1).
double LogMarginalWithCandidates(const TPsdaModel &model,
                                 const Eigen::MatrixXd &x,
                                 const std::vector<std::vector<int>> &speakers,
                                 const std::vector<Eigen::VectorXd> *z0,
                                 const std::vector<Eigen::VectorXd> *y0);

/// True iff the model collapses to the single full-dimension factor case
/// (n = m = 1, d_1 = D).
bool DegeneratePsda(const TPsdaModel &model);

/// The degenerate configuration with gamma_1 = 0, whose likelihood-ratio
/// ranking equals cosine-similarity ranking for single-embedding trials.
TPsdaModel MakeCosineEquivalent(int embedding_dim, double kappa = 1.0);

/// Random valid model: seeded Gaussian loadings orthonormalized by QR,
/// balanced weights unless given, uniform priors unless gammas given
/// (prior directions are random units where gamma > 0).
TPsdaModel MakeRandomModel(const ModelStructure &structure, double kappa,
                           std::uint64_t seed,
                           const Eigen::VectorXd &w = Eigen::VectorXd(),
                           const std::vector<double> &gammas = {});

/// Single-file serialization; bit-exact round trip.
void SaveModel(const TPsdaModel &model, const std::string &path);
TPsdaModel LoadModel(const std::string &path);

}  // namespace tpsda

#endif  // TPSDA_MODEL_H_
