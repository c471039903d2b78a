// src/train.cc

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

#include "tpsda/train.h"

#include <chrono>
#include <cmath>
#include <ostream>

#include "parallel.h"
#include "tpsda/optim.h"
#include "tpsda/specfun.h"

namespace tpsda {

namespace {

SufficientStats ZeroStats(const ModelStructure &structure) {
  SufficientStats stats;
  const int n = structure.NumFactors();
  stats.r.reserve(n);
  stats.factor_resultant.reserve(n);
  for (int i = 0; i < n; ++i) {
    stats.r.emplace_back(Eigen::MatrixXd::Zero(structure.D, structure.dims[i]));
    stats.factor_resultant.emplace_back(
        Eigen::VectorXd::Zero(structure.dims[i]));
  }
  stats.factor_count.assign(n, 0.0);
  return stats;
}

void AccumulateSpeaker(const TPsdaModel &model, const Eigen::MatrixXd &x,
                       const std::vector<int> &rows, SufficientStats *stats) {
  if (rows.empty()) throw ValidationError("EStep: empty speaker");
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  const double kappa = model.Kappa();

  Eigen::MatrixXd sub(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sub.row(k) = x.row(rows[k]);
    if (std::fabs(sub.row(k).norm() - 1.0) > 1e-6) {
      throw ValidationError("EStep: observation " + std::to_string(rows[k]) +
                            " is not unit-norm");
    }
  }
  const Eigen::VectorXd xsum = sub.colwise().sum().transpose();

  for (int i = 0; i < m; ++i) {
    const FactorPrior &prior = model.Prior(i);
    const Eigen::VectorXd a =
        prior.gamma * prior.v +
        kappa * model.W()(i) * (model.K(i).transpose() * xsum);
    const Eigen::VectorXd zbar = VmfMeanNatural(a);
    stats->r[i].noalias() += xsum * zbar.transpose();
    stats->factor_resultant[i] += zbar;
  }
  for (int i = m; i < n; ++i) {
    const FactorPrior &prior = model.Prior(i);
    const double kw = kappa * model.W()(i);
    const Eigen::MatrixXd proj = sub * model.K(i);  // T_s x d_i
    Eigen::MatrixXd ybar(proj.rows(), proj.cols());
    for (int t = 0; t < proj.rows(); ++t) {
      const Eigen::VectorXd a =
          prior.gamma * prior.v + kw * proj.row(t).transpose();
      ybar.row(t) = VmfMeanNatural(a).transpose();
    }
    stats->r[i].noalias() += sub.transpose() * ybar;
    stats->factor_resultant[i] += ybar.colwise().sum().transpose();
  }
}

double WfObjective(const ModelStructure &structure, const SufficientStats &stats,
                   const Eigen::VectorXd &w, const Eigen::MatrixXd &f) {
  double acc = 0.0;
  int off = 0;
  for (int i = 0; i < structure.NumFactors(); ++i) {
    const int d = structure.dims[i];
    acc += w(i) *
           f.middleCols(off, d).cwiseProduct(stats.r[i]).sum();
    off += d;
  }
  return acc;
}

}  // namespace

SufficientStats EStep(const TPsdaModel &model, const Eigen::MatrixXd &x,
                      const std::vector<std::vector<int>> &speakers,
                      int threads) {
  if (speakers.empty()) throw ValidationError("EStep: no speakers");
  if (x.cols() != model.Dim()) throw ValidationError("EStep: dim mismatch");

  const int s = static_cast<int>(speakers.size());
  constexpr int kChunk = 16;
  const int num_chunks = (s + kChunk - 1) / kChunk;
  std::vector<SufficientStats> partial(num_chunks);
  ParallelChunks(s, kChunk, threads, [&](int chunk, int begin, int end) {
    SufficientStats local = ZeroStats(model.Structure());
    for (int j = begin; j < end; ++j) {
      AccumulateSpeaker(model, x, speakers[j], &local);
    }
    partial[chunk] = std::move(local);
  });

  SufficientStats stats = ZeroStats(model.Structure());
  for (const auto &p : partial) {
    for (int i = 0; i < model.NumFactors(); ++i) {
      stats.r[i] += p.r[i];
      stats.factor_resultant[i] += p.factor_resultant[i];
    }
  }
  long total_obs = 0;
  for (const auto &rows : speakers) total_obs += rows.size();
  stats.total_obs = total_obs;
  stats.num_speakers = s;
  const int m = model.NumSpeakerFactors();
  for (int i = 0; i < model.NumFactors(); ++i) {
    stats.factor_count[i] =
        (i < m) ? static_cast<double>(s) : static_cast<double>(total_obs);
  }
  return stats;
}

std::vector<FactorPrior> MStepPriors(const ModelStructure &structure,
                                     const SufficientStats &stats) {
  const int n = structure.NumFactors();
  std::vector<FactorPrior> priors(n);
  for (int i = 0; i < n; ++i) {
    // The EM auxiliary is linear in the posterior means, so the exact
    // maximizer is the VMF ML fit of their raw resultant over the count.
    const Eigen::MatrixXd mean_row =
        (stats.factor_resultant[i] / stats.factor_count[i]).transpose();
    const VmfParams fit = VmfFitMl(mean_row);
    priors[i].v = fit.mu;
    priors[i].gamma = fit.kappa;
  }
  return priors;
}

void MStepWf(const ModelStructure &structure, const SufficientStats &stats,
             Eigen::VectorXd *w, Eigen::MatrixXd *f, int inner_iterations) {
  const int n = structure.NumFactors();
  const int ds = structure.SubspaceDim();
  double r_norm = 0.0;
  for (const auto &r : stats.r) r_norm += r.squaredNorm();
  if (r_norm <= 0.0) {
    throw ValidationError("MStepWf: all cross-accumulators are zero");
  }

  std::vector<int> offsets(n);
  for (int i = 0, off = 0; i < n; ++i) {
    offsets[i] = off;
    off += structure.dims[i];
  }

  for (int round = 0; round < inner_iterations; ++round) {
    // w given F: maximize w'wtilde over the unit sphere.
    Eigen::VectorXd wtilde(n);
    for (int i = 0; i < n; ++i) {
      wtilde(i) = f->middleCols(offsets[i], structure.dims[i])
                      .cwiseProduct(stats.r[i])
                      .sum();
    }
    const double wt_norm = wtilde.norm();
    if (wt_norm > 1e-300) {
      *w = wtilde / wt_norm;
    } else {
      Warn("MStepWf: degenerate w update skipped (zero gradient)");
    }

    // F given w: polar factor of Ftilde = [w_1 R_1 ... w_n R_n].
    Eigen::MatrixXd ftilde(structure.D, ds);
    for (int i = 0; i < n; ++i) {
      ftilde.middleCols(offsets[i], structure.dims[i]) = (*w)(i) * stats.r[i];
    }
    Eigen::MatrixXd gram = ftilde.transpose() * ftilde;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    Eigen::VectorXd evals = eig.eigenvalues();
    const double scale = std::max(1e-300, gram.trace());
    if (evals.minCoeff() < -1e-10 * scale) {
      throw ValidationError("MStepWf: Gram matrix has a negative eigenvalue");
    }
    evals = evals.cwiseMax(0.0);
    if (evals.minCoeff() <= 1e-12 * scale) {
      Warn("MStepWf: rank-deficient update, regularizing with eps*I");
      evals.array() += 1e-12 * scale;
    }
    const Eigen::VectorXd inv_sqrt = evals.array().rsqrt();
    *f = ftilde * (eig.eigenvectors() * inv_sqrt.asDiagonal() *
                   eig.eigenvectors().transpose());
  }

  // Canonical gauge: (w_i, K_i) -> (-w_i, -K_i) leaves the objective and
  // the model law unchanged; fix w_i >= 0.
  for (int i = 0; i < n; ++i) {
    if ((*w)(i) < 0.0) {
      (*w)(i) = -(*w)(i);
      f->middleCols(offsets[i], structure.dims[i]) *= -1.0;
    }
    (*w)(i) += 0.0;
  }
}

double MStepKappa(const ModelStructure &structure,
                  const SufficientStats &stats, const Eigen::VectorXd &w,
                  const Eigen::MatrixXd &f, double bracket_lo,
                  double bracket_hi) {
  if (!(bracket_lo > 0.0) || !(bracket_lo < bracket_hi)) {
    throw ValidationError("MStepKappa: invalid bracket");
  }
  const double c = WfObjective(structure, stats, w, f);
  const double t_count = static_cast<double>(stats.total_obs);
  if (!(c > 0.0)) {
    Warn("MStepKappa: nonpositive alignment, clamping kappa to bracket lo");
    return bracket_lo;
  }
  const BesselOrder nu(0.5 * structure.D - 1.0);
  // Negated objective on the log scale.
  const auto neg = [&](double log_kappa) {
    const double kappa = std::exp(log_kappa);
    return -(t_count * (nu.nu * log_kappa - LogBesselI(nu, kappa)) + kappa * c);
  };

  double lo = bracket_lo, hi = bracket_hi;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const double ulo = std::log(lo), uhi = std::log(hi);
    const double u = BrentMinimize(ulo, uhi, neg, 1e-8);
    const bool at_lo = u - ulo < 1e-6, at_hi = uhi - u < 1e-6;
    if (!at_lo && !at_hi) return std::exp(u);
    if (attempt == 0) {
      if (at_lo) lo /= 100.0;
      if (at_hi) hi *= 100.0;
      continue;
    }
    Warn("MStepKappa: optimum pinned at bracket edge, clamping");
    return std::exp(u);
  }
  return bracket_lo;  // unreachable
}

TPsdaModel InitModel(const ModelStructure &structure, const Eigen::MatrixXd &x,
                     const std::vector<std::vector<int>> &speakers,
                     std::uint64_t seed) {
  ValidateOrThrow(structure);
  if (speakers.empty()) throw ValidationError("InitModel: no speakers");
  const int d_emb = structure.D;
  const int ds = structure.SubspaceDim();
  const int s = static_cast<int>(speakers.size());

  Eigen::MatrixXd means(d_emb, s);
  double resultant_sum = 0.0;
  long total_obs = 0;
  for (int j = 0; j < s; ++j) {
    if (speakers[j].empty()) throw ValidationError("InitModel: empty speaker");
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(d_emb);
    for (int r : speakers[j]) xsum += x.row(r).transpose();
    means.col(j) = xsum / static_cast<double>(speakers[j].size());
    resultant_sum += xsum.norm();
    total_obs += speakers[j].size();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(means, Eigen::ComputeThinU);
  const int rank_cols = std::min<int>(ds, svd.matrixU().cols());
  Eigen::MatrixXd f(d_emb, ds);
  f.leftCols(rank_cols) = svd.matrixU().leftCols(rank_cols);
  // Deterministic column signs: largest-magnitude entry positive.
  for (int j = 0; j < rank_cols; ++j) {
    int idx = 0;
    f.col(j).cwiseAbs().maxCoeff(&idx);
    if (f(idx, j) < 0.0) f.col(j) *= -1.0;
  }
  // Complete any missing directions with seeded random vectors made
  // orthonormal against the existing columns.
  Rng rng(seed);
  for (int j = rank_cols; j < ds; ++j) {
    for (;;) {
      Eigen::VectorXd v(d_emb);
      for (int i = 0; i < d_emb; ++i) v(i) = rng.Gaussian();
      for (int k = 0; k < j; ++k) v -= v.dot(f.col(k)) * f.col(k);
      const double norm = v.norm();
      if (norm > 1e-8) {
        f.col(j) = v / norm;
        break;
      }
    }
  }

  const double rho =
      std::min(1.0, resultant_sum / static_cast<double>(total_obs));
  double kappa = VmfKappaFromResultant(d_emb, rho);
  kappa = std::min(std::max(kappa, 1e-2), 1e6);

  const int n = structure.NumFactors();
  std::vector<FactorPrior> priors(n);
  for (int i = 0; i < n; ++i) {
    priors[i].v = Eigen::VectorXd::Zero(structure.dims[i]);
    priors[i].v(0) = 1.0;
    priors[i].gamma = 0.0;
  }
  return TPsdaModel(structure, kappa,
                    Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n))),
                    std::move(f), std::move(priors));
}

FitResult Fit(const Eigen::MatrixXd &x,
              const std::vector<std::vector<int>> &speakers,
              const ModelStructure &structure, const EmConfig &config,
              std::ostream *log) {
  ValidateOrThrow(structure);
  if (speakers.size() < 2) {
    throw ValidationError("Fit: at least 2 speakers required");
  }
  if (config.iterations < 1) {
    throw ValidationError("Fit: iterations must be >= 1");
  }

  TPsdaModel model = InitModel(structure, x, speakers, config.seed);
  FitResult result{model, {}, 0};
  result.log_marginal_trace.push_back(
      LogMarginal(model, x, speakers, config.threads));

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();

    const SufficientStats stats = EStep(model, x, speakers, config.threads);
    Eigen::VectorXd w = model.W();
    Eigen::MatrixXd f = model.F();
    MStepWf(structure, stats, &w, &f, config.wf_inner_iterations);
    const double kappa =
        MStepKappa(structure, stats, w, f, config.kappa_bracket_lo,
                   config.kappa_bracket_hi);
    std::vector<FactorPrior> priors;
    if (config.learn_priors) {
      priors = MStepPriors(structure, stats);
    } else {
      priors.reserve(structure.NumFactors());
      for (int i = 0; i < structure.NumFactors(); ++i) {
        priors.push_back(model.Prior(i));
      }
    }
    model = TPsdaModel(structure, kappa, std::move(w), std::move(f),
                       std::move(priors));

    const double lm = LogMarginal(model, x, speakers, config.threads);
    const double prev = result.log_marginal_trace.back();
    result.log_marginal_trace.push_back(lm);
    result.iterations_run = iter;

    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    if (log) {
      (*log) << iter << '\t' << lm << '\t' << model.Kappa() << '\t' << wall_ms
             << '\n';
    }
    if (lm < prev - 1e-6 * std::fabs(prev)) {
      Warn("Fit: log-marginal decreased at iteration " + std::to_string(iter));
    }
    if (std::fabs(lm - prev) <
        config.convergence_tol * std::max(1.0, std::fabs(lm))) {
      break;
    }
  }
  result.model = model;
  return result;
}

}  // namespace tpsda
