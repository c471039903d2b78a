// src/model.cc

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

#include "tpsda/model.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binio.h"
#include "parallel.h"
#include "tpsda/specfun.h"

namespace tpsda {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr char kModelMagic[] = "TPSDA01";

Eigen::VectorXd CanonicalE1(int dim) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  e(0) = 1.0;
  return e;
}

// F (F'F)^{-1/2} via symmetric eigendecomposition of the small Gram matrix.
Eigen::MatrixXd OrthonormalizeColumns(const Eigen::MatrixXd &f) {
  const Eigen::MatrixXd gram = f.transpose() * f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd &evals = eig.eigenvalues();
  if (evals.minCoeff() <= 0.0) {
    throw ValidationError("orthonormalization: rank-deficient loading matrix");
  }
  const Eigen::VectorXd inv_sqrt = evals.array().rsqrt();
  return f * (eig.eigenvectors() * inv_sqrt.asDiagonal() *
              eig.eigenvectors().transpose());
}

}  // namespace

std::vector<std::string> Validate(const ModelStructure &structure) {
  std::vector<std::string> errors;
  if (structure.D < 1) errors.push_back("embedding dimension D must be >= 1");
  const int n = structure.NumFactors();
  if (n < 1) errors.push_back("at least one factor required");
  for (int i = 0; i < n; ++i) {
    if (structure.dims[i] < 1) {
      errors.push_back("factor dimension d_" + std::to_string(i + 1) +
                       " must be >= 1");
    }
  }
  if (structure.m < 1 || structure.m > std::max(n, 1)) {
    errors.push_back("speaker factor count m must satisfy 1 <= m <= n");
  }
  const int ds = structure.SubspaceDim();
  if (structure.D >= 1 && ds > structure.D) {
    errors.push_back("D_s = " + std::to_string(ds) + " exceeds D = " +
                     std::to_string(structure.D));
  }
  return errors;
}

void ValidateOrThrow(const ModelStructure &structure) {
  const auto errors = Validate(structure);
  if (errors.empty()) return;
  std::string msg = "invalid model structure:";
  for (const auto &e : errors) msg += "\n  " + e;
  throw ValidationError(msg);
}

TPsdaModel::TPsdaModel(ModelStructure structure, double kappa,
                       Eigen::VectorXd w, Eigen::MatrixXd f,
                       std::vector<FactorPrior> priors)
    : structure_(std::move(structure)),
      kappa_(kappa),
      w_(std::move(w)),
      f_(std::move(f)),
      priors_(std::move(priors)) {
  ValidateOrThrow(structure_);
  const int n = structure_.NumFactors();
  const int ds = structure_.SubspaceDim();

  if (!(kappa_ > 0.0) || !std::isfinite(kappa_)) {
    throw ValidationError("TPsdaModel: kappa must be finite and > 0");
  }
  if (w_.size() != n) throw ValidationError("TPsdaModel: w has wrong length");
  const double wnorm = w_.norm();
  if (std::fabs(wnorm - 1.0) > 1e-6) {
    throw ValidationError("TPsdaModel: |w| = " + std::to_string(wnorm) +
                          ", expected 1 within 1e-6");
  }
  if (std::fabs(wnorm - 1.0) > 1e-10) w_ /= wnorm;

  if (f_.rows() != structure_.D || f_.cols() != ds) {
    throw ValidationError("TPsdaModel: F must be D x D_s");
  }
  const double ortho_drift =
      (f_.transpose() * f_ - Eigen::MatrixXd::Identity(ds, ds))
          .cwiseAbs()
          .maxCoeff();
  if (ortho_drift > 1e-6) {
    throw ValidationError("TPsdaModel: |F'F - I|_max = " +
                          std::to_string(ortho_drift) + " exceeds 1e-6");
  }
  if (ortho_drift > 1e-10) f_ = OrthonormalizeColumns(f_);

  if (static_cast<int>(priors_.size()) != n) {
    throw ValidationError("TPsdaModel: prior count mismatch");
  }
  offsets_.resize(n);
  int off = 0;
  for (int i = 0; i < n; ++i) {
    offsets_[i] = off;
    off += structure_.dims[i];
    FactorPrior &p = priors_[i];
    if (p.v.size() != structure_.dims[i]) {
      throw ValidationError("TPsdaModel: prior direction v_" +
                            std::to_string(i + 1) + " has wrong dimension");
    }
    if (!(p.gamma >= 0.0) || !std::isfinite(p.gamma)) {
      throw ValidationError("TPsdaModel: gamma_" + std::to_string(i + 1) +
                            " must be finite and >= 0");
    }
    const double vnorm = p.v.norm();
    if (std::fabs(vnorm - 1.0) > 1e-6) {
      throw ValidationError("TPsdaModel: |v_" + std::to_string(i + 1) +
                            "| must be 1");
    }
    if (std::fabs(vnorm - 1.0) > 1e-10) p.v /= vnorm;
  }

  // Canonical sign: flipping (w_i, K_i) jointly changes nothing observable.
  for (int i = 0; i < n; ++i) {
    if (w_(i) < 0.0) {
      w_(i) = -w_(i);
      f_.middleCols(offsets_[i], structure_.dims[i]) *= -1.0;
    }
    w_(i) += 0.0;  // normalize -0.0
  }
}

Eigen::VectorXd MeanDirection(const TPsdaModel &model,
                              const std::vector<Eigen::VectorXd> &z,
                              const std::vector<Eigen::VectorXd> &y) {
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  if (static_cast<int>(z.size()) != m ||
      static_cast<int>(y.size()) != n - m) {
    throw ValidationError("MeanDirection: factor count mismatch");
  }
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(model.Dim());
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd &h = (i < m) ? z[i] : y[i - m];
    if (h.size() != model.FactorDim(i)) {
      throw ValidationError("MeanDirection: factor " + std::to_string(i + 1) +
                            " has wrong dimension");
    }
    if (std::fabs(h.norm() - 1.0) > 1e-6) {
      throw ValidationError("MeanDirection: factor " + std::to_string(i + 1) +
                            " is not unit-norm");
    }
    mu.noalias() += model.W()(i) * (model.K(i) * h);
  }
  const double norm = mu.norm();
  if (std::fabs(norm - 1.0) > 1e-9) {
    throw ValidationError("MeanDirection: |mu| = " + std::to_string(norm) +
                          " drifted beyond 1e-9 from 1");
  }
  return mu;
}

FactorPosterior PosteriorSpeaker(const TPsdaModel &model,
                                 const Eigen::MatrixXd &rows) {
  if (rows.rows() < 1) throw ValidationError("PosteriorSpeaker: empty input");
  if (rows.cols() != model.Dim()) {
    throw ValidationError("PosteriorSpeaker: dimension mismatch");
  }
  const Eigen::VectorXd xsum = rows.colwise().sum().transpose();
  FactorPosterior post;
  post.speaker.reserve(model.NumSpeakerFactors());
  for (int i = 0; i < model.NumSpeakerFactors(); ++i) {
    const FactorPrior &prior = model.Prior(i);
    post.speaker.push_back(prior.gamma * prior.v +
                           model.Kappa() * model.W()(i) *
                               (model.K(i).transpose() * xsum));
  }
  return post;
}

FactorPosterior PosteriorChannel(const TPsdaModel &model,
                                 const Eigen::VectorXd &x) {
  if (x.size() != model.Dim()) {
    throw ValidationError("PosteriorChannel: dimension mismatch");
  }
  FactorPosterior post;
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  post.channel.reserve(n - m);
  for (int i = m; i < n; ++i) {
    const FactorPrior &prior = model.Prior(i);
    post.channel.push_back(prior.gamma * prior.v +
                           model.Kappa() * model.W()(i) *
                               (model.K(i).transpose() * x));
  }
  return post;
}

namespace {

// log P(X_s) for one speaker by the candidate identity, with candidate
// hidden values z0 (m entries) and y0 (n - m entries, shared across t):
//   log P(X) = log P(X|Z0,Y0) + log P(Z0) + log P(Y0)
//            - log P(Z0|X) - log P(Y0|X).
double LogMarginalOneSpeaker(const TPsdaModel &model, const Eigen::MatrixXd &x,
                             const std::vector<int> &rows,
                             const std::vector<Eigen::VectorXd> &z0,
                             const std::vector<Eigen::VectorXd> &y0) {
  if (rows.empty()) throw ValidationError("LogMarginal: empty speaker");
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  const int d_emb = model.Dim();
  const double kappa = model.Kappa();
  const double t_count = static_cast<double>(rows.size());

  Eigen::VectorXd xsum = Eigen::VectorXd::Zero(d_emb);
  for (int r : rows) xsum += x.row(r).transpose();

  const Eigen::VectorXd mu0 = MeanDirection(model, z0, y0);
  const BesselOrder nu_d(0.5 * d_emb - 1.0);
  double ll = t_count * (LogCbar(nu_d, kappa) - 0.5 * d_emb * kLog2Pi - kappa) +
              kappa * mu0.dot(xsum);

  for (int i = 0; i < m; ++i) {
    const FactorPrior &prior = model.Prior(i);
    const Eigen::VectorXd a_prior = prior.gamma * prior.v;
    const Eigen::VectorXd vtilde =
        a_prior + kappa * model.W()(i) * (model.K(i).transpose() * xsum);
    ll += VmfLogPdfNatural(z0[i], a_prior) - VmfLogPdfNatural(z0[i], vtilde);
  }
  for (int i = m; i < n; ++i) {
    const FactorPrior &prior = model.Prior(i);
    const Eigen::VectorXd a_prior = prior.gamma * prior.v;
    ll += t_count * VmfLogPdfNatural(y0[i - m], a_prior);
    for (int r : rows) {
      const Eigen::VectorXd vtilde =
          a_prior + kappa * model.W()(i) *
                        (model.K(i).transpose() * x.row(r).transpose());
      ll -= VmfLogPdfNatural(y0[i - m], vtilde);
    }
  }
  return ll;
}

std::vector<Eigen::VectorXd> DefaultCandidates(const TPsdaModel &model,
                                               int first, int last) {
  std::vector<Eigen::VectorXd> c;
  c.reserve(last - first);
  for (int i = first; i < last; ++i) {
    const FactorPrior &prior = model.Prior(i);
    c.push_back(prior.gamma > 0.0 ? prior.v : CanonicalE1(model.FactorDim(i)));
  }
  return c;
}

}  // namespace

double LogMarginalWithCandidates(const TPsdaModel &model,
                                 const Eigen::MatrixXd &x,
                                 const std::vector<std::vector<int>> &speakers,
                                 const std::vector<Eigen::VectorXd> *z0,
                                 const std::vector<Eigen::VectorXd> *y0) {
  if (speakers.empty()) throw ValidationError("LogMarginal: no speakers");
  const std::vector<Eigen::VectorXd> zc =
      z0 ? *z0 : DefaultCandidates(model, 0, model.NumSpeakerFactors());
  const std::vector<Eigen::VectorXd> yc =
      y0 ? *y0
         : DefaultCandidates(model, model.NumSpeakerFactors(),
                             model.NumFactors());
  double total = 0.0;
  for (const auto &rows : speakers) {
    total += LogMarginalOneSpeaker(model, x, rows, zc, yc);
  }
  return total;
}

double LogMarginal(const TPsdaModel &model, const Eigen::MatrixXd &x,
                   const std::vector<std::vector<int>> &speakers,
                   int threads) {
  if (speakers.empty()) throw ValidationError("LogMarginal: no speakers");
  const std::vector<Eigen::VectorXd> zc =
      DefaultCandidates(model, 0, model.NumSpeakerFactors());
  const std::vector<Eigen::VectorXd> yc = DefaultCandidates(
      model, model.NumSpeakerFactors(), model.NumFactors());

  const int s = static_cast<int>(speakers.size());
  constexpr int kChunk = 16;
  std::vector<double> partial((s + kChunk - 1) / kChunk, 0.0);
  ParallelChunks(s, kChunk, threads, [&](int chunk, int begin, int end) {
    double acc = 0.0;
    for (int j = begin; j < end; ++j) {
      acc += LogMarginalOneSpeaker(model, x, speakers[j], zc, yc);
    }
    partial[chunk] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

bool DegeneratePsda(const TPsdaModel &model) {
  return model.NumFactors() == 1 && model.NumSpeakerFactors() == 1 &&
         model.FactorDim(0) == model.Dim();
}

TPsdaModel MakeCosineEquivalent(int embedding_dim, double kappa) {
  ModelStructure structure;
  structure.D = embedding_dim;
  structure.dims = {embedding_dim};
  structure.m = 1;
  std::vector<FactorPrior> priors(1);
  priors[0].v = CanonicalE1(embedding_dim);
  priors[0].gamma = 0.0;
  return TPsdaModel(structure, kappa, Eigen::VectorXd::Ones(1),
                    Eigen::MatrixXd::Identity(embedding_dim, embedding_dim),
                    std::move(priors));
}

TPsdaModel MakeRandomModel(const ModelStructure &structure, double kappa,
                           std::uint64_t seed, const Eigen::VectorXd &w,
                           const std::vector<double> &gammas) {
  ValidateOrThrow(structure);
  const int n = structure.NumFactors();
  const int ds = structure.SubspaceDim();
  if (!gammas.empty() && static_cast<int>(gammas.size()) != n) {
    throw ValidationError("MakeRandomModel: gamma count mismatch");
  }
  Rng rng(seed);

  Eigen::MatrixXd g(structure.D, ds);
  for (int j = 0; j < ds; ++j) {
    for (int i = 0; i < structure.D; ++i) g(i, j) = rng.Gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd f =
      qr.householderQ() * Eigen::MatrixXd::Identity(structure.D, ds);
  const Eigen::MatrixXd r =
      qr.matrixQR().topRows(ds).triangularView<Eigen::Upper>();
  for (int j = 0; j < ds; ++j) {
    if (r(j, j) < 0.0) f.col(j) *= -1.0;
  }

  Eigen::VectorXd weights =
      (w.size() > 0)
          ? w
          : Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));

  std::vector<FactorPrior> priors(n);
  for (int i = 0; i < n; ++i) {
    const double gamma = gammas.empty() ? 0.0 : gammas[i];
    priors[i].gamma = gamma;
    const int d = structure.dims[i];
    if (gamma > 0.0) {
      Eigen::VectorXd v(d);
      double norm;
      do {
        for (int j = 0; j < d; ++j) v(j) = rng.Gaussian();
        norm = v.norm();
      } while (norm < 1e-12);
      priors[i].v = v / norm;
    } else {
      priors[i].v = CanonicalE1(d);
    }
  }
  return TPsdaModel(structure, kappa, std::move(weights), std::move(f),
                    std::move(priors));
}

void SaveModel(const TPsdaModel &model, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  const ModelStructure &s = model.Structure();
  os << kModelMagic << "\n";
  os << "D " << s.D << "\n";
  os << "n " << s.NumFactors() << "\n";
  os << "m " << s.m << "\n";
  os << "dims";
  for (int d : s.dims) os << " " << d;
  os << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", model.Kappa());
  os << "kappa " << buf << "\n";
  os << "flags 0\n";
  os << "end\n";
  for (int i = 0; i < s.NumFactors(); ++i) {
    binio::WriteF64(os, model.W()(i));
  }
  for (int j = 0; j < model.F().cols(); ++j) {
    for (int i = 0; i < model.F().rows(); ++i) {
      binio::WriteF64(os, model.F()(i, j));
    }
  }
  for (int i = 0; i < s.NumFactors(); ++i) {
    const FactorPrior &p = model.Prior(i);
    for (int j = 0; j < p.v.size(); ++j) binio::WriteF64(os, p.v(j));
    binio::WriteF64(os, p.gamma);
  }
  if (!os) throw IoError("write failed: " + path);
}

TPsdaModel LoadModel(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kModelMagic) {
    throw IoError("bad model magic in " + path);
  }
  ModelStructure s;
  double kappa = 0.0;
  bool have_d = false, have_n = false, have_m = false, have_dims = false,
       have_kappa = false;
  int n_declared = 0;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "D") {
      ls >> s.D;
      have_d = true;
    } else if (key == "n") {
      ls >> n_declared;
      have_n = true;
    } else if (key == "m") {
      ls >> s.m;
      have_m = true;
    } else if (key == "dims") {
      int d;
      while (ls >> d) s.dims.push_back(d);
      have_dims = true;
    } else if (key == "kappa") {
      ls >> kappa;
      have_kappa = true;
    } else if (key == "flags") {
      // reserved
    } else {
      throw IoError("unknown model header key '" + key + "' in " + path);
    }
    if (ls.fail() && key != "dims") {
      throw IoError("malformed model header line '" + line + "' in " + path);
    }
  }
  if (!have_d || !have_n || !have_m || !have_dims || !have_kappa) {
    throw IoError("incomplete model header in " + path);
  }
  if (n_declared != s.NumFactors()) {
    throw IoError("model header dims count does not match n in " + path);
  }
  ValidateOrThrow(s);

  const int n = s.NumFactors();
  const int ds = s.SubspaceDim();
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = binio::ReadF64(is);
  Eigen::MatrixXd f(s.D, ds);
  for (int j = 0; j < ds; ++j) {
    for (int i = 0; i < s.D; ++i) f(i, j) = binio::ReadF64(is);
  }
  std::vector<FactorPrior> priors(n);
  for (int i = 0; i < n; ++i) {
    priors[i].v.resize(s.dims[i]);
    for (int j = 0; j < s.dims[i]; ++j) priors[i].v(j) = binio::ReadF64(is);
    priors[i].gamma = binio::ReadF64(is);
  }
  return TPsdaModel(s, kappa, std::move(w), std::move(f), std::move(priors));
}

}  // namespace tpsda
