// src/data.cc

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

#include "tpsda/data.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "binio.h"

namespace tpsda {

namespace {

constexpr char kEmbMagic[] = "TPEMB01";  // 7 bytes, no terminator on disk
constexpr char kPrepMagic[] = "TPPRP01";

void CheckIdsUnique(const std::vector<std::string> &ids) {
  std::unordered_set<std::string> seen;
  for (const auto &id : ids) {
    if (!seen.insert(id).second) {
      throw ValidationError("duplicate embedding id '" + id + "'");
    }
  }
}

}  // namespace

void ValidateEmbeddingSet(const EmbeddingSet &set) {
  if (static_cast<int>(set.ids.size()) != set.Count()) {
    throw ValidationError("EmbeddingSet: id count does not match rows");
  }
  if (!set.labels.empty() &&
      static_cast<int>(set.labels.size()) != set.Count()) {
    throw ValidationError("EmbeddingSet: label count does not match rows");
  }
  CheckIdsUnique(set.ids);
}

void SaveEmbeddings(const EmbeddingSet &set, const std::string &path) {
  ValidateEmbeddingSet(set);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  binio::WriteBytes(os, kEmbMagic, 7);
  binio::WriteLe<std::uint8_t>(os, set.HasLabels() ? 1 : 0);
  binio::WriteLe<std::uint64_t>(os, static_cast<std::uint64_t>(set.Count()));
  binio::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(set.Dim()));
  for (int i = 0; i < set.Count(); ++i) {
    for (int j = 0; j < set.Dim(); ++j) {
      binio::WriteF32(os, static_cast<float>(set.x(i, j)));
    }
  }
  for (const auto &id : set.ids) binio::WriteString(os, id);
  if (set.HasLabels()) {
    for (const auto &label : set.labels) binio::WriteString(os, label);
  }
  if (!os) throw IoError("write failed: " + path);
}

EmbeddingSet LoadEmbeddings(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[7];
  binio::ReadBytes(is, magic, 7);
  if (std::string(magic, 7) != kEmbMagic) {
    throw IoError("bad embedding magic in " + path);
  }
  const auto flags = binio::ReadLe<std::uint8_t>(is);
  const auto n64 = binio::ReadLe<std::uint64_t>(is);
  const auto dim = binio::ReadLe<std::uint32_t>(is);
  if (n64 > (1ull << 32) || (n64 > 0 && dim == 0)) {
    throw IoError("implausible embedding header in " + path);
  }
  const int n = static_cast<int>(n64);
  EmbeddingSet set;
  set.x.resize(n, dim);
  for (int i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) {
      set.x(i, j) = static_cast<double>(binio::ReadF32(is));
    }
  }
  set.ids.reserve(n);
  for (int i = 0; i < n; ++i) set.ids.push_back(binio::ReadString(is));
  if (flags & 1) {
    set.labels.reserve(n);
    for (int i = 0; i < n; ++i) set.labels.push_back(binio::ReadString(is));
  }
  ValidateEmbeddingSet(set);
  return set;
}

EmbeddingSet LoadEmbeddingsText(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (values.empty()) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": no embedding values");
    }
    if (dim == 0) dim = values.size();
    if (values.size() != dim) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": inconsistent dimension");
    }
    ids.push_back(std::move(id));
    rows.push_back(std::move(values));
  }
  EmbeddingSet set;
  set.ids = std::move(ids);
  set.x.resize(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) set.x(i, j) = rows[i][j];
  }
  ValidateEmbeddingSet(set);
  return set;
}

void AttachLabels(EmbeddingSet *set, const std::string &label_path) {
  std::ifstream is(label_path);
  if (!is) throw IoError("cannot open: " + label_path);
  std::unordered_map<std::string, std::string> map;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, speaker;
    if (!(ls >> id >> speaker)) {
      throw IoError(label_path + ":" + std::to_string(line_no) +
                    ": expected `id speaker`");
    }
    map[id] = speaker;
  }
  std::vector<std::string> labels;
  labels.reserve(set->ids.size());
  for (const auto &id : set->ids) {
    const auto it = map.find(id);
    if (it == map.end()) {
      throw ValidationError("no label for embedding id '" + id + "'");
    }
    labels.push_back(it->second);
  }
  set->labels = std::move(labels);
}

std::vector<std::vector<int>> PartitionBySpeaker(const EmbeddingSet &set) {
  if (!set.HasLabels()) {
    throw ValidationError("PartitionBySpeaker: set has no speaker labels");
  }
  std::map<std::string, int> order;
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < set.Count(); ++i) {
    const auto [it, inserted] =
        order.emplace(set.labels[i], static_cast<int>(groups.size()));
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

Preprocessor FitPreprocessor(const EmbeddingSet &train, int lda_dim) {
  ValidateEmbeddingSet(train);
  if (train.Count() < 1) throw ValidationError("FitPreprocessor: empty set");
  const int d = train.Dim();
  Preprocessor prep;
  prep.mean = train.x.colwise().mean().transpose();
  prep.fitted = true;
  if (lda_dim <= 0) return prep;

  if (!train.HasLabels()) {
    throw ValidationError("FitPreprocessor: LDA requires speaker labels");
  }
  const auto groups = PartitionBySpeaker(train);
  const int num_classes = static_cast<int>(groups.size());
  if (lda_dim > num_classes - 1 || lda_dim > d) {
    throw ValidationError(
        "FitPreprocessor: lda_dim " + std::to_string(lda_dim) +
        " exceeds the rank bound min(D, #classes - 1) = " +
        std::to_string(std::min(d, num_classes - 1)));
  }

  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  for (const auto &rows : groups) {
    Eigen::VectorXd class_mean = Eigen::VectorXd::Zero(d);
    for (int r : rows) class_mean += train.x.row(r).transpose();
    class_mean /= static_cast<double>(rows.size());
    for (int r : rows) {
      const Eigen::VectorXd diff = train.x.row(r).transpose() - class_mean;
      within.noalias() += diff * diff.transpose();
    }
    const Eigen::VectorXd offset = class_mean - prep.mean;
    between.noalias() +=
        static_cast<double>(rows.size()) * (offset * offset.transpose());
  }
  within +=
      (1e-6 * within.trace() / d) * Eigen::MatrixXd::Identity(d, d);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(between,
                                                                within);
  if (eig.info() != Eigen::Success) {
    throw ValidationError("FitPreprocessor: LDA eigensolver failed");
  }
  // Eigenvalues ascend; keep the top lda_dim directions in descending order.
  prep.projection.resize(d, lda_dim);
  for (int j = 0; j < lda_dim; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - j);
    int idx = 0;
    v.cwiseAbs().maxCoeff(&idx);
    if (v(idx) < 0.0) v = -v;
    prep.projection.col(j) = v;
  }
  return prep;
}

EmbeddingSet ApplyPreprocessor(const Preprocessor &prep,
                               const EmbeddingSet &set) {
  if (!prep.fitted) throw ValidationError("ApplyPreprocessor: not fitted");
  if (set.Dim() != prep.InputDim()) {
    throw ValidationError("ApplyPreprocessor: dimension mismatch");
  }
  EmbeddingSet out;
  out.ids = set.ids;
  out.labels = set.labels;
  const int n = set.Count();
  const int d_out = prep.OutputDim();
  out.x.resize(n, d_out);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = set.x.row(i).transpose() - prep.mean;
    if (prep.projection.size() > 0) v = prep.projection.transpose() * v;
    const double norm = v.norm();
    if (norm < 1e-12) {
      throw ValidationError("ApplyPreprocessor: zero-norm row for id '" +
                            set.ids[i] + "' after centering");
    }
    out.x.row(i) = v.transpose() / norm;
  }
  return out;
}

void SavePreprocessor(const Preprocessor &prep, const std::string &path) {
  if (!prep.fitted) throw ValidationError("SavePreprocessor: not fitted");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << kPrepMagic << "\n";
  os << "input_dim " << prep.InputDim() << "\n";
  os << "output_dim " << prep.OutputDim() << "\n";
  os << "has_projection " << (prep.projection.size() > 0 ? 1 : 0) << "\n";
  os << "end\n";
  for (int i = 0; i < prep.mean.size(); ++i) binio::WriteF64(os, prep.mean(i));
  for (int j = 0; j < prep.projection.cols(); ++j) {
    for (int i = 0; i < prep.projection.rows(); ++i) {
      binio::WriteF64(os, prep.projection(i, j));
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

Preprocessor LoadPreprocessor(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != kPrepMagic) {
    throw IoError("bad preprocessor magic in " + path);
  }
  int input_dim = -1, output_dim = -1, has_projection = -1;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "input_dim") ls >> input_dim;
    else if (key == "output_dim") ls >> output_dim;
    else if (key == "has_projection") ls >> has_projection;
    else throw IoError("unknown preprocessor key '" + key + "' in " + path);
    if (ls.fail()) throw IoError("malformed preprocessor header in " + path);
  }
  if (input_dim < 1 || output_dim < 1 || has_projection < 0) {
    throw IoError("incomplete preprocessor header in " + path);
  }
  Preprocessor prep;
  prep.mean.resize(input_dim);
  for (int i = 0; i < input_dim; ++i) prep.mean(i) = binio::ReadF64(is);
  if (has_projection) {
    prep.projection.resize(input_dim, output_dim);
    for (int j = 0; j < output_dim; ++j) {
      for (int i = 0; i < input_dim; ++i) {
        prep.projection(i, j) = binio::ReadF64(is);
      }
    }
  } else if (output_dim != input_dim) {
    throw IoError("preprocessor without projection must preserve dimension");
  }
  prep.fitted = true;
  return prep;
}

EmbeddingSet SynthGenerate(const TPsdaModel &model, int speakers,
                           int per_speaker, std::uint64_t seed) {
  if (speakers < 1 || per_speaker < 1) {
    throw ValidationError("SynthGenerate: speakers and per_speaker >= 1");
  }
  Rng rng(seed);
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  EmbeddingSet set;
  set.x.resize(speakers * per_speaker, model.Dim());
  set.ids.reserve(speakers * per_speaker);
  set.labels.reserve(speakers * per_speaker);

  char buf[64];
  for (int s = 0; s < speakers; ++s) {
    std::vector<Eigen::VectorXd> z;
    z.reserve(m);
    for (int i = 0; i < m; ++i) {
      const FactorPrior &prior = model.Prior(i);
      z.push_back(VmfSample(VmfParams(prior.v, prior.gamma), 1, rng)
                      .row(0)
                      .transpose());
    }
    std::snprintf(buf, sizeof(buf), "spk%05d", s);
    const std::string speaker_id(buf);
    for (int t = 0; t < per_speaker; ++t) {
      std::vector<Eigen::VectorXd> y;
      y.reserve(n - m);
      for (int i = m; i < n; ++i) {
        const FactorPrior &prior = model.Prior(i);
        y.push_back(VmfSample(VmfParams(prior.v, prior.gamma), 1, rng)
                        .row(0)
                        .transpose());
      }
      const Eigen::VectorXd mu = MeanDirection(model, z, y);
      const int row = s * per_speaker + t;
      set.x.row(row) = VmfSample(VmfParams(mu, model.Kappa()), 1, rng).row(0);
      std::snprintf(buf, sizeof(buf), "spk%05d_utt%04d", s, t);
      set.ids.emplace_back(buf);
      set.labels.push_back(speaker_id);
    }
  }
  return set;
}

}  // namespace tpsda
