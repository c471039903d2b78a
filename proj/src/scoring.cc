// src/scoring.cc

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

#include "tpsda/scoring.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "binio.h"
#include "parallel.h"
#include "tpsda/specfun.h"

namespace tpsda {

namespace {

constexpr char kScoreMagic[] = "TPSC01";

// g(x) = log Cbar_nu(x) - x; strictly decreasing in x, finite at x = 0.
double ScoreTerm(double nu, double x) { return LogCbar(BesselOrder(nu), x) - x; }

void CheckSummary(const TPsdaModel &model, const SideSummary &side,
                  const char *what) {
  if (side.count < 1 || side.sum.size() != model.Dim() ||
      static_cast<int>(side.projected.size()) != model.NumSpeakerFactors()) {
    throw ValidationError(std::string(what) +
                          ": summary does not match the model");
  }
}

}  // namespace

SideSummary SummarizeSide(const TPsdaModel &model,
                          const Eigen::MatrixXd &rows) {
  if (rows.rows() < 1) throw ValidationError("SummarizeSide: empty side");
  if (rows.cols() != model.Dim()) {
    throw ValidationError("SummarizeSide: dimension mismatch");
  }
  for (int r = 0; r < rows.rows(); ++r) {
    if (std::fabs(rows.row(r).norm() - 1.0) > 1e-6) {
      throw ValidationError("SummarizeSide: row " + std::to_string(r) +
                            " is not unit-norm");
    }
  }
  SideSummary side;
  side.sum = rows.colwise().sum().transpose();
  side.count = static_cast<int>(rows.rows());
  side.projected.reserve(model.NumSpeakerFactors());
  for (int i = 0; i < model.NumSpeakerFactors(); ++i) {
    side.projected.push_back(model.K(i).transpose() * side.sum);
  }
  return side;
}

SideSummary SummarizeSide(const TPsdaModel &model, const Eigen::MatrixXd &x,
                          const std::vector<int> &rows) {
  if (rows.empty()) throw ValidationError("SummarizeSide: empty side");
  Eigen::MatrixXd sub(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) sub.row(k) = x.row(rows[k]);
  return SummarizeSide(model, sub);
}

double Llr(const TPsdaModel &model, const SideSummary &enroll,
           const SideSummary &test) {
  CheckSummary(model, enroll, "Llr(enroll)");
  CheckSummary(model, test, "Llr(test)");
  const double kappa = model.Kappa();
  double score = 0.0;
  for (int i = 0; i < model.NumSpeakerFactors(); ++i) {
    const FactorPrior &prior = model.Prior(i);
    const double nu = 0.5 * model.FactorDim(i) - 1.0;
    const double kw = kappa * model.W()(i);
    const Eigen::VectorXd prior_part = prior.gamma * prior.v;
    const Eigen::VectorXd left = prior_part + kw * enroll.projected[i];
    const Eigen::VectorXd right = prior_part + kw * test.projected[i];
    const Eigen::VectorXd both =
        prior_part + kw * (enroll.projected[i] + test.projected[i]);
    score += ScoreTerm(nu, left.norm()) + ScoreTerm(nu, right.norm()) -
             ScoreTerm(nu, both.norm()) - ScoreTerm(nu, prior.gamma);
  }
  return score;
}

double LlrApprox(const TPsdaModel &model, const SideSummary &enroll,
                 const SideSummary &test) {
  CheckSummary(model, enroll, "LlrApprox(enroll)");
  CheckSummary(model, test, "LlrApprox(test)");
  double acc = 0.0;
  for (int i = 0; i < model.NumSpeakerFactors(); ++i) {
    acc += std::fabs(model.W()(i)) *
           ((enroll.projected[i] + test.projected[i]).norm() -
            enroll.projected[i].norm() - test.projected[i].norm());
  }
  return model.Kappa() * acc;
}

TrialScores ScoreMatrix(const TPsdaModel &model,
                        const std::vector<SideSummary> &enroll_sides,
                        const std::vector<SideSummary> &test_sides,
                        bool exact, int threads) {
  const int ne = static_cast<int>(enroll_sides.size());
  const int nt = static_cast<int>(test_sides.size());
  TrialScores trials;
  trials.scores.resize(ne, nt);
  ParallelChunks(ne, 8, threads, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      for (int j = 0; j < nt; ++j) {
        trials.scores(i, j) =
            exact ? Llr(model, enroll_sides[i], test_sides[j])
                  : LlrApprox(model, enroll_sides[i], test_sides[j]);
      }
    }
  });
  return trials;
}

void SaveTrialScoresText(const TrialScores &trials, const std::string &path,
                         const std::vector<std::string> &comments) {
  if (static_cast<int>(trials.enroll_ids.size()) != trials.scores.rows() ||
      static_cast<int>(trials.test_ids.size()) != trials.scores.cols()) {
    throw ValidationError("SaveTrialScoresText: ids do not match the matrix");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto &c : comments) os << "# " << c << "\n";
  char buf[48];
  for (int i = 0; i < trials.scores.rows(); ++i) {
    for (int j = 0; j < trials.scores.cols(); ++j) {
      if (!trials.HasTrial(i, j)) continue;
      std::snprintf(buf, sizeof(buf), "%.9g", trials.scores(i, j));
      os << trials.enroll_ids[i] << '\t' << trials.test_ids[j] << '\t' << buf
         << '\n';
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

TrialScores LoadTrialScoresText(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<std::tuple<std::string, std::string, double>> entries;
  std::map<std::string, int> enroll_index, test_index;
  std::vector<std::string> enroll_ids, test_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string e, t;
    double score;
    if (!(ls >> e >> t >> score)) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": malformed score line");
    }
    if (enroll_index.emplace(e, enroll_ids.size()).second) {
      enroll_ids.push_back(e);
    }
    if (test_index.emplace(t, test_ids.size()).second) test_ids.push_back(t);
    entries.emplace_back(e, t, score);
  }
  TrialScores trials;
  trials.enroll_ids = std::move(enroll_ids);
  trials.test_ids = std::move(test_ids);
  const int ne = static_cast<int>(trials.enroll_ids.size());
  const int nt = static_cast<int>(trials.test_ids.size());
  trials.scores = Eigen::MatrixXd::Zero(ne, nt);
  trials.mask.setZero(ne, nt);
  for (const auto &[e, t, score] : entries) {
    const int i = enroll_index[e], j = test_index[t];
    trials.scores(i, j) = score;
    trials.mask(i, j) = 1;
  }
  return trials;
}

void SaveScoreMatrixBinary(const Eigen::MatrixXd &scores,
                           const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << kScoreMagic;
  binio::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(scores.rows()));
  binio::WriteLe<std::uint32_t>(os, static_cast<std::uint32_t>(scores.cols()));
  for (int i = 0; i < scores.rows(); ++i) {
    for (int j = 0; j < scores.cols(); ++j) binio::WriteF64(os, scores(i, j));
  }
  if (!os) throw IoError("write failed: " + path);
}

Eigen::MatrixXd LoadScoreMatrixBinary(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[6];
  binio::ReadBytes(is, magic, 6);
  if (std::string(magic, 6) != kScoreMagic) {
    throw IoError("bad score-matrix magic in " + path);
  }
  const auto rows = binio::ReadLe<std::uint32_t>(is);
  const auto cols = binio::ReadLe<std::uint32_t>(is);
  Eigen::MatrixXd scores(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) scores(i, j) = binio::ReadF64(is);
  }
  return scores;
}

}  // namespace tpsda
