// src/eval.cc

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

#include "tpsda/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace tpsda {

namespace {

struct OperatingPoint {
  double fa;    // false-alarm rate
  double miss;  // miss rate
};

// Operating points for thresholds swept from +inf down through every
// unique score (accept when score >= threshold).  Starts at (fa=0, miss=1)
// and ends at (fa=1, miss=0).
std::vector<OperatingPoint> RocPoints(const std::vector<double> &target,
                                      const std::vector<double> &nontarget) {
  if (target.empty() || nontarget.empty()) {
    throw ValidationError("metrics need at least one target and nontarget");
  }
  std::vector<double> tar = target, non = nontarget;
  std::sort(tar.begin(), tar.end(), std::greater<double>());
  std::sort(non.begin(), non.end(), std::greater<double>());
  const double nt = static_cast<double>(tar.size());
  const double nn = static_cast<double>(non.size());

  std::vector<OperatingPoint> points;
  points.push_back({0.0, 1.0});
  std::size_t it = 0, in = 0;
  while (it < tar.size() || in < non.size()) {
    // Next threshold: the largest remaining score; consume ties together.
    double theta;
    if (it < tar.size() && (in == non.size() || tar[it] >= non[in])) {
      theta = tar[it];
    } else {
      theta = non[in];
    }
    while (it < tar.size() && tar[it] == theta) ++it;
    while (in < non.size() && non[in] == theta) ++in;
    points.push_back({static_cast<double>(in) / nn,
                      1.0 - static_cast<double>(it) / nt});
  }
  return points;
}

}  // namespace

double Eer(const std::vector<double> &target,
           const std::vector<double> &nontarget) {
  const auto points = RocPoints(target, nontarget);
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (points[k].miss > points[k].fa) continue;
    if (points[k].miss == points[k].fa) return points[k].miss;
    const OperatingPoint &a = points[k - 1];
    const OperatingPoint &b = points[k];
    const double denom = (b.fa - a.fa) + (a.miss - b.miss);
    if (denom <= 0.0) return 0.5 * (a.miss + a.fa);  // degenerate step
    const double t = (a.miss - a.fa) / denom;
    return a.fa + t * (b.fa - a.fa);
  }
  return points.back().fa;  // unreachable: the sweep always crosses
}

double MinDcf(const std::vector<double> &target,
              const std::vector<double> &nontarget,
              const DetectionCostParams &params) {
  if (!(params.p_target > 0.0) || !(params.p_target < 1.0)) {
    throw ValidationError("MinDcf: p_target must be in (0, 1)");
  }
  if (!(params.c_miss > 0.0) || !(params.c_fa > 0.0)) {
    throw ValidationError("MinDcf: costs must be positive");
  }
  const double wm = params.p_target * params.c_miss;
  const double wf = (1.0 - params.p_target) * params.c_fa;
  const auto points = RocPoints(target, nontarget);
  double best = std::numeric_limits<double>::infinity();
  for (const auto &p : points) {
    best = std::min(best, wm * p.miss + wf * p.fa);
  }
  return best / std::min(wm, wf);
}

void SplitByKey(const TrialScores &trials, std::vector<double> *target,
                std::vector<double> *nontarget) {
  if (trials.key.size() == 0) {
    throw ValidationError("SplitByKey: trials carry no key labels");
  }
  target->clear();
  nontarget->clear();
  for (int i = 0; i < trials.scores.rows(); ++i) {
    for (int j = 0; j < trials.scores.cols(); ++j) {
      if (!trials.HasTrial(i, j)) continue;
      if (trials.key(i, j) == 1) target->push_back(trials.scores(i, j));
      else if (trials.key(i, j) == 0) nontarget->push_back(trials.scores(i, j));
    }
  }
}

CohortStats ComputeCohortStats(const Eigen::MatrixXd &side_vs_cohort,
                               int top_k) {
  const int sides = static_cast<int>(side_vs_cohort.rows());
  const int cohort = static_cast<int>(side_vs_cohort.cols());
  if (top_k < 1 || top_k > cohort) {
    throw ValidationError("ComputeCohortStats: top_k must be in [1, cohort]");
  }
  CohortStats stats;
  stats.top_k = top_k;
  stats.cohort_size = cohort;
  stats.mean.resize(sides);
  stats.std.resize(sides);
  std::vector<int> order(cohort);
  for (int i = 0; i < sides; ++i) {
    std::iota(order.begin(), order.end(), 0);
    // Highest scores first; equal scores by ascending column index.
    std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                      [&](int a, int b) {
                        const double sa = side_vs_cohort(i, a);
                        const double sb = side_vs_cohort(i, b);
                        return sa != sb ? sa > sb : a < b;
                      });
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < top_k; ++k) {
      const double s = side_vs_cohort(i, order[k]);
      sum += s;
      sq += s * s;
    }
    const double mean = sum / top_k;
    const double var = std::max(0.0, sq / top_k - mean * mean);
    double sd = std::sqrt(var);
    if (sd < 1e-12) {
      sd = 1e-12;
      ++stats.floored;
    }
    stats.mean(i) = mean;
    stats.std(i) = sd;
  }
  return stats;
}

TrialScores AdaptiveSnorm(const TrialScores &raw,
                          const Eigen::MatrixXd &enroll_vs_cohort,
                          const Eigen::MatrixXd &test_vs_cohort, int top_k,
                          int *floored_sides) {
  if (enroll_vs_cohort.rows() != raw.scores.rows() ||
      test_vs_cohort.rows() != raw.scores.cols()) {
    throw ValidationError("AdaptiveSnorm: cohort matrices do not match trials");
  }
  if (enroll_vs_cohort.cols() != test_vs_cohort.cols()) {
    throw ValidationError("AdaptiveSnorm: cohort sizes differ between sides");
  }
  const CohortStats e = ComputeCohortStats(enroll_vs_cohort, top_k);
  const CohortStats t = ComputeCohortStats(test_vs_cohort, top_k);
  if (e.floored + t.floored > 0) {
    Warn("AdaptiveSnorm: " + std::to_string(e.floored + t.floored) +
         " side(s) had zero cohort variance; std floored at 1e-12");
  }
  if (floored_sides) *floored_sides = e.floored + t.floored;

  TrialScores out = raw;
  for (int i = 0; i < out.scores.rows(); ++i) {
    for (int j = 0; j < out.scores.cols(); ++j) {
      if (!out.HasTrial(i, j)) continue;
      const double s = raw.scores(i, j);
      out.scores(i, j) = 0.5 * ((s - e.mean(i)) / e.std(i) +
                                (s - t.mean(j)) / t.std(j));
    }
  }
  return out;
}

std::vector<KeyEntry> LoadTrialKey(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::vector<KeyEntry> key;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    KeyEntry entry;
    std::string label;
    if (!(ls >> entry.enroll >> entry.test >> label) ||
        (label != "target" && label != "nontarget")) {
      throw IoError(path + ":" + std::to_string(line_no) +
                    ": expected `enroll<TAB>test<TAB>target|nontarget`");
    }
    entry.target = (label == "target");
    key.push_back(std::move(entry));
  }
  return key;
}

void ApplyKey(TrialScores *trials, const std::vector<KeyEntry> &key) {
  std::map<std::string, int> enroll_index, test_index;
  for (std::size_t i = 0; i < trials->enroll_ids.size(); ++i) {
    enroll_index[trials->enroll_ids[i]] = static_cast<int>(i);
  }
  for (std::size_t j = 0; j < trials->test_ids.size(); ++j) {
    test_index[trials->test_ids[j]] = static_cast<int>(j);
  }
  trials->key.setConstant(trials->scores.rows(), trials->scores.cols(), -1);
  for (const auto &entry : key) {
    const auto ei = enroll_index.find(entry.enroll);
    const auto tj = test_index.find(entry.test);
    if (ei == enroll_index.end() || tj == test_index.end() ||
        !trials->HasTrial(ei->second, tj->second)) {
      throw ValidationError("ApplyKey: no score for key trial " + entry.enroll +
                            " x " + entry.test);
    }
    trials->key(ei->second, tj->second) = entry.target ? 1 : 0;
  }
}

std::string FormatMetricReport(double eer, double min_dcf,
                               const DetectionCostParams &params,
                               std::size_t n_target, std::size_t n_nontarget) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "eer=%.9g min_dcf=%.9g p_target=%.9g n_target=%zu "
                "n_nontarget=%zu",
                eer, min_dcf, params.p_target, n_target, n_nontarget);
  return std::string(buf);
}

}  // namespace tpsda
