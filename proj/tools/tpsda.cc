// tools/tpsda.cc

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

// Command-line pipeline: preprocess, train, score, eval, synth.  Batch
// commands only; logs go to standard error, data to files.  Exit codes:
// 0 success, 1 I/O failure, 2 validation failure.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tpsda/data.h"
#include "tpsda/eval.h"
#include "tpsda/model.h"
#include "tpsda/scoring.h"
#include "tpsda/train.h"

namespace {

using namespace tpsda;

std::vector<int> ParseIntList(const std::string &text) {
  std::vector<int> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stoi(item));
  }
  if (values.empty()) {
    throw ValidationError("expected a comma-separated integer list, got '" +
                          text + "'");
  }
  return values;
}

std::vector<double> ParseDoubleList(const std::string &text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  return values;
}

EmbeddingSet LoadAnyEmbeddings(const std::string &path, bool text,
                               const std::string &label_path) {
  EmbeddingSet set = text ? LoadEmbeddingsText(path) : LoadEmbeddings(path);
  if (!label_path.empty()) AttachLabels(&set, label_path);
  return set;
}

// Side list: one side per line, `side_id<TAB>emb_id[<TAB>emb_id...]`.
struct SideList {
  std::vector<std::string> side_ids;
  std::vector<std::vector<int>> rows;
};

SideList LoadSideList(const std::string &path, const EmbeddingSet &set) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::map<std::string, int> row_of;
  for (int i = 0; i < set.Count(); ++i) row_of[set.ids[i]] = i;

  SideList list;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string side_id;
    if (!(ls >> side_id)) continue;
    if (!seen.emplace(side_id, 1).second) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": duplicate side id '" + side_id + "'");
    }
    std::vector<int> rows;
    std::string emb_id;
    while (ls >> emb_id) {
      const auto it = row_of.find(emb_id);
      if (it == row_of.end()) {
        throw ValidationError(path + ":" + std::to_string(line_no) +
                              ": unknown embedding id '" + emb_id + "'");
      }
      rows.push_back(it->second);
    }
    if (rows.empty()) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": side '" + side_id + "' lists no embeddings");
    }
    list.side_ids.push_back(side_id);
    list.rows.push_back(std::move(rows));
  }
  if (list.side_ids.empty()) {
    throw ValidationError(path + ": no sides listed");
  }
  return list;
}

struct PreprocessArgs {
  std::string in, out, out_prep, apply;
  bool text_in = false;
  int lda = 0;
};

int RunPreprocess(const PreprocessArgs &args) {
  const EmbeddingSet set = LoadAnyEmbeddings(args.in, args.text_in, "");
  Preprocessor prep;
  if (!args.apply.empty()) {
    if (args.lda > 0) {
      throw ValidationError("--lda cannot be combined with --apply");
    }
    prep = LoadPreprocessor(args.apply);
  } else {
    EmbeddingSet fit_set = set;
    if (args.lda > 0 && !fit_set.HasLabels()) {
      throw ValidationError("LDA needs a labeled embedding set");
    }
    prep = FitPreprocessor(fit_set, args.lda);
    if (!args.out_prep.empty()) SavePreprocessor(prep, args.out_prep);
  }
  const EmbeddingSet out = ApplyPreprocessor(prep, set);
  SaveEmbeddings(out, args.out);
  std::cerr << "preprocess: " << out.Count() << " embeddings, dim "
            << set.Dim() << " -> " << out.Dim() << "\n";
  return 0;
}

struct TrainArgs {
  std::string in, labels, out, log_path;
  bool text_in = false;
  std::string dims;
  int speaker_factors = 1;
  EmConfig config;
};

int RunTrain(const TrainArgs &args) {
  const EmbeddingSet set = LoadAnyEmbeddings(args.in, args.text_in,
                                             args.labels);
  if (!set.HasLabels()) {
    throw ValidationError("training needs speaker labels "
                          "(binary set with labels, or --labels)");
  }
  ModelStructure structure;
  structure.D = set.Dim();
  structure.dims = ParseIntList(args.dims);
  structure.m = args.speaker_factors;
  ValidateOrThrow(structure);

  const auto partition = PartitionBySpeaker(set);
  std::ofstream log_file;
  std::ostream *log = &std::cerr;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path);
    if (!log_file) throw IoError("cannot open log: " + args.log_path);
    log = &log_file;
  }
  const FitResult result = Fit(set.x, partition, structure, args.config, log);
  SaveModel(result.model, args.out);
  std::cerr << "train: " << result.iterations_run << " iterations, final "
            << "log-marginal " << result.log_marginal_trace.back()
            << ", kappa " << result.model.Kappa() << "\n";
  return 0;
}

struct ScoreArgs {
  std::string model, embeddings, enroll, test, out, binary_out, snorm;
  bool text_in = false;
  bool approx = false;
  int top_k = 400;
  int cohort_size = 0;  // 0 = use the whole cohort set
  std::uint64_t seed = 0;
  int threads = 0;
};

int RunScore(const ScoreArgs &args) {
  const TPsdaModel model = LoadModel(args.model);
  const EmbeddingSet set = LoadAnyEmbeddings(args.embeddings, args.text_in,
                                             "");
  const SideList enroll = LoadSideList(args.enroll, set);
  const SideList test = LoadSideList(args.test, set);

  std::vector<SideSummary> enroll_sides, test_sides;
  enroll_sides.reserve(enroll.rows.size());
  for (const auto &rows : enroll.rows) {
    enroll_sides.push_back(SummarizeSide(model, set.x, rows));
  }
  test_sides.reserve(test.rows.size());
  for (const auto &rows : test.rows) {
    test_sides.push_back(SummarizeSide(model, set.x, rows));
  }

  TrialScores trials =
      ScoreMatrix(model, enroll_sides, test_sides, !args.approx,
                  args.threads);
  trials.enroll_ids = enroll.side_ids;
  trials.test_ids = test.side_ids;

  std::vector<std::string> comments;
  if (!args.snorm.empty()) {
    EmbeddingSet cohort = LoadAnyEmbeddings(args.snorm, args.text_in, "");
    std::vector<int> chosen(cohort.Count());
    for (int i = 0; i < cohort.Count(); ++i) chosen[i] = i;
    if (args.cohort_size > 0 && args.cohort_size < cohort.Count()) {
      // Seeded uniform subsample without replacement (partial shuffle).
      Rng rng(args.seed);
      for (int i = 0; i < args.cohort_size; ++i) {
        const int j =
            i + static_cast<int>(rng.NextU64() % (chosen.size() - i));
        std::swap(chosen[i], chosen[j]);
      }
      chosen.resize(args.cohort_size);
    }
    std::vector<SideSummary> cohort_sides;
    cohort_sides.reserve(chosen.size());
    for (int row : chosen) {
      cohort_sides.push_back(SummarizeSide(model, cohort.x, {row}));
    }
    if (args.top_k < 1 ||
        args.top_k > static_cast<int>(cohort_sides.size())) {
      throw ValidationError("--top-k must be in [1, cohort size]");
    }
    const TrialScores evc = ScoreMatrix(model, enroll_sides, cohort_sides,
                                        !args.approx, args.threads);
    const TrialScores tvc = ScoreMatrix(model, test_sides, cohort_sides,
                                        !args.approx, args.threads);
    int floored = 0;
    trials.scores =
        AdaptiveSnorm(trials, evc.scores, tvc.scores, args.top_k, &floored)
            .scores;
    comments.push_back("snorm cohort_size=" + std::to_string(chosen.size()) +
                       " top_k=" + std::to_string(args.top_k) +
                       " seed=" + std::to_string(args.seed));
    std::cerr << "score: adaptive s-norm over " << chosen.size()
              << " cohort embeddings (top " << args.top_k << ")\n";
  }

  SaveTrialScoresText(trials, args.out, comments);
  if (!args.binary_out.empty()) {
    SaveScoreMatrixBinary(trials.scores, args.binary_out);
  }
  std::cerr << "score: wrote " << trials.scores.rows() << " x "
            << trials.scores.cols() << " trials\n";
  return 0;
}

struct EvalArgs {
  std::string scores, key, out;
  DetectionCostParams params;
};

int RunEval(const EvalArgs &args) {
  TrialScores trials = LoadTrialScoresText(args.scores);
  ApplyKey(&trials, LoadTrialKey(args.key));
  std::vector<double> target, nontarget;
  SplitByKey(trials, &target, &nontarget);
  const double eer = Eer(target, nontarget);
  const double dcf = MinDcf(target, nontarget, args.params);
  const std::string report = FormatMetricReport(eer, dcf, args.params,
                                                target.size(),
                                                nontarget.size());
  std::cout << report << "\n";
  if (!args.out.empty()) {
    std::ofstream os(args.out);
    if (!os) throw IoError("cannot open: " + args.out);
    os << report << "\n";
  }
  return 0;
}

struct SynthArgs {
  std::string model, out, save_model;
  int speakers = 0, per_speaker = 0;
  std::uint64_t seed = 0;
  // Generator-model construction (alternative to --model).
  bool make_model = false;
  int d = 0, speaker_factors = 1;
  std::string dims, gammas, weights;
  double kappa = 0.0;
  std::uint64_t model_seed = 0;
};

int RunSynth(const SynthArgs &args) {
  std::unique_ptr<TPsdaModel> model;
  if (args.make_model) {
    ModelStructure structure;
    structure.D = args.d;
    structure.dims = ParseIntList(args.dims);
    structure.m = args.speaker_factors;
    ValidateOrThrow(structure);
    Eigen::VectorXd w;
    if (!args.weights.empty()) {
      const auto values = ParseDoubleList(args.weights);
      w = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    }
    model = std::make_unique<TPsdaModel>(MakeRandomModel(
        structure, args.kappa, args.model_seed, w,
        args.gammas.empty() ? std::vector<double>{}
                            : ParseDoubleList(args.gammas)));
  } else {
    if (args.model.empty()) {
      throw ValidationError("synth needs --model or --make-model");
    }
    model = std::make_unique<TPsdaModel>(LoadModel(args.model));
  }
  if (!args.save_model.empty()) SaveModel(*model, args.save_model);
  const EmbeddingSet set =
      SynthGenerate(*model, args.speakers, args.per_speaker, args.seed);
  SaveEmbeddings(set, args.out);
  std::cerr << "synth: " << set.Count() << " observations from "
            << args.speakers << " speakers\n";
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Toroidal PSDA back-end: train, score and evaluate "
               "VMF-based speaker verification models"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  CLI::App *cmd_pre =
      app.add_subcommand("preprocess", "Center, optionally reduce with LDA, "
                                       "and length-normalize embeddings");
  cmd_pre->add_option("--in", pre.in, "input embeddings")->required();
  cmd_pre->add_flag("--text-in", pre.text_in, "input is plain text");
  cmd_pre->add_option("--lda", pre.lda, "LDA output dimension");
  cmd_pre->add_option("--apply", pre.apply,
                      "apply a saved preprocessor instead of fitting");
  cmd_pre->add_option("--out-prep", pre.out_prep, "save fitted preprocessor");
  cmd_pre->add_option("--out", pre.out, "output embeddings")->required();

  TrainArgs train;
  CLI::App *cmd_train =
      app.add_subcommand("train", "Fit a model with EM");
  cmd_train->add_option("--in", train.in, "labeled training embeddings")
      ->required();
  cmd_train->add_flag("--text-in", train.text_in, "input is plain text");
  cmd_train->add_option("--labels", train.labels,
                        "id<TAB>speaker file (for text input)");
  cmd_train->add_option("--dims", train.dims,
                        "factor dimensions, e.g. 60,5,5")->required();
  cmd_train->add_option("--speaker-factors", train.speaker_factors,
                        "number of speaker factors m");
  cmd_train->add_flag("--learn-priors", train.config.learn_priors,
                      "fit (v_i, gamma_i) instead of pinning gamma = 0");
  cmd_train->add_option("--iters", train.config.iterations, "EM iterations");
  cmd_train->add_option("--inner-iters", train.config.wf_inner_iterations,
                        "coordinate-ascent rounds per M-step");
  cmd_train->add_option("--tol", train.config.convergence_tol,
                        "relative log-marginal convergence tolerance");
  cmd_train->add_option("--seed", train.config.seed, "initialization seed");
  cmd_train->add_option("--threads", train.config.threads,
                        "worker threads (0 = hardware)");
  cmd_train->add_option("--log", train.log_path,
                        "write per-iteration training log to a file");
  cmd_train->add_option("--out", train.out, "output model")->required();

  ScoreArgs score;
  CLI::App *cmd_score =
      app.add_subcommand("score", "Score enroll x test trials");
  cmd_score->add_option("--model", score.model, "trained model")->required();
  cmd_score->add_option("--embeddings", score.embeddings,
                        "embeddings referenced by the side lists")
      ->required();
  cmd_score->add_flag("--text-in", score.text_in, "embeddings are text");
  cmd_score->add_option("--enroll", score.enroll,
                        "enroll sides: side_id<TAB>emb_id...")->required();
  cmd_score->add_option("--test", score.test, "test sides")->required();
  cmd_score->add_flag("--approx", score.approx,
                      "fast approximate score (uncalibrated)");
  cmd_score->add_option("--snorm", score.snorm,
                        "cohort embeddings for adaptive s-norm");
  cmd_score->add_option("--top-k", score.top_k,
                        "cohort scores per side used for s-norm");
  cmd_score->add_option("--cohort-size", score.cohort_size,
                        "subsample the cohort to this many embeddings");
  cmd_score->add_option("--seed", score.seed, "cohort subsampling seed");
  cmd_score->add_option("--threads", score.threads,
                        "worker threads (0 = hardware)");
  cmd_score->add_option("--out", score.out, "trial scores (text)")
      ->required();
  cmd_score->add_option("--binary-out", score.binary_out,
                        "also write the raw score matrix");

  EvalArgs eval;
  CLI::App *cmd_eval =
      app.add_subcommand("eval", "EER and minimum detection cost");
  cmd_eval->add_option("--scores", eval.scores, "trial scores")->required();
  cmd_eval->add_option("--key", eval.key,
                       "enroll<TAB>test<TAB>target|nontarget")->required();
  cmd_eval->add_option("--p-target", eval.params.p_target,
                       "target prior probability");
  cmd_eval->add_option("--c-miss", eval.params.c_miss, "miss cost");
  cmd_eval->add_option("--c-fa", eval.params.c_fa, "false-alarm cost");
  cmd_eval->add_option("--out", eval.out, "also write the report here");

  SynthArgs synth;
  CLI::App *cmd_synth =
      app.add_subcommand("synth", "Sample a labeled synthetic embedding set");
  cmd_synth->add_option("--model", synth.model, "generator model file");
  cmd_synth->add_flag("--make-model", synth.make_model,
                      "construct a random generator model instead");
  cmd_synth->add_option("--D", synth.d, "embedding dimension (make-model)");
  cmd_synth->add_option("--dims", synth.dims,
                        "factor dimensions (make-model)");
  cmd_synth->add_option("--speaker-factors", synth.speaker_factors,
                        "speaker factor count (make-model)");
  cmd_synth->add_option("--kappa", synth.kappa,
                        "observation concentration (make-model)");
  cmd_synth->add_option("--gammas", synth.gammas,
                        "prior concentrations, e.g. 0,20,20 (make-model)");
  cmd_synth->add_option("--weights", synth.weights,
                        "factor weights (make-model; normalized unit)");
  cmd_synth->add_option("--model-seed", synth.model_seed,
                        "generator construction seed");
  cmd_synth->add_option("--save-model", synth.save_model,
                        "save the generator model");
  cmd_synth->add_option("--speakers", synth.speakers, "speaker count")
      ->required();
  cmd_synth->add_option("--per-speaker", synth.per_speaker,
                        "observations per speaker")->required();
  cmd_synth->add_option("--seed", synth.seed, "sampling seed");
  cmd_synth->add_option("--out", synth.out, "output embeddings")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_pre->parsed()) return RunPreprocess(pre);
    if (cmd_train->parsed()) return RunTrain(train);
    if (cmd_score->parsed()) return RunScore(score);
    if (cmd_eval->parsed()) return RunEval(eval);
    if (cmd_synth->parsed()) return RunSynth(synth);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
