// tests/test_data.cc

#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.h"
#include "tpsda/data.h"
#include "tpsda/eval.h"
#include "tpsda/scoring.h"
#include "tpsda/train.h"

using namespace tpsda;

namespace {

ModelStructure Structure(int d, std::vector<int> dims, int m) {
  ModelStructure s;
  s.D = d;
  s.dims = std::move(dims);
  s.m = m;
  return s;
}

EmbeddingSet RandomSet(int n, int d, std::uint64_t seed, bool labels) {
  Rng rng(seed);
  EmbeddingSet set;
  set.x.resize(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) set.x(i, j) = rng.Gaussian();
    set.ids.push_back("emb" + std::to_string(i));
    if (labels) set.labels.push_back("spk" + std::to_string(i % 5));
  }
  return set;
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("embedding binary round trip") {
  const EmbeddingSet set = RandomSet(13, 7, 3, true);
  SaveEmbeddings(set, "/tmp/tpsda_emb.tpemb");
  const EmbeddingSet loaded = LoadEmbeddings("/tmp/tpsda_emb.tpemb");
  CHECK(loaded.ids == set.ids);
  CHECK(loaded.labels == set.labels);
  // Storage is 4-byte; after one quantization the file round trip is
  // bit-exact.
  SaveEmbeddings(loaded, "/tmp/tpsda_emb2.tpemb");
  CHECK(Slurp("/tmp/tpsda_emb.tpemb") == Slurp("/tmp/tpsda_emb2.tpemb"));
  const EmbeddingSet again = LoadEmbeddings("/tmp/tpsda_emb2.tpemb");
  CHECK((again.x - loaded.x).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < set.Count(); ++i) {
    for (int j = 0; j < set.Dim(); ++j) {
      CHECK(loaded.x(i, j) ==
            static_cast<double>(static_cast<float>(set.x(i, j))));
    }
  }

  // Empty set is valid.
  EmbeddingSet empty;
  empty.x.resize(0, 0);
  SaveEmbeddings(empty, "/tmp/tpsda_empty.tpemb");
  CHECK(LoadEmbeddings("/tmp/tpsda_empty.tpemb").Count() == 0);

  // Truncation and garbage are detected.
  {
    const std::string all = Slurp("/tmp/tpsda_emb.tpemb");
    std::ofstream os("/tmp/tpsda_trunc.tpemb", std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  CHECK_THROWS_AS(LoadEmbeddings("/tmp/tpsda_trunc.tpemb"), IoError);
  std::ofstream("/tmp/tpsda_garbage.tpemb") << "not an embedding file";
  CHECK_THROWS_AS(LoadEmbeddings("/tmp/tpsda_garbage.tpemb"), IoError);

  // Duplicate ids are rejected.
  EmbeddingSet dup = RandomSet(2, 3, 4, false);
  dup.ids[1] = dup.ids[0];
  CHECK_THROWS_AS(SaveEmbeddings(dup, "/tmp/tpsda_dup.tpemb"),
                  ValidationError);
}

TEST_CASE("embedding text loader and label attachment") {
  {
    std::ofstream os("/tmp/tpsda_text.txt");
    os << "# comment\n";
    os << "a 1.0 0.0 0.0\n";
    os << "b 0.0 1.0 0.0\n";
  }
  EmbeddingSet set = LoadEmbeddingsText("/tmp/tpsda_text.txt");
  CHECK(set.Count() == 2);
  CHECK(set.Dim() == 3);
  CHECK(set.ids[0] == "a");
  CHECK(set.x(1, 1) == 1.0);
  CHECK_FALSE(set.HasLabels());

  {
    std::ofstream os("/tmp/tpsda_labels.txt");
    os << "a\tspk1\nb\tspk2\n";
  }
  AttachLabels(&set, "/tmp/tpsda_labels.txt");
  CHECK(set.labels == std::vector<std::string>{"spk1", "spk2"});

  {
    std::ofstream os("/tmp/tpsda_text_bad.txt");
    os << "a 1.0 2.0\nb 1.0\n";
  }
  CHECK_THROWS_AS(LoadEmbeddingsText("/tmp/tpsda_text_bad.txt"), IoError);
}

TEST_CASE("preprocessor: centering and length normalization") {
  EmbeddingSet set = RandomSet(50, 6, 9, false);
  set.x.array() += 3.0;  // shift well away from the origin

  const Preprocessor prep = FitPreprocessor(set);
  CHECK(prep.projection.size() == 0);
  const EmbeddingSet out = ApplyPreprocessor(prep, set);
  for (int i = 0; i < out.Count(); ++i) {
    CHECK(out.x.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Fitting on already-centered data gives a near-zero mean.
  EmbeddingSet centered = set;
  centered.x.rowwise() -= set.x.colwise().mean();
  CHECK(FitPreprocessor(centered).mean.norm() <= 1e-12);

  // Not idempotent: the second application re-subtracts the mean.
  const EmbeddingSet twice = ApplyPreprocessor(prep, out);
  CHECK((twice.x - out.x).cwiseAbs().maxCoeff() > 1e-3);

  // A row equal to the mean collapses to zero and is reported.
  EmbeddingSet degenerate = set;
  degenerate.x.row(0) = prep.mean.transpose();
  CHECK_THROWS_WITH_AS(ApplyPreprocessor(prep, degenerate),
                       doctest::Contains("emb0"), ValidationError);
}

TEST_CASE("preprocessor: two-cluster LDA finds the separating axis") {
  Rng rng(17);
  EmbeddingSet set;
  set.x.resize(40, 3);
  for (int i = 0; i < 40; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    set.x(i, 0) = sign + 0.01 * rng.Gaussian();
    set.x(i, 1) = 0.5 * rng.Gaussian();
    set.x(i, 2) = 0.5 * rng.Gaussian();
    set.ids.push_back("e" + std::to_string(i));
    set.labels.push_back(sign > 0 ? "pos" : "neg");
  }
  const Preprocessor prep = FitPreprocessor(set, 1);
  REQUIRE(prep.projection.cols() == 1);
  const Eigen::VectorXd axis = prep.projection.col(0).normalized();
  CHECK(std::fabs(axis(0)) >= 0.999);

  // Rank bound: lda_dim <= #classes - 1.
  CHECK_THROWS_AS(FitPreprocessor(set, 2), ValidationError);
  EmbeddingSet unlabeled = set;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(FitPreprocessor(unlabeled, 1), ValidationError);
}

TEST_CASE("preprocessor: 256 -> 100 reduction and serialization") {
  Rng rng(23);
  EmbeddingSet set;
  const int classes = 110, per = 2, d_raw = 256;
  set.x.resize(classes * per, d_raw);
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd center(d_raw);
    for (int j = 0; j < d_raw; ++j) center(j) = rng.Gaussian();
    for (int r = 0; r < per; ++r) {
      for (int j = 0; j < d_raw; ++j) {
        set.x(c * per + r, j) = center(j) + 0.1 * rng.Gaussian();
      }
      set.ids.push_back("e" + std::to_string(c * per + r));
      set.labels.push_back("c" + std::to_string(c));
    }
  }
  const Preprocessor prep = FitPreprocessor(set, 100);
  CHECK(prep.OutputDim() == 100);
  const EmbeddingSet out = ApplyPreprocessor(prep, set);
  CHECK(out.Dim() == 100);
  for (int i = 0; i < 5; ++i) {
    CHECK(out.x.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  SavePreprocessor(prep, "/tmp/tpsda_prep.tpprp");
  const Preprocessor loaded = LoadPreprocessor("/tmp/tpsda_prep.tpprp");
  CHECK((loaded.mean - prep.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.projection - prep.projection).cwiseAbs().maxCoeff() == 0.0);
  SavePreprocessor(loaded, "/tmp/tpsda_prep2.tpprp");
  CHECK(Slurp("/tmp/tpsda_prep.tpprp") == Slurp("/tmp/tpsda_prep2.tpprp"));
}

TEST_CASE("synth_generate: determinism and concentration limit") {
  const ModelStructure s = Structure(8, {3}, 1);
  const TPsdaModel sharp = MakeRandomModel(s, 1e6, 5);
  const EmbeddingSet a = SynthGenerate(sharp, 4, 5, 77);
  const EmbeddingSet b = SynthGenerate(sharp, 4, 5, 77);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.ids == b.ids);
  CHECK(a.labels[0] == a.labels[4]);
  CHECK(a.labels[0] != a.labels[5]);

  // kappa -> infinity with n = m: a speaker's observations nearly coincide.
  for (int spk = 0; spk < 4; ++spk) {
    for (int i = 1; i < 5; ++i) {
      const double cosine =
          a.x.row(5 * spk).dot(a.x.row(5 * spk + i));
      CHECK(cosine > 1.0 - 1e-4);
    }
  }
}

TEST_CASE("synth_generate: within-speaker resultant matches kappa") {
  const ModelStructure s = Structure(10, {4}, 1);
  const double kappa = 35.0;
  const TPsdaModel truth = MakeRandomModel(s, kappa, 55);
  const EmbeddingSet data = SynthGenerate(truth, 150, 20, 56);
  const auto part = PartitionBySpeaker(data);

  double resultant = 0.0;
  long total = 0;
  for (const auto &rows : part) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(10);
    for (int r : rows) sum += data.x.row(r).transpose();
    resultant += sum.norm();
    total += rows.size();
  }
  const double rho = resultant / total;
  const double kappa_hat = VmfKappaFromResultant(10, rho);
  CHECK(std::fabs(kappa_hat - kappa) / kappa <= 0.10);
}

TEST_CASE("near-uniform observations carry no speaker information") {
  // kappa = 1e-3: labels are uninformative, so a trained model scores at
  // chance (EER about 50%).
  const ModelStructure s = Structure(6, {2}, 1);
  const TPsdaModel vague = MakeRandomModel(s, 1e-3, 8);
  const EmbeddingSet data = SynthGenerate(vague, 120, 6, 9);
  const auto part = PartitionBySpeaker(data);

  EmConfig config;
  config.iterations = 10;
  const FitResult fit = Fit(data.x, part, s, config);

  // Trials: same-speaker pairs vs different-speaker pairs.
  std::vector<double> target, nontarget;
  for (int spk = 0; spk < 120; ++spk) {
    const SideSummary e =
        SummarizeSide(fit.model, data.x, {part[spk][0]});
    const SideSummary t_same =
        SummarizeSide(fit.model, data.x, {part[spk][1]});
    const SideSummary t_diff = SummarizeSide(
        fit.model, data.x, {part[(spk + 1) % 120][2]});
    target.push_back(Llr(fit.model, e, t_same));
    nontarget.push_back(Llr(fit.model, e, t_diff));
  }
  const double eer = Eer(target, nontarget);
  CHECK(eer >= 0.45);
  CHECK(eer <= 0.55);
}
