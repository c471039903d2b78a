// tests/test_train.cc

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.h"
#include "tpsda/data.h"
#include "tpsda/scoring.h"
#include "tpsda/specfun.h"
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

Eigen::MatrixXd UniformRows(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.Gaussian();
    x.row(i) = v.transpose() / v.norm();
  }
  return x;
}

std::vector<std::vector<int>> EvenPartition(int n, int per) {
  std::vector<std::vector<int>> part;
  for (int i = 0; i < n; i += per) {
    std::vector<int> rows;
    for (int j = i; j < std::min(n, i + per); ++j) rows.push_back(j);
    part.push_back(rows);
  }
  return part;
}

double WfObjectiveOf(const ModelStructure &s, const SufficientStats &stats,
                     const Eigen::VectorXd &w, const Eigen::MatrixXd &f) {
  double acc = 0.0;
  int off = 0;
  for (int i = 0; i < s.NumFactors(); ++i) {
    acc += w(i) * f.middleCols(off, s.dims[i]).cwiseProduct(stats.r[i]).sum();
    off += s.dims[i];
  }
  return acc;
}

}  // namespace

TEST_CASE("e_step closed forms") {
  const ModelStructure s = Structure(6, {3}, 1);
  const TPsdaModel model = MakeRandomModel(s, 12.0, 3);

  // Single speaker, single observation, gamma = 0.
  const Eigen::MatrixXd x = UniformRows(1, 6, 5);
  const SufficientStats stats = EStep(model, x, {{0}});
  const Eigen::VectorXd vtilde =
      12.0 * model.W()(0) * (model.K(0).transpose() * x.row(0).transpose());
  const Eigen::VectorXd zbar = VmfMeanNatural(vtilde);
  CHECK((stats.factor_resultant[0] - zbar).norm() <= 1e-14);
  CHECK((stats.r[0] - x.row(0).transpose() * zbar.transpose()).norm() <=
        1e-14);
  CHECK(stats.total_obs == 1);
  CHECK(stats.num_speakers == 1);
  CHECK(stats.factor_count[0] == 1.0);

  // Antipodal observations: posterior mean zero, nothing accumulates.
  Eigen::MatrixXd anti(2, 6);
  anti.row(0) = x.row(0);
  anti.row(1) = -x.row(0);
  const SufficientStats cancel = EStep(model, anti, {{0, 1}});
  CHECK(cancel.r[0].norm() <= 1e-12);
  CHECK(cancel.factor_resultant[0].norm() <= 1e-12);
}

TEST_CASE("e_step matches two-point enumeration for d_i = 1") {
  // dims = [1, 1], m = 1: posterior means from brute-force enumeration of
  // (z, y_t) in {-1,+1}^{1+T}.
  const ModelStructure s = Structure(4, {1, 1}, 1);
  std::vector<double> gammas = {0.7, 1.3};
  const TPsdaModel model =
      MakeRandomModel(s, 5.0, 17, Eigen::VectorXd(), gammas);
  const Eigen::MatrixXd x = UniformRows(3, 4, 21);

  const SufficientStats stats = EStep(model, x, {{0, 1, 2}});

  // Enumerate the joint: P(z, Y, X) with everything one-dimensional.
  const double kappa = model.Kappa();
  const Eigen::VectorXd k1 = model.K(0).col(0), k2 = model.K(1).col(0);
  const double w1 = model.W()(0), w2 = model.W()(1);
  const double g1 = gammas[0] * model.Prior(0).v(0);
  const double g2 = gammas[1] * model.Prior(1).v(0);
  double norm = 0.0, zbar = 0.0;
  Eigen::VectorXd ybar = Eigen::VectorXd::Zero(3);
  for (int zb = 0; zb < 2; ++zb) {
    const double z = zb ? 1.0 : -1.0;
    for (int yb = 0; yb < 8; ++yb) {
      double logp = g1 * z;
      Eigen::Vector3d y;
      for (int t = 0; t < 3; ++t) {
        y(t) = (yb >> t) & 1 ? 1.0 : -1.0;
        logp += g2 * y(t);
        const Eigen::VectorXd mu = w1 * k1 * z + w2 * k2 * y(t);
        logp += kappa * mu.dot(x.row(t).transpose());
      }
      const double p = std::exp(logp);
      norm += p;
      zbar += z * p;
      for (int t = 0; t < 3; ++t) ybar(t) += y(t) * p;
    }
  }
  zbar /= norm;
  ybar /= norm;
  CHECK(stats.factor_resultant[0](0) == doctest::Approx(zbar).epsilon(1e-10));
  CHECK(stats.factor_resultant[1](0) ==
        doctest::Approx(ybar.sum()).epsilon(1e-10));
}

TEST_CASE("e_step: additivity and thread invariance") {
  const ModelStructure s = Structure(8, {3, 2}, 1);
  const TPsdaModel model = MakeRandomModel(s, 15.0, 29);
  const Eigen::MatrixXd x = UniformRows(60, 8, 33);
  const auto part = EvenPartition(60, 3);  // 20 speakers

  const SufficientStats whole = EStep(model, x, part);
  const std::vector<std::vector<int>> first(part.begin(), part.begin() + 10);
  const std::vector<std::vector<int>> second(part.begin() + 10, part.end());
  const SufficientStats a = EStep(model, x, first);
  const SufficientStats b = EStep(model, x, second);
  for (int i = 0; i < 2; ++i) {
    CHECK((whole.r[i] - a.r[i] - b.r[i]).cwiseAbs().maxCoeff() <=
          1e-12 * whole.r[i].cwiseAbs().maxCoeff());
  }
  CHECK(whole.total_obs == a.total_obs + b.total_obs);

  const SufficientStats threaded = EStep(model, x, part, 4);
  for (int i = 0; i < 2; ++i) {
    CHECK((whole.r[i] - threaded.r[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((whole.factor_resultant[i] - threaded.factor_resultant[i])
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("m_step_priors closed forms") {
  const ModelStructure s = Structure(6, {3}, 1);
  SufficientStats stats;
  stats.r.emplace_back(Eigen::MatrixXd::Zero(6, 3));
  stats.factor_resultant.emplace_back(Eigen::VectorXd::Zero(3));
  stats.factor_count = {4.0};
  stats.total_obs = 4;
  stats.num_speakers = 4;

  // All posterior means aligned: v points that way, gamma > 0.
  Eigen::VectorXd dir(3);
  dir << 0.0, 0.8, 0.6;
  stats.factor_resultant[0] = 4.0 * 0.9 * dir;  // four means of norm 0.9
  auto priors = MStepPriors(s, stats);
  CHECK((priors[0].v - dir).norm() <= 1e-12);
  CHECK(priors[0].gamma > 0.0);

  // Symmetric about the origin: uniform prior.
  stats.factor_resultant[0].setZero();
  priors = MStepPriors(s, stats);
  CHECK(priors[0].gamma == 0.0);
}

TEST_CASE("m_step_wf: Procrustes solution, fixed point, monotone ascent") {
  const ModelStructure s = Structure(7, {3}, 1);
  Rng rng(41);
  SufficientStats stats;
  Eigen::MatrixXd r(7, 3);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = rng.Gaussian();
  }
  stats.r.push_back(r);
  stats.factor_resultant.emplace_back(Eigen::VectorXd::Zero(3));
  stats.factor_count = {1.0};
  stats.total_obs = 10;
  stats.num_speakers = 2;

  Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd f = MakeRandomModel(s, 1.0, 2).F();
  MStepWf(s, stats, &w, &f, 5);

  // n = 1: the polar factor of R, matching the SVD oracle U V'.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::MatrixXd polar =
      svd.matrixU() * svd.matrixV().transpose();
  CHECK((f - polar).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(w(0) == 1.0);

  // Constraints hold tightly.
  CHECK((f.transpose() * f - Eigen::MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);

  // Re-running from the optimum moves nothing.
  Eigen::VectorXd w2 = w;
  Eigen::MatrixXd f2 = f;
  MStepWf(s, stats, &w2, &f2, 3);
  CHECK((f2 - f).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(std::fabs(w2(0) - w(0)) <= 1e-10);

  // Multi-factor random stats: objective nondecreasing round by round.
  const ModelStructure s2 = Structure(9, {3, 2, 2}, 2);
  SufficientStats stats2;
  for (int d : s2.dims) {
    Eigen::MatrixXd ri(9, d);
    for (int i = 0; i < 9; ++i) {
      for (int j = 0; j < d; ++j) ri(i, j) = rng.Gaussian();
    }
    stats2.r.push_back(ri);
    stats2.factor_resultant.emplace_back(Eigen::VectorXd::Zero(d));
  }
  stats2.factor_count = {2.0, 20.0, 20.0};
  stats2.total_obs = 20;
  stats2.num_speakers = 2;

  Eigen::VectorXd w3 = Eigen::VectorXd::Constant(3, 1.0 / std::sqrt(3.0));
  Eigen::MatrixXd f3 = MakeRandomModel(s2, 1.0, 9).F();
  double prev = WfObjectiveOf(s2, stats2, w3, f3);
  for (int round = 0; round < 5; ++round) {
    MStepWf(s2, stats2, &w3, &f3, 1);
    const double now = WfObjectiveOf(s2, stats2, w3, f3);
    CHECK(now >= prev - 1e-10 * std::fabs(prev));
    prev = now;
    CHECK((f3.transpose() * f3 - Eigen::MatrixXd::Identity(7, 7))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    CHECK(std::fabs(w3.norm() - 1.0) <= 1e-12);
  }

  SufficientStats empty = stats2;
  for (auto &ri : empty.r) ri.setZero();
  CHECK_THROWS_AS(MStepWf(s2, empty, &w3, &f3, 1), ValidationError);
}

TEST_CASE("m_step_kappa: stationarity, scale invariance") {
  const ModelStructure s = Structure(12, {4}, 1);
  const TPsdaModel model = MakeRandomModel(s, 20.0, 51);
  const Eigen::MatrixXd x = UniformRows(80, 12, 52);
  const auto part = EvenPartition(80, 8);
  SufficientStats stats = EStep(model, x, part);

  Eigen::VectorXd w = model.W();
  Eigen::MatrixXd f = model.F();
  MStepWf(s, stats, &w, &f, 5);
  const double kappa = MStepKappa(s, stats, w, f, 1e-2, 1e6);

  // Zero derivative of T (nu log k - log I_nu(k)) + k c at the optimum,
  // by central differences.
  const double nu = 0.5 * 12 - 1.0;
  double c = WfObjectiveOf(s, stats, w, f);
  const auto objective = [&](double k) {
    return stats.total_obs * (nu * std::log(k) -
                              LogBesselI(BesselOrder(nu), k)) +
           k * c;
  };
  const double h = 1e-4 * kappa;
  const double deriv =
      (objective(kappa + h) - objective(kappa - h)) / (2.0 * h);
  // Normalize by the curvature scale to get a unitless residual.
  const double curv = std::fabs(objective(kappa + h) + objective(kappa - h) -
                                2.0 * objective(kappa)) /
                      (h * h);
  CHECK(std::fabs(deriv) <= 1e-4 * std::max(1.0, curv * kappa));

  // Doubling T with the same normalized stats leaves kappa unchanged.
  SufficientStats doubled = stats;
  for (auto &ri : doubled.r) ri *= 2.0;
  doubled.total_obs *= 2;
  const double kappa2 = MStepKappa(s, doubled, w, f, 1e-2, 1e6);
  CHECK(kappa2 == doctest::Approx(kappa).epsilon(1e-10));

  // Nonpositive alignment clamps to the bracket low end.
  SufficientStats negated = stats;
  for (auto &ri : negated.r) ri *= -1.0;
  CHECK(MStepKappa(s, negated, w, f, 1e-2, 1e6) == 1e-2);

  // Perfectly aligned stats (c = T) push the optimum through the bracket
  // top; the bracket expands once and the solve stays finite.
  SufficientStats aligned = stats;
  aligned.r[0] = static_cast<double>(stats.total_obs) * f;
  const double huge = MStepKappa(s, aligned, w, f, 1e-2, 1e6);
  CHECK(std::isfinite(huge));
  CHECK(huge >= 0.9e6);
}

TEST_CASE("one EM update never decreases the marginal likelihood") {
  const ModelStructure s = Structure(8, {3, 2}, 1);
  const Eigen::MatrixXd x = UniformRows(60, 8, 61);
  const auto part = EvenPartition(60, 6);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const TPsdaModel start = MakeRandomModel(s, 4.0, seed);
    const double lm0 = LogMarginal(start, x, part);
    SufficientStats stats = EStep(start, x, part);
    Eigen::VectorXd w = start.W();
    Eigen::MatrixXd f = start.F();
    MStepWf(s, stats, &w, &f, 5);
    const double kappa = MStepKappa(s, stats, w, f, 1e-2, 1e6);
    const auto priors = MStepPriors(s, stats);
    const TPsdaModel next(s, kappa, w, f, priors);
    const double lm1 = LogMarginal(next, x, part);
    CHECK(lm1 >= lm0 - 1e-6 * std::fabs(lm0));
  }
}

TEST_CASE("init_model: determinism, invariants, kappa ballpark") {
  const ModelStructure s = Structure(16, {4, 2}, 1);
  const TPsdaModel truth = MakeRandomModel(s, 50.0, 7);
  const EmbeddingSet data = SynthGenerate(truth, 30, 6, 99);
  const auto part = PartitionBySpeaker(data);

  const TPsdaModel a = InitModel(s, data.x, part, 5);
  const TPsdaModel b = InitModel(s, data.x, part, 5);
  CHECK((a.F() - b.F()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.W() - b.W()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.Kappa() == b.Kappa());

  // Within a factor of 10 of the generating kappa.
  CHECK(a.Kappa() >= 5.0);
  CHECK(a.Kappa() <= 500.0);

  // Rank-short speaker-mean matrix still yields a valid orthonormal F.
  const ModelStructure wide = Structure(16, {12, 2}, 1);
  const TPsdaModel c = InitModel(wide, data.x, {part[0], part[1]}, 3);
  CHECK((c.F().transpose() * c.F() -
         Eigen::MatrixXd::Identity(14, 14))
            .cwiseAbs()
            .maxCoeff() <= 1e-10);
}

TEST_CASE("fit: monotone trace, pinned priors, recovery") {
  const ModelStructure s = Structure(16, {4, 2}, 1);
  const TPsdaModel truth = MakeRandomModel(s, 50.0, 71);
  const EmbeddingSet data = SynthGenerate(truth, 100, 8, 72);
  const auto part = PartitionBySpeaker(data);

  EmConfig config;
  config.iterations = 40;
  config.threads = 2;
  const FitResult result = Fit(data.x, part, s, config);

  // Generalized EM: the trace never decreases beyond tolerance.
  for (std::size_t k = 1; k < result.log_marginal_trace.size(); ++k) {
    CHECK(result.log_marginal_trace[k] >=
          result.log_marginal_trace[k - 1] -
              1e-6 * std::fabs(result.log_marginal_trace[k - 1]));
  }

  // gamma stays exactly zero when prior learning is off.
  for (int i = 0; i < s.NumFactors(); ++i) {
    CHECK(result.model.Prior(i).gamma == 0.0);
  }

  // Parameter recovery at unit-test scale.
  CHECK(std::fabs(result.model.Kappa() - 50.0) / 50.0 <= 0.10);
  const auto angles =
      oracle::PrincipalAngles(result.model.K(0), truth.K(0));
  for (double angle : angles) CHECK(angle <= 0.15);

  CHECK_THROWS_AS(Fit(data.x, {part[0]}, s, config), ValidationError);
}

TEST_CASE("trained degenerate model ranks trials like cosine") {
  // n = m = 1, d_1 = D, gamma pinned: whatever kappa and K training finds,
  // the llr of single-embedding trials is a strictly increasing function
  // of the cosine, so the rankings coincide exactly.
  const ModelStructure s = Structure(8, {8}, 1);
  const TPsdaModel truth = MakeRandomModel(s, 20.0, 91);
  const EmbeddingSet data = SynthGenerate(truth, 50, 6, 92);
  EmConfig config;
  config.iterations = 15;
  const FitResult fit = Fit(data.x, PartitionBySpeaker(data), s, config);
  CHECK(DegeneratePsda(fit.model));

  const Eigen::MatrixXd e_rows = UniformRows(200, 8, 93);
  const Eigen::MatrixXd t_rows = UniformRows(200, 8, 94);
  std::vector<std::pair<double, double>> pairs(200);
  for (int i = 0; i < 200; ++i) {
    pairs[i] = {Llr(fit.model, SummarizeSide(fit.model, e_rows.row(i)),
                    SummarizeSide(fit.model, t_rows.row(i))),
                e_rows.row(i).dot(t_rows.row(i))};
  }
  std::vector<int> by_llr(200), by_cos(200);
  std::iota(by_llr.begin(), by_llr.end(), 0);
  by_cos = by_llr;
  std::sort(by_llr.begin(), by_llr.end(), [&](int a, int b) {
    return pairs[a].first < pairs[b].first;
  });
  std::sort(by_cos.begin(), by_cos.end(), [&](int a, int b) {
    return pairs[a].second < pairs[b].second;
  });
  CHECK(by_llr == by_cos);
}

TEST_CASE("fit with learn_priors recovers a concentrated speaker prior") {
  const ModelStructure s = Structure(8, {3}, 1);
  std::vector<double> gammas = {5.0};
  const TPsdaModel truth =
      MakeRandomModel(s, 50.0, 81, Eigen::VectorXd(), gammas);
  const EmbeddingSet data = SynthGenerate(truth, 500, 4, 82);
  const auto part = PartitionBySpeaker(data);

  EmConfig config;
  config.iterations = 60;
  config.learn_priors = true;
  config.threads = 2;
  const FitResult result = Fit(data.x, part, s, config);
  for (std::size_t k = 1; k < result.log_marginal_trace.size(); ++k) {
    CHECK(result.log_marginal_trace[k] >=
          result.log_marginal_trace[k - 1] -
              1e-6 * std::fabs(result.log_marginal_trace[k - 1]));
  }
  CHECK(std::fabs(result.model.Prior(0).gamma - 5.0) / 5.0 <= 0.10);
}
