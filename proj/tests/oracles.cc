// tests/oracles.cc

#include "oracles.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpsda {
namespace oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double LogAddExp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

double LogSumExp(const std::vector<double> &v) {
  double acc = -kInf;
  for (double x : v) acc = LogAddExp(acc, x);
  return acc;
}

// VMF log density in the natural parametrization with the normalizer taken
// from the series oracle (shares nothing with src/specfun).
double VmfLogNatural(const Eigen::VectorXd &x, const Eigen::VectorXd &a) {
  const int d = static_cast<int>(a.size());
  const double nu = 0.5 * d - 1.0;
  const double kappa = a.norm();
  const double log_cbar =
      (kappa == 0.0)
          ? nu * M_LN2 + std::lgamma(nu + 1.0)
          : kappa + nu * std::log(kappa) - LogBesselISeries(nu, kappa);
  return log_cbar - 0.5 * d * kLog2Pi + a.dot(x) - kappa;
}

}  // namespace

double LogBesselISeries(double nu, double kappa) {
  if (nu < -0.5 || kappa < 0.0) {
    throw std::invalid_argument("series oracle: bad domain");
  }
  if (kappa == 0.0) {
    if (nu == 0.0) return 0.0;
    return nu > 0.0 ? -kInf : kInf;
  }
  const double log_half_k = std::log(0.5 * kappa);
  double log_term = nu * log_half_k - std::lgamma(nu + 1.0);
  double log_sum = log_term;
  const double q = 0.25 * kappa * kappa;
  for (long k = 0; k < 2000000; ++k) {
    log_term += 2.0 * log_half_k - std::log(double(k + 1)) -
                std::log(double(k + 1) + nu);
    log_sum = LogAddExp(log_sum, log_term);
    if (log_term < log_sum - 45.0 && q < (k + 2.0) * (k + 2.0 + nu)) break;
  }
  return log_sum;
}

double LogBesselIHalfInt(double nu, double kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("half-int oracle: kappa > 0");
  const double pref = 0.5 * std::log(2.0 / (M_PI * kappa));
  if (nu == -0.5) {
    return pref + kappa - M_LN2 + std::log1p(std::exp(-2.0 * kappa));
  }
  if (nu == 0.5) {
    return pref + kappa - M_LN2 + std::log(-std::expm1(-2.0 * kappa));
  }
  if (nu == 1.5) {
    if (kappa >= 1.0) {
      const double em = std::exp(-2.0 * kappa);
      const double bracket = 1.0 - 1.0 / kappa + em * (1.0 + 1.0 / kappa);
      return pref + kappa - M_LN2 + std::log(bracket);
    }
    // cosh k - sinh k / k = sum_{j>=1} k^{2j} (2j) / (2j+1)!
    double term = kappa * kappa / 3.0;  // j = 1: k^2 * 2 / 3!
    double sum = term;
    for (int j = 2; j < 60; ++j) {
      term *= kappa * kappa / ((2.0 * j - 2.0) * (2.0 * j + 1.0));
      sum += term;
      if (term < sum * 1e-18) break;
    }
    return pref + std::log(sum);
  }
  throw std::invalid_argument("half-int oracle: nu must be -1/2, 1/2 or 3/2");
}

double LogMarginalEnum(const TPsdaModel &model, const Eigen::MatrixXd &rows) {
  const int n = model.NumFactors();
  const int m = model.NumSpeakerFactors();
  for (int i = 0; i < n; ++i) {
    if (model.FactorDim(i) != 1) {
      throw std::invalid_argument("enumeration oracle: every d_i must be 1");
    }
  }
  const int t_count = static_cast<int>(rows.rows());
  const int n_channel = n - m;

  std::vector<double> z_terms;
  for (int zbits = 0; zbits < (1 << m); ++zbits) {
    std::vector<Eigen::VectorXd> z(m, Eigen::VectorXd(1));
    double log_pz = 0.0;
    for (int i = 0; i < m; ++i) {
      z[i](0) = (zbits >> i) & 1 ? 1.0 : -1.0;
      Eigen::VectorXd a(1);
      a(0) = model.Prior(i).gamma * model.Prior(i).v(0);
      log_pz += VmfLogNatural(z[i], a);
    }
    double log_obs_total = 0.0;
    for (int t = 0; t < t_count; ++t) {
      std::vector<double> y_terms;
      for (int ybits = 0; ybits < (1 << n_channel); ++ybits) {
        std::vector<Eigen::VectorXd> y(n_channel, Eigen::VectorXd(1));
        double log_py = 0.0;
        for (int i = 0; i < n_channel; ++i) {
          y[i](0) = (ybits >> i) & 1 ? 1.0 : -1.0;
          Eigen::VectorXd a(1);
          a(0) = model.Prior(m + i).gamma * model.Prior(m + i).v(0);
          log_py += VmfLogNatural(y[i], a);
        }
        const Eigen::VectorXd mu = MeanDirection(model, z, y);
        y_terms.push_back(
            log_py + VmfLogNatural(rows.row(t).transpose(),
                                   (model.Kappa() * mu).eval()));
      }
      log_obs_total += LogSumExp(y_terms);
    }
    z_terms.push_back(log_pz + log_obs_total);
  }
  return LogSumExp(z_terms);
}

double LogMarginalCircle(const TPsdaModel &model, const Eigen::MatrixXd &rows,
                         int grid) {
  if (model.NumFactors() != 1 || model.NumSpeakerFactors() != 1 ||
      model.FactorDim(0) != 2) {
    throw std::invalid_argument("circle oracle: model must be n=m=1, d_1=2");
  }
  const Eigen::MatrixXd k_block = model.K(0);
  const double w = model.W()(0);
  const Eigen::VectorXd a_prior = model.Prior(0).gamma * model.Prior(0).v;
  std::vector<double> vals;
  vals.reserve(grid);
  std::vector<Eigen::VectorXd> z_dummy(1), y_dummy;
  for (int j = 0; j < grid; ++j) {
    const double theta = 2.0 * M_PI * j / grid;
    Eigen::VectorXd z(2);
    z << std::cos(theta), std::sin(theta);
    double val = VmfLogNatural(z, a_prior);
    const Eigen::VectorXd mu = w * (k_block * z);
    for (int t = 0; t < rows.rows(); ++t) {
      val += VmfLogNatural(rows.row(t).transpose(),
                           (model.Kappa() * mu).eval());
    }
    vals.push_back(val);
  }
  return LogSumExp(vals) + std::log(2.0 * M_PI / grid);
}

namespace {

struct SweepPoint {
  double fa, miss;
};

std::vector<SweepPoint> SweepPoints(const std::vector<double> &target,
                                    const std::vector<double> &nontarget) {
  std::vector<double> all = target;
  all.insert(all.end(), nontarget.begin(), nontarget.end());
  std::sort(all.begin(), all.end(), std::greater<double>());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<SweepPoint> points;
  points.push_back({0.0, 1.0});
  for (double theta : all) {
    int fa = 0, miss = 0;
    for (double s : nontarget) fa += (s >= theta);
    for (double s : target) miss += (s < theta);
    points.push_back({double(fa) / nontarget.size(),
                      double(miss) / target.size()});
  }
  return points;
}

}  // namespace

double EerSweep(const std::vector<double> &target,
                const std::vector<double> &nontarget) {
  const auto points = SweepPoints(target, nontarget);
  for (std::size_t k = 1; k < points.size(); ++k) {
    if (points[k].miss > points[k].fa) continue;
    if (points[k].miss == points[k].fa) return points[k].miss;
    const auto &a = points[k - 1];
    const auto &b = points[k];
    const double denom = (b.fa - a.fa) + (a.miss - b.miss);
    if (denom <= 0.0) return 0.5 * (a.miss + a.fa);
    const double t = (a.miss - a.fa) / denom;
    return a.fa + t * (b.fa - a.fa);
  }
  return points.back().fa;
}

double MinDcfSweep(const std::vector<double> &target,
                   const std::vector<double> &nontarget, double p_target,
                   double c_miss, double c_fa) {
  const double wm = p_target * c_miss;
  const double wf = (1.0 - p_target) * c_fa;
  const auto points = SweepPoints(target, nontarget);
  double best = kInf;
  for (const auto &p : points) {
    best = std::min(best, wm * p.miss + wf * p.fa);
  }
  return best / std::min(wm, wf);
}

std::vector<double> PrincipalAngles(const Eigen::MatrixXd &a,
                                    const Eigen::MatrixXd &b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  std::vector<double> angles;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::min(1.0, std::max(-1.0, svd.singularValues()(i)));
    angles.push_back(std::acos(c));
  }
  return angles;
}

}  // namespace oracle
}  // namespace tpsda
