// src/vmf.cc

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

#include "tpsda/vmf.h"

#include <cmath>

#include "tpsda/specfun.h"

namespace tpsda {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kUnitTol = 1e-6;

Eigen::VectorXd CanonicalE1(int dim) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
  e(0) = 1.0;
  return e;
}

double LogDensityNatural(int dim, double dot, double kappa) {
  const BesselOrder nu(0.5 * dim - 1.0);
  return LogCbar(nu, kappa) - 0.5 * dim * kLog2Pi + dot - kappa;
}

}  // namespace

VmfParams::VmfParams(Eigen::VectorXd mu_in, double kappa_in)
    : mu(std::move(mu_in)), kappa(kappa_in) {
  if (mu.size() < 1) throw ValidationError("VmfParams: empty mean direction");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
    throw ValidationError("VmfParams: kappa must be finite and >= 0");
  }
  const double norm = mu.norm();
  if (std::fabs(norm - 1.0) > 1e-9) {
    throw ValidationError("VmfParams: |mu| = " + std::to_string(norm) +
                          ", expected 1 within 1e-9");
  }
}

VmfParams VmfParams::FromNatural(const Eigen::VectorXd &a) {
  const double kappa = a.norm();
  if (kappa <= 0.0) {
    VmfParams p(CanonicalE1(static_cast<int>(a.size())), 0.0);
    p.mu_arbitrary = true;
    return p;
  }
  return VmfParams(a / kappa, kappa);
}

double VmfLogPdf(const Eigen::VectorXd &x, const VmfParams &params) {
  const int d = params.Dim();
  if (d < 2) {
    throw ValidationError("VmfLogPdf: d >= 2 required (use VmfLogPmfS0)");
  }
  if (x.size() != d) throw ValidationError("VmfLogPdf: dimension mismatch");
  if (std::fabs(x.norm() - 1.0) > kUnitTol) {
    throw ValidationError("VmfLogPdf: |x| != 1 beyond tolerance");
  }
  return LogDensityNatural(d, params.kappa * params.mu.dot(x), params.kappa);
}

double VmfLogPdfNatural(const Eigen::VectorXd &x, const Eigen::VectorXd &a) {
  if (x.size() != a.size()) {
    throw ValidationError("VmfLogPdfNatural: dimension mismatch");
  }
  return LogDensityNatural(static_cast<int>(a.size()), a.dot(x), a.norm());
}

double VmfLogPmfS0(double x, const VmfParams &params) {
  if (params.Dim() != 1) throw ValidationError("VmfLogPmfS0: d must be 1");
  if (x != 1.0 && x != -1.0) {
    throw ValidationError("VmfLogPmfS0: x must be +1 or -1");
  }
  const double k = params.kappa;
  // log(2 cosh k) without overflow.
  const double log2cosh = k + std::log1p(std::exp(-2.0 * k));
  return k * params.mu(0) * x - log2cosh;
}

Eigen::VectorXd VmfMean(const VmfParams &params) {
  const int d = params.Dim();
  if (d == 1) return std::tanh(params.kappa) * params.mu;
  const double a = BesselRatio(BesselOrder(0.5 * d - 1.0), params.kappa);
  return a * params.mu;
}

Eigen::VectorXd VmfMeanNatural(const Eigen::VectorXd &a) {
  const int d = static_cast<int>(a.size());
  if (d == 1) {
    Eigen::VectorXd m(1);
    m(0) = std::tanh(a(0));
    return m;
  }
  const double kappa = a.norm();
  if (kappa < 1e-300) return Eigen::VectorXd::Zero(d);
  const double r = BesselRatio(BesselOrder(0.5 * d - 1.0), kappa);
  return (r / kappa) * a;
}

double VmfKappaFromResultant(int dim, double rho, bool *capped) {
  if (capped) *capped = false;
  if (dim < 1) throw ValidationError("VmfKappaFromResultant: dim >= 1");
  if (!(rho >= 0.0) || rho > 1.0 + 1e-9) {
    throw ValidationError("VmfKappaFromResultant: rho must be in [0, 1]");
  }
  if (rho <= 1e-12) return 0.0;
  if (rho >= 1.0 - 1e-12) {
    if (capped) *capped = true;
    return kVmfKappaMax;
  }
  if (dim == 1) return std::atanh(rho);

  const BesselOrder nu(0.5 * dim - 1.0);
  // Banerjee et al. initializer.
  double kappa = rho * (dim - rho * rho) / (1.0 - rho * rho);
  kappa = std::min(std::max(kappa, 1e-12), kVmfKappaMax);

  double lo = 0.0, hi = kappa;
  while (BesselRatio(nu, hi) < rho) {
    lo = hi;
    hi *= 2.0;
    if (hi >= kVmfKappaMax) {
      if (BesselRatio(nu, kVmfKappaMax) < rho) {
        if (capped) *capped = true;
        return kVmfKappaMax;
      }
      hi = kVmfKappaMax;
      break;
    }
  }

  for (int iter = 0; iter < 200; ++iter) {
    const double a = BesselRatio(nu, kappa);
    const double f = a - rho;
    if (std::fabs(f) <= 1e-10) return kappa;
    if (f < 0.0) lo = kappa;
    else hi = kappa;
    const double deriv = BesselRatioDerivative(nu, kappa);
    double next = kappa - f / deriv;
    if (!std::isfinite(next) || next <= lo || next >= hi) {
      next = 0.5 * (lo + hi);
    }
    if (next == kappa) break;
    kappa = next;
  }
  return kappa;
}

VmfParams VmfFitMl(const Eigen::MatrixXd &vectors,
                   const Eigen::VectorXd &weights) {
  const int n = static_cast<int>(vectors.rows());
  const int d = static_cast<int>(vectors.cols());
  if (n < 1) throw ValidationError("VmfFitMl: empty input");
  if (weights.size() != n) {
    throw ValidationError("VmfFitMl: weight count mismatch");
  }
  if ((weights.array() < 0.0).any()) {
    throw ValidationError("VmfFitMl: negative weight");
  }
  const double wsum = weights.sum();
  if (wsum <= 0.0) throw ValidationError("VmfFitMl: all weights zero");

  const Eigen::VectorXd rbar = (vectors.transpose() * weights) / wsum;
  const double rho = std::min(rbar.norm(), 1.0);
  if (rho <= 1e-12) {
    VmfParams p(CanonicalE1(d), 0.0);
    p.mu_arbitrary = true;
    return p;
  }
  bool capped = false;
  const double kappa = VmfKappaFromResultant(d, rho, &capped);
  VmfParams p((rbar / rbar.norm()).eval(), kappa);
  p.kappa_capped = capped;
  return p;
}

VmfParams VmfFitMl(const Eigen::MatrixXd &vectors) {
  return VmfFitMl(vectors, Eigen::VectorXd::Ones(vectors.rows()));
}

Eigen::MatrixXd VmfSample(const VmfParams &params, int count, Rng &rng) {
  if (count < 0) throw ValidationError("VmfSample: count must be >= 0");
  const int d = params.Dim();
  Eigen::MatrixXd out(count, d);
  if (count == 0) return out;

  if (d == 1) {
    // P(x = mu) = e^kappa / (2 cosh kappa) = sigmoid(2 kappa).
    const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * params.kappa));
    for (int i = 0; i < count; ++i) {
      out(i, 0) = (rng.Uniform() <= p_plus) ? params.mu(0) : -params.mu(0);
    }
    return out;
  }

  if (params.kappa == 0.0) {
    for (int i = 0; i < count; ++i) {
      Eigen::VectorXd g(d);
      double norm;
      do {
        for (int j = 0; j < d; ++j) g(j) = rng.Gaussian();
        norm = g.norm();
      } while (norm < 1e-12);
      out.row(i) = g.transpose() / norm;
    }
    return out;
  }

  // Wood's rejection sampler for the cosine coordinate t = mu'x.
  const double kappa = params.kappa;
  const double dm1 = d - 1.0;
  const double b = dm1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa +
                                                  dm1 * dm1));
  const double x0 = (1.0 - b) / (1.0 + b);
  // log(1 - x0^2) = log(4b) - 2 log(1+b), stable for large kappa.
  const double c =
      kappa * x0 + dm1 * (std::log(4.0 * b) - 2.0 * std::log1p(b));
  const double beta_shape = 0.5 * dm1;

  for (int i = 0; i < count; ++i) {
    double t;
    for (;;) {
      const double z = rng.Beta(beta_shape, beta_shape);
      const double u = rng.Uniform();
      t = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      if (kappa * t + dm1 * std::log(1.0 - x0 * t) - c >= std::log(u)) break;
    }
    // Uniform tangent direction orthogonal to mu.
    Eigen::VectorXd v(d);
    double norm;
    do {
      for (int j = 0; j < d; ++j) v(j) = rng.Gaussian();
      v -= v.dot(params.mu) * params.mu;
      norm = v.norm();
    } while (norm < 1e-12);
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    out.row(i) = (t * params.mu + (s / norm) * v).transpose();
  }
  return out;
}

Eigen::MatrixXd VmfSample(const VmfParams &params, int count,
                          std::uint64_t seed) {
  Rng rng(seed);
  return VmfSample(params, count, rng);
}

}  // namespace tpsda
