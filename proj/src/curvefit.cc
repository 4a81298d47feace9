// Copyright 2026 The ISAR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "isar/curvefit.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "isar/error.h"

namespace isar::curvefit {
namespace {

constexpr double kConditionLimit = 1e-13;

double Sse(std::span<const Point> points, const std::function<double(double)>& f) {
  double s = 0.0;
  for (const auto& [x, y] : points) s += (y - f(x)) * (y - f(x));
  return s;
}

double Sst(std::span<const Point> points) {
  double mean = 0.0;
  for (const auto& p : points) mean += p.second;
  mean /= static_cast<double>(points.size());
  double s = 0.0;
  for (const auto& p : points) s += (p.second - mean) * (p.second - mean);
  return s;
}

// Normal-equation solve with a conditioning check.
Eigen::VectorXd SolveNormal(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ata);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo / hi < kConditionLimit) {
    throw Error(ErrorKind::kNumeric, "normal equations are ill-conditioned");
  }
  return ata.ldlt().solve(a.transpose() * b);
}

std::vector<double> FitPolynomial(std::span<const Point> points, int degree) {
  double mean = 0.0;
  for (const auto& p : points) mean += p.first;
  mean /= static_cast<double>(points.size());
  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, std::abs(p.first - mean));
  const int n = static_cast<int>(points.size());
  Eigen::MatrixXd a(n, degree + 1);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    const double u = (points[i].first - mean) / scale;
    double pw = 1.0;
    for (int k = 0; k <= degree; ++k) {
      a(i, k) = pw;
      pw *= u;
    }
    b(i) = points[i].second;
  }
  const Eigen::VectorXd beta = SolveNormal(a, b);
  // Expand sum_k beta_k ((x - mean) / scale)^k into powers of x.
  std::vector<double> ascending(degree + 1, 0.0);
  for (int k = 0; k <= degree; ++k) {
    const double factor = beta(k) / std::pow(scale, k);
    double binom = 1.0;
    for (int m = 0; m <= k; ++m) {
      // term: C(k, m) x^m (-mean)^(k - m)
      ascending[m] += factor * binom * std::pow(-mean, k - m);
      binom = binom * (k - m) / (m + 1);
    }
  }
  return {ascending.rbegin(), ascending.rend()};
}

double Polynomial(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (double coef : c) v = v * x + coef;
  return v;
}

double PiecewiseValue(const std::vector<double>& p, double x) {
  const double dx = x - p[0];
  return p[1] + (dx < 0 ? p[2] * dx : p[3] * dx);
}

std::vector<double> FitPiecewise(std::span<const Point> points) {
  std::vector<double> xs;
  for (const auto& p : points) xs.push_back(p.first);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  if (xs.size() < 3) {
    throw Error(ErrorKind::kValidation,
                "piecewise fit needs at least three distinct x values");
  }
  const int n = static_cast<int>(points.size());
  std::vector<double> best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (size_t k = 1; k + 1 < xs.size(); ++k) {
    const double bx = xs[k];
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      const double dx = points[i].first - bx;
      a(i, 0) = 1.0;
      a(i, 1) = std::min(dx, 0.0);
      a(i, 2) = std::max(dx, 0.0);
      b(i) = points[i].second;
    }
    const Eigen::VectorXd beta = a.colPivHouseholderQr().solve(b);
    std::vector<double> params = {bx, beta(0), beta(1), beta(2)};
    const double sse =
        Sse(points, [&](double x) { return PiecewiseValue(params, x); });
    if (sse < best_sse) {
      best_sse = sse;
      best = params;
    }
  }
  return best;
}

double Logistic4(const std::vector<double>& p, double x) {
  return p[2] + (p[3] - p[2]) / (1.0 + std::exp(-p[0] * (x - p[1])));
}

double Plateau(const std::vector<double>& p, double x) {
  return p[2] * (1.0 - std::exp(-p[0] * (x - p[1]))) + p[3];
}

// A nonlinear model over internal parameters theta; theta[0] is log(a).
struct NonlinearModel {
  std::function<std::vector<double>(const Eigen::VectorXd&)> to_params;
  std::function<double(const std::vector<double>&, double)> value;
  // Row of d value / d theta at x.
  std::function<void(const Eigen::VectorXd&, double, Eigen::RowVectorXd&)>
      gradient;
};

struct GnOutcome {
  Eigen::VectorXd theta;
  double sse = 0.0;
  bool converged = false;
};

GnOutcome GaussNewton(std::span<const Point> points, const NonlinearModel& m,
                      Eigen::VectorXd theta, const FitOptions& options,
                      double sst) {
  const int n = static_cast<int>(points.size());
  const int p = static_cast<int>(theta.size());
  auto sse_of = [&](const Eigen::VectorXd& t) {
    const std::vector<double> params = m.to_params(t);
    double s = 0.0;
    for (const auto& [x, y] : points) {
      const double r = y - m.value(params, x);
      s += r * r;
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };
  GnOutcome out;
  double sse = sse_of(theta);
  Eigen::MatrixXd jac(n, p);
  Eigen::VectorXd resid(n);
  Eigen::RowVectorXd grad(p);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const std::vector<double> params = m.to_params(theta);
    for (int i = 0; i < n; ++i) {
      m.gradient(theta, points[i].first, grad);
      jac.row(i) = grad;
      resid(i) = points[i].second - m.value(params, points[i].first);
    }
    const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(resid);
    if (!step.allFinite()) break;
    double t = 1.0;
    double next_sse = sse_of(theta + step);
    int halvings = 0;
    while (!(next_sse <= sse) && halvings < 40) {
      t *= 0.5;
      next_sse = sse_of(theta + t * step);
      ++halvings;
    }
    if (!(next_sse <= sse)) {
      // No descent along the Gauss-Newton direction: a stationary point.
      out.converged = true;
      break;
    }
    theta += t * step;
    const double delta = sse - next_sse;
    sse = next_sse;
    if (delta <= options.tolerance * sst) {
      out.converged = true;
      break;
    }
  }
  out.theta = theta;
  out.sse = sse;
  return out;
}

std::vector<double> FitNonlinear(std::span<const Point> points, FitKind kind,
                                 const FitOptions& options, double sst,
                                 std::vector<double>& candidate_sse) {
  double xmin = points[0].first, xmax = points[0].first;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.first);
    xmax = std::max(xmax, p.first);
  }
  const double xr = xmax - xmin;
  const int n = static_cast<int>(points.size());

  NonlinearModel model;
  if (kind == FitKind::kLogistic4) {
    model.to_params = [](const Eigen::VectorXd& t) {
      return std::vector<double>{std::exp(t(0)), t(1), t(2), t(3)};
    };
    model.value = Logistic4;
    model.gradient = [](const Eigen::VectorXd& t, double x,
                        Eigen::RowVectorXd& g) {
      const double a = std::exp(t(0));
      const double s = 1.0 / (1.0 + std::exp(-a * (x - t(1))));
      const double ds = s * (1.0 - s);
      g(0) = (t(3) - t(2)) * ds * (x - t(1)) * a;
      g(1) = -(t(3) - t(2)) * ds * a;
      g(2) = 1.0 - s;
      g(3) = s;
    };
  } else {
    model.to_params = [xmin](const Eigen::VectorXd& t) {
      return std::vector<double>{std::exp(t(0)), xmin, t(1), t(2)};
    };
    model.value = Plateau;
    model.gradient = [xmin](const Eigen::VectorXd& t, double x,
                            Eigen::RowVectorXd& g) {
      const double a = std::exp(t(0));
      const double e = std::exp(-a * (x - xmin));
      g(0) = t(1) * (x - xmin) * e * a;
      g(1) = 1.0 - e;
      g(2) = 1.0;
    };
  }

  // Starting points: random rate (and midpoint), then the linear parameters
  // by least squares given those.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(0.5 / xr), log_hi = std::log(50.0 / xr);
  GnOutcome best;
  best.sse = std::numeric_limits<double>::infinity();
  bool any = false;
  for (int s = 0; s < options.starts; ++s) {
    const double log_a =
        s == 0 ? std::log(5.0 / xr) : log_lo + unit(rng) * (log_hi - log_lo);
    const double a = std::exp(log_a);
    Eigen::MatrixXd lin(n, 2);
    Eigen::VectorXd y(n);
    double mid = xmin + 0.5 * xr;
    if (kind == FitKind::kLogistic4 && s > 0) mid = xmin + unit(rng) * xr;
    for (int i = 0; i < n; ++i) {
      const double x = points[i].first;
      y(i) = points[i].second;
      if (kind == FitKind::kLogistic4) {
        const double sg = 1.0 / (1.0 + std::exp(-a * (x - mid)));
        lin(i, 0) = 1.0 - sg;
        lin(i, 1) = sg;
      } else {
        lin(i, 0) = 1.0 - std::exp(-a * (x - xmin));
        lin(i, 1) = 1.0;
      }
    }
    const Eigen::VectorXd ls = lin.colPivHouseholderQr().solve(y);
    Eigen::VectorXd theta;
    if (kind == FitKind::kLogistic4) {
      theta = Eigen::Vector4d(log_a, mid, ls(0), ls(1));
    } else {
      theta = Eigen::Vector3d(log_a, ls(0), ls(1));
    }
    if (!theta.allFinite()) continue;
    const GnOutcome o = GaussNewton(points, model, theta, options, sst);
    if (!o.converged || !o.theta.allFinite()) continue;
    candidate_sse.push_back(o.sse);
    any = true;
    if (o.sse < best.sse) best = o;
  }
  if (!any) {
    throw Error(ErrorKind::kNumeric,
                std::string("no ") + FitKindName(kind) +
                    " start converged; best residual " +
                    std::to_string(best.sse));
  }
  return model.to_params(best.theta);
}

}  // namespace

const char* FitKindName(FitKind kind) {
  switch (kind) {
    case FitKind::kLinear: return "linear";
    case FitKind::kPiecewiseLinear: return "piecewise_linear";
    case FitKind::kLogistic4: return "logistic4";
    case FitKind::kPlateau: return "plateau";
    case FitKind::kPolynomial: return "polynomial";
  }
  return "unknown";
}

FitKind ParseFitKind(const std::string& name) {
  for (FitKind k : {FitKind::kLinear, FitKind::kPiecewiseLinear,
                    FitKind::kLogistic4, FitKind::kPlateau,
                    FitKind::kPolynomial}) {
    if (name == FitKindName(k)) return k;
  }
  throw Error(ErrorKind::kConfig, "unknown fit kind " + name, "kind");
}

int ParameterCount(FitKind kind, int degree) {
  switch (kind) {
    case FitKind::kLinear: return 2;
    case FitKind::kPolynomial: return degree + 1;
    case FitKind::kPiecewiseLinear:
    case FitKind::kLogistic4:
    case FitKind::kPlateau: return 4;
  }
  return 0;
}

double FitResult::Evaluate(double x) const {
  switch (kind) {
    case FitKind::kLinear:
    case FitKind::kPolynomial: return Polynomial(params, x);
    case FitKind::kPiecewiseLinear: return PiecewiseValue(params, x);
    case FitKind::kLogistic4: return Logistic4(params, x);
    case FitKind::kPlateau: return Plateau(params, x);
  }
  return 0.0;
}

double RSquared(std::span<const Point> points,
                std::span<const double> predictions) {
  if (points.size() != predictions.size() || points.size() < 2) {
    throw Error(ErrorKind::kValidation,
                "r_squared needs >= 2 points and matching predictions");
  }
  const double sst = Sst(points);
  if (sst == 0.0) {
    throw Error(ErrorKind::kMetric, "r_squared undefined for constant values");
  }
  double sse = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    const double r = points[i].second - predictions[i];
    sse += r * r;
  }
  return 1.0 - sse / sst;
}

FitResult FitTrend(std::span<const Point> points, FitKind kind,
                   const FitOptions& options) {
  if (kind == FitKind::kPolynomial && options.degree < 1) {
    throw Error(ErrorKind::kConfig, "polynomial degree must be >= 1", "degree");
  }
  const int p = ParameterCount(kind, options.degree);
  if (static_cast<int>(points.size()) < p + 1) {
    throw Error(ErrorKind::kValidation,
                std::string(FitKindName(kind)) + " fit needs at least " +
                    std::to_string(p + 1) + " points");
  }
  bool varied = false;
  for (const auto& pt : points) {
    if (!std::isfinite(pt.first) || !std::isfinite(pt.second)) {
      throw Error(ErrorKind::kValidation, "non-finite point");
    }
    varied |= pt.first != points[0].first;
  }
  if (!varied) throw Error(ErrorKind::kValidation, "x values are all equal");
  const double sst = Sst(points);
  if (sst == 0.0) {
    throw Error(ErrorKind::kMetric, "trend fit undefined for constant values");
  }

  FitResult result;
  result.kind = kind;
  switch (kind) {
    case FitKind::kLinear: result.params = FitPolynomial(points, 1); break;
    case FitKind::kPolynomial:
      result.params = FitPolynomial(points, options.degree);
      break;
    case FitKind::kPiecewiseLinear: result.params = FitPiecewise(points); break;
    case FitKind::kLogistic4:
    case FitKind::kPlateau:
      if (options.starts < 1 || options.max_iterations < 1) {
        throw Error(ErrorKind::kConfig, "need >= 1 start and iteration");
      }
      result.params =
          FitNonlinear(points, kind, options, sst, result.candidate_sse);
      break;
  }
  for (double v : result.params) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumeric, "non-finite fit parameter");
  }
  std::vector<double> predictions;
  for (const auto& pt : points) predictions.push_back(result.Evaluate(pt.first));
  result.r2 = RSquared(points, predictions);
  result.residual_sse = Sse(points, [&](double x) { return result.Evaluate(x); });
  return result;
}

}  // namespace isar::curvefit
