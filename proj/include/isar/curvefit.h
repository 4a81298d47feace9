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

// Least-squares trend curves for effect scatter plots.
//
// Parameter order per kind:
//   linear            (slope, intercept)
//   polynomial        (c_deg, ..., c_1, c_0), highest power first
//   piecewise_linear  (x_break, y_break, slope_left, slope_right)
//   logistic4         (a, b, c, d):  y = c + (d - c) / (1 + exp(-a (x - b))), a > 0
//   plateau           (a, b0, c, y0): y = c (1 - exp(-a (x - b0))) + y0, a > 0,
//                     with b0 fixed at min(x)

#ifndef ISAR_CURVEFIT_H_
#define ISAR_CURVEFIT_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isar::curvefit {

enum class FitKind { kLinear, kPiecewiseLinear, kLogistic4, kPlateau, kPolynomial };

const char* FitKindName(FitKind kind);
// Throws kConfig on an unknown name.
FitKind ParseFitKind(const std::string& name);

using Point = std::pair<double, double>;

struct FitOptions {
  int degree = 3;  // polynomial only
  int starts = 16;
  uint64_t seed = 1;
  int max_iterations = 200;
  // Gauss-Newton stops once |delta SSE| <= tolerance * SST.
  double tolerance = 1e-10;
};

struct FitResult {
  FitKind kind = FitKind::kLinear;
  std::vector<double> params;
  double r2 = 0.0;
  double residual_sse = 0.0;
  // Final SSE of every converged multi-start candidate.
  std::vector<double> candidate_sse;

  double Evaluate(double x) const;
};

int ParameterCount(FitKind kind, int degree);

FitResult FitTrend(std::span<const Point> points, FitKind kind,
                   const FitOptions& options = {});

// Throws kMetric when the observed values have zero variance.
double RSquared(std::span<const Point> points,
                std::span<const double> predictions);

}  // namespace isar::curvefit

#endif  // ISAR_CURVEFIT_H_
