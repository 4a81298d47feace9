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

#include "isar/eval.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isar/error.h"

namespace isar::eval {
namespace {

// O(P * N) pair enumeration.
double PairCountingAuroc(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0;
  double pairs = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return credit / pairs;
}

struct Case {
  std::vector<double> scores;
  std::vector<int> labels;
};

Case RandomCase(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 60);
  std::uniform_int_distribution<int> coarse(0, 9);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  Case c;
  const int n = size(rng);
  const bool ties = rng() % 2;
  for (int i = 0; i < n; ++i) {
    c.scores.push_back(ties ? coarse(rng) / 10.0 : fine(rng));
    c.labels.push_back(static_cast<int>(rng() % 2));
  }
  c.labels[0] = 0;
  c.labels[1] = 1;
  return c;
}

TEST(Auroc, PerfectRanking) {
  EXPECT_EQ(Auroc(std::vector<double>{0.9, 0.8, 0.2, 0.1},
                  std::vector<int>{1, 1, 0, 0}),
            1.0);
}

TEST(Auroc, AllTiesCountHalf) {
  EXPECT_EQ(Auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5},
                  std::vector<int>{1, 0, 1, 0}),
            0.5);
}

TEST(Auroc, SingleClassIsUndefined) {
  try {
    Auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMetric);
  }
}

TEST(Auroc, MatchesPairCountingExactly) {
  std::mt19937_64 rng(50);
  for (int t = 0; t < 50; ++t) {
    const Case c = RandomCase(rng);
    EXPECT_EQ(Auroc(c.scores, c.labels), PairCountingAuroc(c.scores, c.labels));
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(51);
  for (int t = 0; t < 30; ++t) {
    const Case c = RandomCase(rng);
    std::vector<double> transformed;
    for (double s : c.scores) transformed.push_back(std::exp(3.0 * s) - 7.0);
    EXPECT_EQ(Auroc(c.scores, c.labels), Auroc(transformed, c.labels));
  }
}

TEST(Auroc, NegationComplementsWithoutTies) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s;
    std::vector<int> y = {0, 1};
    for (int i = 0; i < 20; ++i) {
      s.push_back(u(rng));
      if (i >= 2) y.push_back(static_cast<int>(rng() % 2));
    }
    std::vector<double> negated;
    for (double v : s) negated.push_back(-v);
    EXPECT_NEAR(Auroc(negated, y), 1.0 - Auroc(s, y), 1e-15);
  }
}

// Weighted F1 from an explicit confusion matrix.
double OracleWeightedF1(const std::vector<double>& p, const std::vector<int>& y,
                        double threshold) {
  double total = 0.0;
  for (int c = 0; c <= 1; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (size_t i = 0; i < p.size(); ++i) {
      const int pred = p[i] >= threshold ? 1 : 0;
      if (y[i] == c) support += 1;
      if (pred == c && y[i] == c) tp += 1;
      if (pred == c && y[i] != c) fp += 1;
      if (pred != c && y[i] == c) fn += 1;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = precision + recall > 0
                          ? 2 * precision * recall / (precision + recall)
                          : 0.0;
    total += support / p.size() * f1;
  }
  return total;
}

TEST(ClassificationMetrics, PerfectPredictions) {
  const Metrics m = ClassificationMetrics(std::vector<double>{0.9, 0.1, 0.8, 0.3},
                                          std::vector<int>{1, 0, 1, 0});
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1_weighted, 1.0);
  EXPECT_EQ(m.auroc, 1.0);
  EXPECT_EQ(m.n, 4);
}

TEST(ClassificationMetrics, AllPositiveOnBalancedLabels) {
  const Metrics m = ClassificationMetrics(std::vector<double>{0.9, 0.9, 0.9, 0.9},
                                          std::vector<int>{1, 0, 1, 0});
  EXPECT_EQ(m.accuracy, 0.5);
}

TEST(ClassificationMetrics, WeightedF1MatchesConfusionOracle) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p;
    std::vector<int> y;
    const int n = 5 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      p.push_back(u(rng));
      y.push_back(static_cast<int>(rng() % 2));
    }
    const Metrics m = ClassificationMetrics(p, y);
    EXPECT_NEAR(m.f1_weighted, OracleWeightedF1(p, y, 0.5), 1e-12);
    int correct = 0;
    for (int i = 0; i < n; ++i) correct += (p[i] >= 0.5) == (y[i] == 1);
    EXPECT_EQ(m.accuracy, static_cast<double>(correct) / n);
  }
}

TEST(ClassificationMetrics, ThresholdMonotoneInPositives) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u;
  std::vector<double> p(30);
  std::vector<int> y(30);
  for (int i = 0; i < 30; ++i) {
    p[i] = u(rng);
    y[i] = i % 2;
  }
  int previous = 31;
  for (double threshold = 0.0; threshold <= 1.0; threshold += 0.05) {
    int predicted = 0;
    for (double v : p) predicted += v >= threshold;
    EXPECT_LE(predicted, previous);
    previous = predicted;
    const Metrics a = ClassificationMetrics(p, y, threshold);
    const Metrics b = ClassificationMetrics(p, y, threshold);
    EXPECT_EQ(a.f1_weighted, b.f1_weighted);
  }
}

TEST(ClassificationMetrics, Errors) {
  EXPECT_THROW(ClassificationMetrics(std::vector<double>{}, std::vector<int>{}),
               Error);
  EXPECT_THROW(ClassificationMetrics(std::vector<double>{1.5},
                                     std::vector<int>{1}),
               Error);
  const Metrics m = ClassificationMetrics(std::vector<double>{0.2, 0.7},
                                          std::vector<int>{1, 1});
  EXPECT_TRUE(std::isnan(m.auroc));
}

}  // namespace
}  // namespace isar::eval
