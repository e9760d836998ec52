#pragma once

#include <optional>
#include <span>
#include <vector>

#include "aad/numerics.hpp"

namespace aad {

// Pearson correlation; 0 when either input is constant.
double pcc(std::span<const double> a, std::span<const double> b);

struct PccTriple {
  double attended = 0.0;
  double unattended1 = 0.0;
  std::optional<double> unattended2;  // absent for two-speaker windows
};

struct WindowDecision {
  bool correct = false;
  bool tie = false;
  std::size_t predicted = 0;  // lowest index among the maxima
};

// Correct iff the attended value strictly exceeds every other candidate.
WindowDecision decide_window(std::span<const double> rhos, std::size_t attended_index);

struct ClassificationScores {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

// Predictions outside [0, n_classes) count as wrong and belong to no class.
ClassificationScores classification_metrics(std::span<const int> predictions, std::span<const int> labels,
                                            int n_classes);

struct TimePccCurve {
  double seg_s = 1.0;
  std::vector<Vector> pcc;  // pcc[candidate][segment]

  std::size_t segments() const { return pcc.empty() ? 0 : pcc.front().size(); }
};

// Non-overlapping segments of seg_s seconds; the incomplete tail is dropped.
TimePccCurve time_pcc_curve(std::span<const double> reconstructed, std::span<const Vector> candidates,
                            double fs, double seg_s);

// Time (s) of the single step from "first ahead" to "second ahead" that best
// explains the moving-average-smoothed difference of two curves.
double detect_crossover(std::span<const double> first, std::span<const double> second, double seg_s,
                        std::size_t smooth = 3);

// Two-sided binomial quantile interval [lo, hi] of the success fraction.
std::pair<double, double> binomial_interval(std::size_t n, double p, double confidence = 0.95);

double mean(std::span<const double> v);
double stddev(std::span<const double> v);

}  // namespace aad
