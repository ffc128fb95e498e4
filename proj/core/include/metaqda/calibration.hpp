#pragma once

#include "metaqda/classifier.hpp"
#include "metaqda/episodes.hpp"

#include <span>
#include <string>
#include <vector>

namespace metaqda {

struct CalibrationRecord {
  double confidence = 0.0;
  bool correct = false;
};

struct CalibrationBin {
  Index count = 0;
  double confidence = 0.0;  // mean confidence of the bin, 0 when empty
  double accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  double temperature_used = 1.0;
};

/// Pre-normalization class log-scores of one query and its true class.
struct ScoredQuery {
  Vector log_scores;
  int label = 0;
};

inline constexpr int kDefaultBins = 20;

/// Equal-width bins [k/B, (k+1)/B); confidence 1 lands in the last bin.
int bin_index(double confidence, int bins);

/// Expected calibration error: sum over bins of (n_b / N) |acc(b) - conf(b)|.
CalibrationReport ece(std::span<const CalibrationRecord> records, int bins = kDefaultBins,
                      double temperature_used = 1.0);

/// Confidence and correctness of each query after dividing its log-scores by
/// `temperature`.
std::vector<CalibrationRecord> records_at(std::span<const ScoredQuery> scored, double temperature);

/// 101 log-spaced temperatures over [0.05, 20]; the middle entry is exactly 1.
const std::vector<double>& temperature_grid();

/// Grid temperature minimizing ECE over `scored`; ties go to the temperature
/// closest to 1 in log scale.
double fit_temperature(std::span<const ScoredQuery> scored, int bins = kDefaultBins);

/// Scores every query of every episode with the QDA model the prior induces
/// on that episode's support, then fits the temperature.
double fit_temperature(const NiwPrior& prior, std::span<const Episode> validation, Mode mode,
                       int bins = kDefaultBins);

/// One line per bin: index, count, mean confidence, accuracy (tab separated).
std::string format_report(const CalibrationReport& report);

}  // namespace metaqda
