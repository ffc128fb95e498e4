#include "metaqda/calibration.hpp"

#include "metaqda/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace metaqda {

int bin_index(double confidence, int bins) {
  if (bins < 1) throw std::invalid_argument("bin count must be positive");
  const int k = static_cast<int>(std::floor(confidence * bins));
  return std::clamp(k, 0, bins - 1);
}

CalibrationReport ece(std::span<const CalibrationRecord> records, int bins,
                      double temperature_used) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "no calibration records");
  if (bins < 1) throw std::invalid_argument("bin count must be positive");

  CalibrationReport report;
  report.temperature_used = temperature_used;
  report.bins.assign(static_cast<std::size_t>(bins), {});
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(bins), 0.0);
  for (const auto& r : records) {
    const auto b = static_cast<std::size_t>(bin_index(r.confidence, bins));
    ++report.bins[b].count;
    conf_sum[b] += r.confidence;
    hits[b] += r.correct ? 1.0 : 0.0;
  }

  const double n = static_cast<double>(records.size());
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.confidence = conf_sum[b] / count;
    bin.accuracy = hits[b] / count;
    report.ece += (count / n) * std::abs(bin.accuracy - bin.confidence);
  }
  return report;
}

std::vector<CalibrationRecord> records_at(std::span<const ScoredQuery> scored, double temperature) {
  std::vector<CalibrationRecord> out;
  out.reserve(scored.size());
  for (const auto& s : scored) {
    const Prediction p = normalize_scores(s.log_scores, temperature);
    out.push_back({p.confidence(), p.argmax() == s.label});
  }
  return out;
}

const std::vector<double>& temperature_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g(101);
    const double half_span = std::log(20.0);
    for (int i = 0; i <= 100; ++i) g[static_cast<std::size_t>(i)] = std::exp(half_span * (i - 50) / 50.0);
    return g;
  }();
  return grid;
}

double fit_temperature(std::span<const ScoredQuery> scored, int bins) {
  if (scored.empty()) throw Error(ErrorKind::EmptyInput, "no validation queries");
  double best_t = 1.0;
  double best_ece = ece(records_at(scored, 1.0), bins).ece;
  for (double t : temperature_grid()) {
    const double e = ece(records_at(scored, t), bins).ece;
    if (e < best_ece || (e == best_ece && std::abs(std::log(t)) < std::abs(std::log(best_t)))) {
      best_ece = e;
      best_t = t;
    }
  }
  return best_t;
}

double fit_temperature(const NiwPrior& prior, std::span<const Episode> validation, Mode mode,
                       int bins) {
  if (validation.empty()) throw Error(ErrorKind::EmptyInput, "no validation episodes");
  std::vector<ScoredQuery> scored;
  for (const auto& ep : validation) {
    const QdaModel model = QdaModel::fit(prior, ep.support, mode);
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
      scored.push_back({model.predict(ep.query[q]).log_scores, ep.query_labels[q]});
    }
  }
  return fit_temperature(scored, bins);
}

std::string format_report(const CalibrationReport& report) {
  std::string out;
  char line[128];
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    const auto& bin = report.bins[b];
    std::snprintf(line, sizeof(line), "%zu\t%lld\t%.6f\t%.6f\n", b,
                  static_cast<long long>(bin.count), bin.confidence, bin.accuracy);
    out += line;
  }
  return out;
}

}  // namespace metaqda
