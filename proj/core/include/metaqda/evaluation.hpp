#pragma once

#include "metaqda/calibration.hpp"
#include "metaqda/classifier.hpp"
#include "metaqda/episodes.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metaqda {

/// Classifier evaluated on each episode: one of the prior-based QDA modes, or
/// the no-prior maximum-likelihood QDA baseline.
enum class Method { Map, FullBayes, TiedLda, MleQda };

Method parse_method(std::string_view text);
const char* to_string(Method method) noexcept;
Method method_for(Mode mode) noexcept;

/// Log-scores for every query of an episode. The prior is ignored by MleQda.
std::vector<ScoredQuery> score_episode(const NiwPrior& prior, const Episode& episode,
                                       Method method, std::optional<double> ridge = std::nullopt);

struct EvalConfig {
  int ways = 5;
  int shots = 1;
  int queries = 15;
  int episodes = 600;
  Method method = Method::FullBayes;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int bins = kDefaultBins;
  std::optional<double> ridge;
};

struct EvalResult {
  double mean_accuracy = 0.0;  // percent
  double ci95 = 0.0;           // percent, 1.96 * population std / sqrt(E)
  int episodes = 0;
  std::vector<double> per_episode;  // percent
  CalibrationReport calibration;    // pooled over every query
};

/// Mean and 95% interval of per-episode accuracies given in percent.
EvalResult summarize(std::vector<double> per_episode_percent);

/// "acc 72.64 ± 0.62"
std::string format_accuracy(const EvalResult& result);

/// Episode i draws from derive_rng(seed, i).
std::vector<Episode> sample_episodes(const FeatureDataset& dataset, int ways, int shots,
                                     int queries, int count, std::uint64_t seed);

EvalResult evaluate(const NiwPrior& prior, const FeatureDataset& dataset, const EvalConfig& config);

/// A batch of classes joining the model together.
struct Session {
  std::vector<int> class_ids;
  std::vector<Samples> support;
};

struct IncrementalProtocol {
  Session base;
  std::vector<Session> sessions;
  std::map<int, Samples> test_sets;
};

/// Classes [0, base_classes) form the base session; each later session adds
/// the next `session_ways` classes. Each class contributes `shots` support
/// rows (`base_shots` for base classes) and at most `test_per_class` of its
/// remaining rows as test data.
IncrementalProtocol make_incremental_protocol(const FeatureDataset& dataset, int base_classes,
                                              int session_ways, int sessions, int shots,
                                              int base_shots, int test_per_class,
                                              std::uint64_t seed);

struct SessionResult {
  int ways = 0;
  double accuracy = 0.0;  // percent
};

/// Grows one model with add_class across sessions; session s is scored on the
/// test rows of every class seen through s.
std::vector<SessionResult> evaluate_incremental(const NiwPrior& prior, const IncrementalProtocol& protocol,
                                                Mode mode);

}  // namespace metaqda
