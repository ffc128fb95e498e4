#include "metaqda/evaluation.hpp"

#include "metaqda/error.hpp"
#include "metaqda/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace metaqda {

Method parse_method(std::string_view text) {
  if (text == "map") return Method::Map;
  if (text == "fb") return Method::FullBayes;
  if (text == "lda") return Method::TiedLda;
  if (text == "mle") return Method::MleQda;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

const char* to_string(Method method) noexcept {
  switch (method) {
    case Method::Map: return "map";
    case Method::FullBayes: return "fb";
    case Method::TiedLda: return "lda";
    case Method::MleQda: return "mle";
  }
  return "unknown";
}

Method method_for(Mode mode) noexcept {
  switch (mode) {
    case Mode::Map: return Method::Map;
    case Mode::FullBayes: return Method::FullBayes;
    case Mode::TiedLda: return Method::TiedLda;
  }
  return Method::Map;
}

namespace {

Mode mode_for(Method method) {
  switch (method) {
    case Method::Map: return Mode::Map;
    case Method::FullBayes: return Mode::FullBayes;
    case Method::TiedLda: return Mode::TiedLda;
    case Method::MleQda: break;
  }
  throw std::logic_error("maximum-likelihood QDA has no prior mode");
}

}  // namespace

std::vector<ScoredQuery> score_episode(const NiwPrior& prior, const Episode& episode,
                                       Method method, std::optional<double> ridge) {
  std::vector<ScoredQuery> out;
  out.reserve(episode.query.size());
  if (method == Method::MleQda) {
    const auto classes = mle_qda(episode.support, ridge);
    for (std::size_t q = 0; q < episode.query.size(); ++q) {
      out.push_back({predict_gaussians(classes, episode.query[q]).log_scores,
                     episode.query_labels[q]});
    }
    return out;
  }
  const QdaModel model = QdaModel::fit(prior, episode.support, mode_for(method));
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    out.push_back({model.predict(episode.query[q]).log_scores, episode.query_labels[q]});
  }
  return out;
}

EvalResult summarize(std::vector<double> per_episode_percent) {
  if (per_episode_percent.empty()) throw Error(ErrorKind::EmptyInput, "no episodes evaluated");
  EvalResult r;
  const double e = static_cast<double>(per_episode_percent.size());
  r.episodes = static_cast<int>(per_episode_percent.size());
  r.mean_accuracy =
      std::accumulate(per_episode_percent.begin(), per_episode_percent.end(), 0.0) / e;
  double sq = 0.0;
  for (double a : per_episode_percent) sq += (a - r.mean_accuracy) * (a - r.mean_accuracy);
  r.ci95 = 1.96 * std::sqrt(sq / e) / std::sqrt(e);
  r.per_episode = std::move(per_episode_percent);
  return r;
}

std::string format_accuracy(const EvalResult& result) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "acc %.2f \xC2\xB1 %.2f", result.mean_accuracy, result.ci95);
  return buf;
}

std::vector<Episode> sample_episodes(const FeatureDataset& dataset, int ways, int shots,
                                     int queries, int count, std::uint64_t seed) {
  std::vector<Episode> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(i));
    out.push_back(sample_episode(dataset, ways, shots, queries, rng));
  }
  return out;
}

EvalResult evaluate(const NiwPrior& prior, const FeatureDataset& dataset, const EvalConfig& config) {
  if (config.episodes < 1) throw Error(ErrorKind::EmptyInput, "episode count must be positive");
  struct EpisodeOutcome {
    double accuracy = 0.0;
    std::vector<CalibrationRecord> records;
  };
  const auto outcomes =
      parallel_map(static_cast<std::size_t>(config.episodes), config.workers, [&](std::size_t i) {
        Rng rng = derive_rng(config.seed, i);
        const Episode ep = sample_episode(dataset, config.ways, config.shots, config.queries, rng);
        EpisodeOutcome out;
        out.records = records_at(score_episode(prior, ep, config.method, config.ridge),
                                 config.temperature);
        double hits = 0.0;
        for (const auto& r : out.records) hits += r.correct ? 1.0 : 0.0;
        out.accuracy = 100.0 * hits / static_cast<double>(out.records.size());
        return out;
      });

  std::vector<double> accuracies;
  std::vector<CalibrationRecord> records;
  for (const auto& o : outcomes) {
    accuracies.push_back(o.accuracy);
    records.insert(records.end(), o.records.begin(), o.records.end());
  }
  EvalResult result = summarize(std::move(accuracies));
  result.calibration = ece(records, config.bins, config.temperature);
  return result;
}

IncrementalProtocol make_incremental_protocol(const FeatureDataset& dataset, int base_classes,
                                              int session_ways, int sessions, int shots,
                                              int base_shots, int test_per_class,
                                              std::uint64_t seed) {
  const int total = base_classes + session_ways * sessions;
  if (base_classes < 1 || session_ways < 0 || sessions < 0 || total > dataset.class_count()) {
    throw Error(ErrorKind::InsufficientClasses,
                "protocol needs " + std::to_string(total) + " classes, dataset has " +
                    std::to_string(dataset.class_count()));
  }
  IncrementalProtocol protocol;
  protocol.sessions.resize(static_cast<std::size_t>(sessions));
  for (int c = 0; c < total; ++c) {
    const int k = c < base_classes ? base_shots : shots;
    std::vector<Index> rows = dataset.class_index[static_cast<std::size_t>(c)];
    if (static_cast<int>(rows.size()) <= k) {
      throw Error(ErrorKind::InsufficientSamplesPerClass,
                  "class " + std::to_string(c) + " has no rows left for testing");
    }
    Rng rng = derive_rng(seed, static_cast<std::uint64_t>(c));
    std::shuffle(rows.begin(), rows.end(), rng);

    Samples support;
    for (int i = 0; i < k; ++i) support.push_back(dataset.row(rows[static_cast<std::size_t>(i)]));
    Samples& test = protocol.test_sets[c];
    const std::size_t end = test_per_class > 0
                                ? std::min(rows.size(), static_cast<std::size_t>(k + test_per_class))
                                : rows.size();
    for (std::size_t i = static_cast<std::size_t>(k); i < end; ++i) test.push_back(dataset.row(rows[i]));

    Session& target = c < base_classes
                          ? protocol.base
                          : protocol.sessions[static_cast<std::size_t>((c - base_classes) / session_ways)];
    target.class_ids.push_back(c);
    target.support.push_back(std::move(support));
  }
  return protocol;
}

namespace {

double session_accuracy(const QdaModel& model, const std::map<int, Samples>& test_sets) {
  double hits = 0.0;
  double count = 0.0;
  for (std::size_t j = 0; j < model.class_count(); ++j) {
    const int id = model.class_id(j);
    const auto it = test_sets.find(id);
    if (it == test_sets.end()) continue;
    for (const auto& x : it->second) {
      const Index best = model.predict(x).argmax();
      hits += model.class_id(static_cast<std::size_t>(best)) == id ? 1.0 : 0.0;
      count += 1.0;
    }
  }
  if (count == 0.0) throw Error(ErrorKind::EmptyInput, "session has no test rows");
  return 100.0 * hits / count;
}

}  // namespace

std::vector<SessionResult> evaluate_incremental(const NiwPrior& prior, const IncrementalProtocol& protocol,
                                                Mode mode) {
  QdaModel model = QdaModel::fit(prior, protocol.base.class_ids, protocol.base.support, mode);
  std::vector<SessionResult> results;
  results.push_back({static_cast<int>(model.class_count()), session_accuracy(model, protocol.test_sets)});
  for (const auto& session : protocol.sessions) {
    for (std::size_t i = 0; i < session.class_ids.size(); ++i) {
      model = model.add_class(prior, session.class_ids[i], session.support[i]);
    }
    results.push_back({static_cast<int>(model.class_count()), session_accuracy(model, protocol.test_sets)});
  }
  return results;
}

}  // namespace metaqda
