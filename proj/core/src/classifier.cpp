#include "metaqda/classifier.hpp"

#include "metaqda/error.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace metaqda {

const char* to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::Map: return "map";
    case Mode::FullBayes: return "fb";
    case Mode::TiedLda: return "lda";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "map") return Mode::Map;
  if (text == "fb") return Mode::FullBayes;
  if (text == "lda") return Mode::TiedLda;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

Index Prediction::argmax() const {
  Index best = 0;
  log_scores.maxCoeff(&best);
  return best;
}

Prediction normalize_scores(Vector log_scores, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  Vector scaled = log_scores / temperature;
  if (std::isinf(temperature)) scaled.setZero();
  const double norm = log_sum_exp(std::span<const double>(scaled.data(), scaled.size()));
  Prediction out;
  out.probs = (scaled.array() - norm).exp();
  out.log_scores = std::move(log_scores);
  return out;
}

PredictiveT posterior_predictive(const ClassPosterior& posterior) {
  const double d = static_cast<double>(posterior.dim());
  PredictiveT t;
  t.dof = posterior.nu - d + 1.0;
  const double factor = (posterior.kappa + 1.0) / (posterior.kappa * t.dof);
  t.loc = posterior.mean;
  t.chol_scale = LowerTriangular(std::sqrt(factor) * posterior.chol_scale.dense());
  return t;
}

std::shared_ptr<const QdaModel::Entry> QdaModel::make_entry(const NiwPrior& prior, int class_id,
                                                            std::span<const Vector> samples,
                                                            Mode mode) {
  auto entry = std::make_shared<Entry>();
  entry->id = class_id;
  entry->posterior = niw_posterior(prior, samples);
  switch (mode) {
    case Mode::Map:
      entry->map = map_estimate(entry->posterior);
      break;
    case Mode::FullBayes:
      entry->predictive = posterior_predictive(entry->posterior);
      break;
    case Mode::TiedLda: {
      const Index d = prior.dim();
      Vector xbar = Vector::Zero(d);
      for (const auto& x : samples) xbar += x;
      xbar /= static_cast<double>(samples.size());
      entry->within_scatter = Matrix::Zero(d, d);
      for (const auto& x : samples) {
        const Vector r = x - xbar;
        entry->within_scatter += r * r.transpose();
      }
      break;
    }
  }
  return entry;
}

// Pooled within-class scatter added to S, with nu advanced by the total count.
void QdaModel::rebuild_tied(const NiwPrior& prior) {
  Matrix scale = prior.scale();
  double total = 0.0;
  for (const auto& e : entries_) {
    scale += e->within_scatter;
    total += static_cast<double>(e->posterior.count);
  }
  auto tied = std::make_shared<GaussianParams>();
  tied->sigma = scale / (prior.nu + total + static_cast<double>(dim_) + 1.0);
  tied->chol_sigma = cholesky(tied->sigma);
  tied_ = std::move(tied);
}

QdaModel QdaModel::fit(const NiwPrior& prior, std::span<const Samples> support, Mode mode,
                       double temperature) {
  std::vector<int> ids(support.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return fit(prior, ids, support, mode, temperature);
}

QdaModel QdaModel::fit(const NiwPrior& prior, std::span<const int> class_ids,
                       std::span<const Samples> support, Mode mode, double temperature) {
  if (support.empty()) throw Error(ErrorKind::EmptySupport, "no classes in support set");
  if (class_ids.size() != support.size()) {
    throw std::invalid_argument("class id list does not match support list");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  QdaModel model(mode, temperature, prior.dim());
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (const auto& e : model.entries_) {
      if (e->id == class_ids[i]) {
        throw Error(ErrorKind::DuplicateClass, "class " + std::to_string(class_ids[i]));
      }
    }
    model.entries_.push_back(make_entry(prior, class_ids[i], support[i], mode));
  }
  if (mode == Mode::TiedLda) model.rebuild_tied(prior);
  return model;
}

QdaModel QdaModel::add_class(const NiwPrior& prior, int class_id,
                             std::span<const Vector> samples) const {
  if (prior.dim() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "prior dimension differs from model");
  }
  for (const auto& e : entries_) {
    if (e->id == class_id) throw Error(ErrorKind::DuplicateClass, "class " + std::to_string(class_id));
  }
  QdaModel grown = *this;
  grown.entries_.push_back(make_entry(prior, class_id, samples, mode_));
  if (mode_ == Mode::TiedLda) grown.rebuild_tied(prior);
  return grown;
}

QdaModel QdaModel::with_temperature(double temperature) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  QdaModel copy = *this;
  copy.temperature_ = temperature;
  return copy;
}

void QdaModel::check_query(const Vector& x) const {
  if (x.size() != dim_) {
    throw Error(ErrorKind::DimensionMismatch, "query of dimension " + std::to_string(x.size()) +
                                                  ", model has " + std::to_string(dim_));
  }
}

Prediction QdaModel::predict(const Vector& x) const {
  return mode_ == Mode::FullBayes ? predict_fb(x) : predict_map(x);
}

Prediction QdaModel::predict_map(const Vector& x) const {
  check_query(x);
  Vector scores(static_cast<Index>(entries_.size()));
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    const Entry& e = *entries_[j];
    switch (mode_) {
      case Mode::TiedLda:
        scores(static_cast<Index>(j)) = mvn_logpdf(x, e.posterior.mean, tied_->chol_sigma);
        break;
      case Mode::Map:
        scores(static_cast<Index>(j)) = mvn_logpdf(x, e.map.mu, e.map.chol_sigma);
        break;
      case Mode::FullBayes: {
        const GaussianParams map = map_estimate(e.posterior);
        scores(static_cast<Index>(j)) = mvn_logpdf(x, map.mu, map.chol_sigma);
        break;
      }
    }
  }
  return normalize_scores(std::move(scores), temperature_);
}

Prediction QdaModel::predict_fb(const Vector& x) const {
  check_query(x);
  if (mode_ == Mode::TiedLda) throw std::logic_error("tied-covariance model has no Student-t form");
  Vector scores(static_cast<Index>(entries_.size()));
  for (std::size_t j = 0; j < entries_.size(); ++j) {
    const Entry& e = *entries_[j];
    const PredictiveT t =
        mode_ == Mode::FullBayes ? e.predictive : posterior_predictive(e.posterior);
    scores(static_cast<Index>(j)) = mvt_logpdf(x, t.loc, t.chol_scale, t.dof);
  }
  return normalize_scores(std::move(scores), temperature_);
}

Prediction predict_gaussians(std::span<const GaussianParams> classes, const Vector& x,
                             double temperature) {
  if (classes.empty()) throw Error(ErrorKind::EmptyInput, "no classes to score");
  Vector scores(static_cast<Index>(classes.size()));
  for (std::size_t j = 0; j < classes.size(); ++j) {
    scores(static_cast<Index>(j)) = mvn_logpdf(x, classes[j].mu, classes[j].chol_sigma);
  }
  return normalize_scores(std::move(scores), temperature);
}

}  // namespace metaqda
