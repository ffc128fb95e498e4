#pragma once

#include "metaqda/niw.hpp"

#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace metaqda {

enum class Mode { Map, FullBayes, TiedLda };

const char* to_string(Mode mode) noexcept;
/// Accepts "map", "fb" and "lda"; throws std::invalid_argument otherwise.
Mode parse_mode(std::string_view text);

struct Prediction {
  Vector probs;
  Vector log_scores;

  Index argmax() const;
  double confidence() const { return probs.maxCoeff(); }
};

/// Softmax of log_scores / temperature.
Prediction normalize_scores(Vector log_scores, double temperature = 1.0);

/// Location, scale factor and degrees of freedom of a class's posterior
/// predictive Student-t.
struct PredictiveT {
  Vector loc;
  LowerTriangular chol_scale;
  double dof = 0.0;
};

PredictiveT posterior_predictive(const ClassPosterior& posterior);

/// Quadratic discriminant model built from a prior and per-class support
/// sets. Immutable; add_class returns a new model that shares the untouched
/// class entries with its parent.
class QdaModel {
 public:
  static QdaModel fit(const NiwPrior& prior, std::span<const Samples> support, Mode mode,
                      double temperature = 1.0);
  static QdaModel fit(const NiwPrior& prior, std::span<const int> class_ids,
                      std::span<const Samples> support, Mode mode, double temperature = 1.0);

  QdaModel add_class(const NiwPrior& prior, int class_id, std::span<const Vector> samples) const;
  QdaModel with_temperature(double temperature) const;

  Prediction predict(const Vector& x) const;
  Prediction predict_map(const Vector& x) const;
  Prediction predict_fb(const Vector& x) const;

  Mode mode() const { return mode_; }
  double temperature() const { return temperature_; }
  Index dim() const { return dim_; }
  std::size_t class_count() const { return entries_.size(); }
  int class_id(std::size_t index) const { return entries_[index]->id; }
  const ClassPosterior& posterior(std::size_t index) const { return entries_[index]->posterior; }
  /// Shared covariance of a TiedLda model.
  const GaussianParams& tied() const { return *tied_; }

 private:
  struct Entry {
    int id = 0;
    ClassPosterior posterior;
    GaussianParams map;
    PredictiveT predictive;
    Matrix within_scatter;
  };

  QdaModel(Mode mode, double temperature, Index dim)
      : mode_(mode), temperature_(temperature), dim_(dim) {}

  static std::shared_ptr<const Entry> make_entry(const NiwPrior& prior, int class_id,
                                                 std::span<const Vector> samples, Mode mode);
  void rebuild_tied(const NiwPrior& prior);
  void check_query(const Vector& x) const;

  Mode mode_ = Mode::Map;
  double temperature_ = 1.0;
  Index dim_ = 0;
  std::vector<std::shared_ptr<const Entry>> entries_;
  std::shared_ptr<const GaussianParams> tied_;
};

/// Class probabilities from plain Gaussian parameters (the no-prior QDA baseline).
Prediction predict_gaussians(std::span<const GaussianParams> classes, const Vector& x,
                             double temperature = 1.0);

}  // namespace metaqda
