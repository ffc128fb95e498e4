#pragma once

#include "metaqda/classifier.hpp"
#include "metaqda/episodes.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace metaqda {

enum class LossKind { Generative, Discriminative };
enum class OptimizerKind { Sgd, Momentum, Adam };
enum class Schedule { Constant, Cosine };

LossKind parse_loss_kind(std::string_view text);
OptimizerKind parse_optimizer(std::string_view text);
Schedule parse_schedule(std::string_view text);
const char* to_string(LossKind kind) noexcept;
const char* to_string(OptimizerKind kind) noexcept;

/// Lower bounds enforced after every update: kappa >= eps_kappa,
/// nu >= d - 1 + eps_nu, diag(L) >= eps_l.
struct Constraints {
  double eps_kappa = 1e-3;
  double eps_nu = 1e-3;
  double eps_l = 1e-6;
};

struct TrainerConfig {
  int iterations = 10000;
  double learning_rate = 3e-4;
  OptimizerKind optimizer = OptimizerKind::Adam;
  Schedule schedule = Schedule::Constant;
  int batch_episodes = 1;
  LossKind loss = LossKind::Generative;
  Mode mode = Mode::FullBayes;
  int ways = 5;
  int shots = 1;
  int queries = 15;
  std::uint64_t seed = 0;
  Constraints constraints;
  bool freeze_mean = false;
  unsigned workers = 1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Starting point; default_prior(d) when empty.
  std::optional<NiwPrior> initial_prior;
};

/// Gradient with respect to (m, L, kappa, nu). Only the lower triangle of
/// `chol_scale` is ever nonzero.
struct PriorGradient {
  Vector mean;
  Matrix chol_scale;
  double kappa = 0.0;
  double nu = 0.0;

  static PriorGradient zero(Index dim);
  Index dim() const { return mean.size(); }
  double norm() const;
  /// Layout: m, packed lower triangle of L, kappa, nu.
  Vector flatten() const;
  static PriorGradient unflatten(const Vector& flat, Index dim);
  PriorGradient& operator+=(const PriorGradient& other);
  PriorGradient& operator*=(double factor);
};

struct LossAndGradient {
  double loss = 0.0;
  PriorGradient grad;
};

/// Negative query log-likelihood of an episode under the QDA model the prior
/// induces on the support set. Evaluated through the classifier.
double episode_loss(const NiwPrior& prior, const Episode& episode, Mode mode, LossKind kind);

/// Loss and its exact gradient by reverse-mode chain rule through the
/// conjugate update and the class densities.
LossAndGradient loss_and_grad(const NiwPrior& prior, const Episode& episode, Mode mode,
                              LossKind kind);

PriorGradient grad(const NiwPrior& prior, const Episode& episode, Mode mode, LossKind kind);

/// prior - step * direction, then projection onto the valid NIW set.
NiwPrior apply_update(const NiwPrior& prior, const PriorGradient& direction, double step,
                      const Constraints& constraints = {});

/// Turns raw gradients into update directions (identity for SGD).
class PriorOptimizer {
 public:
  PriorOptimizer(const TrainerConfig& config, Index dim);
  PriorGradient direction(const PriorGradient& gradient);

 private:
  OptimizerKind kind_;
  double momentum_;
  double beta1_;
  double beta2_;
  double epsilon_;
  Index dim_;
  long step_ = 0;
  Vector first_;
  Vector second_;
};

struct TrainingRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double kappa = 0.0;
  double nu = 0.0;
};

/// iteration, loss, grad-norm, kappa, nu separated by tabs.
std::string format_record(const TrainingRecord& record);

struct TrainingResult {
  NiwPrior prior;
  std::vector<TrainingRecord> log;
};

/// Episodic meta-training of the prior. Episode (t, b) of the run draws from
/// derive_rng(seed, (t - 1) * batch + b), so results are independent of
/// `workers`.
TrainingResult meta_train(const FeatureDataset& dataset, const TrainerConfig& config,
                          const std::function<void(const TrainingRecord&)>& on_record = {});

}  // namespace metaqda
