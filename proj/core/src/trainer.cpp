#include "metaqda/trainer.hpp"

#include "metaqda/error.hpp"
#include "metaqda/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

namespace metaqda {

LossKind parse_loss_kind(std::string_view text) {
  if (text == "generative") return LossKind::Generative;
  if (text == "discriminative") return LossKind::Discriminative;
  throw std::invalid_argument("unknown loss kind '" + std::string(text) + "'");
}

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "momentum") return OptimizerKind::Momentum;
  if (text == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

Schedule parse_schedule(std::string_view text) {
  if (text == "constant") return Schedule::Constant;
  if (text == "cosine") return Schedule::Cosine;
  throw std::invalid_argument("unknown schedule '" + std::string(text) + "'");
}

const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::Generative ? "generative" : "discriminative";
}

const char* to_string(OptimizerKind kind) noexcept {
  switch (kind) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::Adam: return "adam";
  }
  return "unknown";
}

PriorGradient PriorGradient::zero(Index dim) {
  return PriorGradient{Vector::Zero(dim), Matrix::Zero(dim, dim), 0.0, 0.0};
}

double PriorGradient::norm() const { return flatten().norm(); }

Vector PriorGradient::flatten() const {
  const Index d = dim();
  Vector flat(d + LowerTriangular::packed_size(d) + 2);
  flat.head(d) = mean;
  Index k = d;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j <= i; ++j) flat(k++) = chol_scale(i, j);
  }
  flat(k++) = kappa;
  flat(k) = nu;
  return flat;
}

PriorGradient PriorGradient::unflatten(const Vector& flat, Index dim) {
  if (flat.size() != dim + LowerTriangular::packed_size(dim) + 2) {
    throw Error(ErrorKind::DimensionMismatch, "flattened gradient has the wrong length");
  }
  PriorGradient g = zero(dim);
  g.mean = flat.head(dim);
  Index k = dim;
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j <= i; ++j) g.chol_scale(i, j) = flat(k++);
  }
  g.kappa = flat(k++);
  g.nu = flat(k);
  return g;
}

PriorGradient& PriorGradient::operator+=(const PriorGradient& other) {
  mean += other.mean;
  chol_scale += other.chol_scale;
  kappa += other.kappa;
  nu += other.nu;
  return *this;
}

PriorGradient& PriorGradient::operator*=(double factor) {
  mean *= factor;
  chol_scale *= factor;
  kappa *= factor;
  nu *= factor;
  return *this;
}

namespace {

void check_episode(const NiwPrior& prior, const Episode& episode, Mode mode) {
  if (mode == Mode::TiedLda) {
    throw std::invalid_argument("meta-training supports map and fb modes only");
  }
  if (episode.support.empty()) throw Error(ErrorKind::EmptySupport, "episode has no classes");
  if (episode.query.size() != episode.query_labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "query/label count mismatch");
  }
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    const int label = episode.query_labels[q];
    if (label < 0 || label >= static_cast<int>(episode.support.size())) {
      throw Error(ErrorKind::LabelOutOfRange,
                  "query " + std::to_string(q) + " has label " + std::to_string(label));
    }
    if (episode.query[q].size() != prior.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "query dimension differs from prior");
    }
  }
}

// Per-class quantities shared by every query scored against that class.
struct ClassTerms {
  ClassPosterior post;
  Vector offset;  // sample mean minus prior mean
  double count = 0.0;
  Matrix scale_inv;
  double half_logdet = 0.0;
};

// Log-density of one query under one class plus its partials with respect to
// the class posterior (m_j, S_j, kappa_j, nu_j). The S_j partial is split as
// inv_coef * S_j^{-1} + outer_coef * u u^T with u = S_j^{-1} (x - m_j).
struct QueryTerms {
  double logpdf = 0.0;
  Vector u;
  double mean_coef = 0.0;   // d/dm_j = mean_coef * u
  double inv_coef = -0.5;
  double outer_coef = 0.0;
  double d_kappa = 0.0;
  double d_nu = 0.0;
};

QueryTerms query_terms(const ClassTerms& c, const Vector& x, Mode mode) {
  const double d = static_cast<double>(c.post.dim());
  const Vector r = x - c.post.mean;
  QueryTerms t;
  t.u = c.post.chol_scale.solve_product(r);
  const double q0 = r.dot(t.u);
  if (mode == Mode::Map) {
    const double a = c.post.nu + d + 1.0;
    t.logpdf = -0.5 * d * std::log(2.0 * std::numbers::pi) - c.half_logdet +
               0.5 * d * std::log(a) - 0.5 * a * q0;
    t.mean_coef = a;
    t.outer_coef = 0.5 * a;
    t.d_nu = 0.5 * d / a - 0.5 * q0;
    t.d_kappa = 0.0;
  } else {
    // Student-t with scale ((k+1)/(k v)) S_j and v = nu_j - d + 1; the product
    // of the scale factor and v is w = (k+1)/k.
    const double v = c.post.nu - d + 1.0;
    const double w = (c.post.kappa + 1.0) / c.post.kappa;
    const double z = q0 / w;
    const double half_vd = 0.5 * (v + d);
    t.logpdf = log_gamma(half_vd) - log_gamma(0.5 * v) - 0.5 * d * std::log(std::numbers::pi) -
               0.5 * d * std::log(w) - c.half_logdet - half_vd * std::log1p(z);
    t.mean_coef = (v + d) / (w * (1.0 + z));
    t.outer_coef = 0.5 * t.mean_coef;
    t.d_nu = 0.5 * digamma(half_vd) - 0.5 * digamma(0.5 * v) - 0.5 * std::log1p(z);
    const double d_w = -0.5 * d / w + half_vd * z / (w * (1.0 + z));
    t.d_kappa = -d_w / (c.post.kappa * c.post.kappa);
  }
  return t;
}

}  // namespace

double episode_loss(const NiwPrior& prior, const Episode& episode, Mode mode, LossKind kind) {
  check_episode(prior, episode, mode);
  const QdaModel model = QdaModel::fit(prior, episode.support, mode);
  double loss = 0.0;
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    const Prediction p = model.predict(episode.query[q]);
    const Index y = episode.query_labels[q];
    if (kind == LossKind::Generative) {
      loss -= p.log_scores(y);
    } else {
      loss -= p.log_scores(y) -
              log_sum_exp(std::span<const double>(p.log_scores.data(), p.log_scores.size()));
    }
  }
  return loss;
}

LossAndGradient loss_and_grad(const NiwPrior& prior, const Episode& episode, Mode mode,
                              LossKind kind) {
  check_episode(prior, episode, mode);
  const Index d = prior.dim();
  const std::size_t classes = episode.support.size();

  std::vector<ClassTerms> terms(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    ClassTerms& c = terms[j];
    c.post = niw_posterior(prior, episode.support[j]);
    c.count = static_cast<double>(c.post.count);
    Vector xbar = Vector::Zero(d);
    for (const auto& x : episode.support[j]) xbar += x;
    xbar /= c.count;
    c.offset = xbar - prior.mean;
    c.scale_inv = c.post.chol_scale.inverse_product();
    c.half_logdet = c.post.chol_scale.log_det();
  }

  // Adjoints of each class posterior.
  std::vector<Vector> bar_mean(classes, Vector::Zero(d));
  std::vector<Matrix> bar_outer(classes, Matrix::Zero(d, d));
  std::vector<double> bar_inv(classes, 0.0);
  std::vector<double> bar_kappa(classes, 0.0);
  std::vector<double> bar_nu(classes, 0.0);

  auto accumulate = [&](std::size_t j, const QueryTerms& t, double coef) {
    bar_mean[j] += (coef * t.mean_coef) * t.u;
    bar_outer[j].selfadjointView<Eigen::Lower>().rankUpdate(t.u, coef * t.outer_coef);
    bar_inv[j] += coef * t.inv_coef;
    bar_kappa[j] += coef * t.d_kappa;
    bar_nu[j] += coef * t.d_nu;
  };

  double loss = 0.0;
  std::vector<QueryTerms> row(classes);
  std::vector<double> scores(classes);
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    const Vector& x = episode.query[q];
    const auto y = static_cast<std::size_t>(episode.query_labels[q]);
    if (kind == LossKind::Generative) {
      const QueryTerms t = query_terms(terms[y], x, mode);
      loss -= t.logpdf;
      accumulate(y, t, -1.0);
      continue;
    }
    for (std::size_t j = 0; j < classes; ++j) {
      row[j] = query_terms(terms[j], x, mode);
      scores[j] = row[j].logpdf;
    }
    const double norm = log_sum_exp(scores);
    loss -= scores[y] - norm;
    for (std::size_t j = 0; j < classes; ++j) {
      const double coef = std::exp(scores[j] - norm) - (j == y ? 1.0 : 0.0);
      accumulate(j, row[j], coef);
    }
  }

  // Back through the conjugate update to (m, kappa, S, nu), then S = L L^T.
  PriorGradient g = PriorGradient::zero(d);
  Matrix bar_scale = Matrix::Zero(d, d);
  for (std::size_t j = 0; j < classes; ++j) {
    const ClassTerms& c = terms[j];
    const Matrix bar_sj = bar_inv[j] * c.scale_inv +
                          Matrix(bar_outer[j].selfadjointView<Eigen::Lower>());
    const double denom = prior.kappa + c.count;
    const double shrink = prior.kappa * c.count / denom;
    const Vector sym_offset = (bar_sj + bar_sj.transpose()) * c.offset;

    g.mean += (prior.kappa / denom) * bar_mean[j] - shrink * sym_offset;
    g.kappa += bar_kappa[j] + bar_mean[j].dot(-c.offset) * c.count / (denom * denom) +
               c.offset.dot(bar_sj * c.offset) * c.count * c.count / (denom * denom);
    g.nu += bar_nu[j];
    bar_scale += bar_sj;
  }
  g.chol_scale = Matrix((bar_scale + bar_scale.transpose()) * prior.chol_scale.dense())
                     .triangularView<Eigen::Lower>();

  return LossAndGradient{loss, std::move(g)};
}

PriorGradient grad(const NiwPrior& prior, const Episode& episode, Mode mode, LossKind kind) {
  return loss_and_grad(prior, episode, mode, kind).grad;
}

NiwPrior apply_update(const NiwPrior& prior, const PriorGradient& direction, double step,
                      const Constraints& constraints) {
  const Index d = prior.dim();
  if (direction.dim() != d || direction.chol_scale.rows() != d ||
      direction.chol_scale.cols() != d) {
    throw Error(ErrorKind::DimensionMismatch, "gradient shape differs from prior");
  }
  NiwPrior next;
  next.mean = prior.mean - step * direction.mean;
  next.kappa = std::max(prior.kappa - step * direction.kappa, constraints.eps_kappa);
  next.nu = std::max(prior.nu - step * direction.nu,
                     static_cast<double>(d) - 1.0 + constraints.eps_nu);
  Matrix l = prior.chol_scale.dense() - step * direction.chol_scale;
  for (Index i = 0; i < d; ++i) l(i, i) = std::max(l(i, i), constraints.eps_l);
  next.chol_scale = LowerTriangular(l);
  return next;
}

PriorOptimizer::PriorOptimizer(const TrainerConfig& config, Index dim)
    : kind_(config.optimizer),
      momentum_(config.momentum),
      beta1_(config.beta1),
      beta2_(config.beta2),
      epsilon_(config.adam_epsilon),
      dim_(dim) {
  const Index n = dim + LowerTriangular::packed_size(dim) + 2;
  first_ = Vector::Zero(n);
  second_ = Vector::Zero(n);
}

PriorGradient PriorOptimizer::direction(const PriorGradient& gradient) {
  ++step_;
  const Vector g = gradient.flatten();
  switch (kind_) {
    case OptimizerKind::Sgd:
      return gradient;
    case OptimizerKind::Momentum:
      first_ = momentum_ * first_ + g;
      return PriorGradient::unflatten(first_, dim_);
    case OptimizerKind::Adam: {
      first_ = beta1_ * first_ + (1.0 - beta1_) * g;
      second_ = beta2_ * second_ + (1.0 - beta2_) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
      const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
      const Vector dir =
          (first_ / c1).array() / ((second_ / c2).array().sqrt() + epsilon_);
      return PriorGradient::unflatten(dir, dim_);
    }
  }
  return gradient;
}

std::string format_record(const TrainingRecord& record) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d\t%.9g\t%.9g\t%.9g\t%.9g", record.iteration, record.loss,
                record.grad_norm, record.kappa, record.nu);
  return buf;
}

TrainingResult meta_train(const FeatureDataset& dataset, const TrainerConfig& config,
                          const std::function<void(const TrainingRecord&)>& on_record) {
  if (config.iterations < 0 || config.batch_episodes < 1 || config.ways < 1 ||
      config.shots < 1 || config.queries < 1 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("invalid trainer configuration");
  }
  if (dataset.class_count() < config.ways) {
    throw Error(ErrorKind::InsufficientClasses,
                "dataset has " + std::to_string(dataset.class_count()) + " classes, need " +
                    std::to_string(config.ways));
  }
  const auto needed = static_cast<std::size_t>(config.shots + config.queries);
  for (const auto& rows : dataset.class_index) {
    if (rows.size() < needed) {
      throw Error(ErrorKind::InsufficientSamplesPerClass,
                  "a class has " + std::to_string(rows.size()) + " rows, need " +
                      std::to_string(needed));
    }
  }

  const Index d = dataset.dim();
  TrainingResult result;
  result.prior = config.initial_prior.value_or(default_prior(d));
  if (result.prior.dim() != d) {
    throw Error(ErrorKind::DimensionMismatch, "initial prior dimension differs from features");
  }
  PriorOptimizer optimizer(config, d);
  const auto batch = static_cast<std::size_t>(config.batch_episodes);

  for (int t = 1; t <= config.iterations; ++t) {
    const NiwPrior snapshot = result.prior;
    const auto parts = parallel_map(batch, config.workers, [&](std::size_t b) {
      Rng rng = derive_rng(config.seed,
                           static_cast<std::uint64_t>(t - 1) * batch + b);
      const Episode ep = sample_episode(dataset, config.ways, config.shots, config.queries, rng);
      return loss_and_grad(snapshot, ep, config.mode, config.loss);
    });

    PriorGradient total = PriorGradient::zero(d);
    double loss = 0.0;
    for (const auto& part : parts) {
      total += part.grad;
      loss += part.loss;
    }
    total *= 1.0 / static_cast<double>(batch);
    loss /= static_cast<double>(batch);
    if (config.freeze_mean) total.mean.setZero();
    if (!total.flatten().allFinite()) {
      throw std::runtime_error("non-finite gradient at iteration " + std::to_string(t));
    }

    double rate = config.learning_rate;
    if (config.schedule == Schedule::Cosine) {
      rate *= 0.5 * (1.0 + std::cos(std::numbers::pi * (t - 1) / config.iterations));
    }
    result.prior = apply_update(snapshot, optimizer.direction(total), rate, config.constraints);

    TrainingRecord record{t, loss, total.norm(), result.prior.kappa, result.prior.nu};
    result.log.push_back(record);
    if (on_record) on_record(record);
  }
  return result;
}

}  // namespace metaqda
