// metaqda: meta-train, evaluate and calibrate Bayesian QDA priors on fixed
// feature files.

#include "metaqda/calibration.hpp"
#include "metaqda/error.hpp"
#include "metaqda/evaluation.hpp"
#include "metaqda/io.hpp"
#include "metaqda/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace metaqda;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainArgs {
  std::string features;
  std::string out;
  std::string log;
  int ways = 5;
  int shots = 1;
  int queries = 15;
  int iters = 10000;
  double lr = 3e-4;
  std::string optimizer = "adam";
  std::string schedule = "constant";
  int batch = 1;
  std::string loss = "generative";
  std::string mode = "fb";
  std::uint64_t seed = 0;
  unsigned workers = 1;
  double eps_kappa = 1e-3;
  double eps_nu = 1e-3;
  double eps_l = 1e-6;
  bool freeze_mean = false;
  bool normalize = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string features;
  std::string prior;
  std::string mode;
  int ways = 5;
  int shots = 5;
  int queries = 15;
  int episodes = 600;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int bins = kDefaultBins;
  std::optional<double> ridge;
};

struct IncrementalArgs {
  std::string features;
  std::string prior;
  std::string mode;
  int base_classes = 60;
  int session_ways = 5;
  int sessions = 8;
  int shots = 5;
  int base_shots = 5;
  int test_per_class = 0;
  std::uint64_t seed = 0;
};

struct CalibrateArgs {
  std::string features;
  std::string prior;
  std::string mode;
  std::string report;
  std::string test_features;
  int ways = 5;
  int shots = 5;
  int queries = 15;
  int episodes = 200;
  int test_episodes = 600;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  int bins = kDefaultBins;
  std::optional<double> ridge;
};

struct SynthArgs {
  long d = 16;
  long classes = 40;
  long per_class = 200;
  double nu_offset = 6.0;
  double kappa = kBenchmarkKappa;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

std::string check_mode_name(const std::string& mode, bool allow_mle) {
  if (mode == "map" || mode == "fb" || mode == "lda" || (allow_mle && mode == "mle")) return {};
  return "must be one of map, fb, lda" + std::string(allow_mle ? ", mle" : "");
}

// Loads the prior (if any) and the features, applying the checkpoint's
// normalization to the features.
struct Loaded {
  std::optional<PriorCheckpoint> checkpoint;
  FeatureDataset dataset;
};

Loaded load_inputs(const std::string& features, const std::string& prior_path, bool prior_required) {
  Loaded in;
  if (!prior_path.empty()) {
    in.checkpoint = load_checkpoint(prior_path);
  } else if (prior_required) {
    throw UsageError("--prior is required for this mode");
  }
  in.dataset = read_feature_file(features);
  if (in.checkpoint && in.checkpoint->prior.dim() != in.dataset.dim()) {
    throw Error(ErrorKind::DimensionMismatch,
                "prior has d=" + std::to_string(in.checkpoint->prior.dim()) + ", features have d=" +
                    std::to_string(in.dataset.dim()));
  }
  if (in.checkpoint && in.checkpoint->normalized) {
    const Vector mean = in.checkpoint->norm_mean.value_or(Vector::Zero(in.dataset.dim()));
    in.dataset = normalize_cl2n(in.dataset, mean);
  }
  return in;
}

Method resolve_method(const std::string& flag, const std::optional<PriorCheckpoint>& ckpt) {
  if (!flag.empty()) return parse_method(flag);
  return ckpt ? method_for(ckpt->mode) : Method::FullBayes;
}

int run_train(const TrainArgs& a) {
  FeatureDataset data = read_feature_file(a.features);
  PriorCheckpoint ckpt;
  if (a.normalize) {
    ckpt.norm_mean = feature_mean(data);
    data = normalize_cl2n(data, *ckpt.norm_mean);
  }
  TrainerConfig cfg;
  cfg.iterations = a.iters;
  cfg.learning_rate = a.lr;
  cfg.optimizer = parse_optimizer(a.optimizer);
  cfg.schedule = parse_schedule(a.schedule);
  cfg.batch_episodes = a.batch;
  cfg.loss = parse_loss_kind(a.loss);
  cfg.mode = parse_mode(a.mode);
  cfg.ways = a.ways;
  cfg.shots = a.shots;
  cfg.queries = a.queries;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  cfg.constraints = {a.eps_kappa, a.eps_nu, a.eps_l};
  cfg.freeze_mean = a.freeze_mean;

  const std::string log_path = a.log.empty() ? a.out + ".log" : a.log;
  std::ofstream log(log_path);
  if (!log) throw Error(ErrorKind::Io, "cannot open log '" + log_path + "'");
  log << "iteration\tloss\tgrad_norm\tkappa\tnu\n";
  const int report_every = std::max(1, a.iters / 20);
  const TrainingResult result = meta_train(data, cfg, [&](const TrainingRecord& r) {
    log << format_record(r) << '\n';
    if (!a.quiet && (r.iteration % report_every == 0 || r.iteration == a.iters)) {
      std::cout << format_record(r) << '\n';
    }
  });

  ckpt.prior = result.prior;
  ckpt.mode = cfg.mode;
  ckpt.normalized = a.normalize;
  save_checkpoint(ckpt, a.out);
  std::cout << "wrote " << a.out << " (kappa " << result.prior.kappa << ", nu " << result.prior.nu
            << "), log " << log_path << '\n';
  return 0;
}

int run_eval(const EvalArgs& a) {
  const bool mle = a.mode == "mle";
  const Loaded in = load_inputs(a.features, a.prior, !mle);
  EvalConfig cfg;
  cfg.ways = a.ways;
  cfg.shots = a.shots;
  cfg.queries = a.queries;
  cfg.episodes = a.episodes;
  cfg.method = resolve_method(a.mode, in.checkpoint);
  cfg.temperature = a.temperature;
  cfg.seed = a.seed;
  cfg.workers = a.workers;
  cfg.bins = a.bins;
  cfg.ridge = a.ridge;
  const NiwPrior prior = in.checkpoint ? in.checkpoint->prior : default_prior(in.dataset.dim());
  const EvalResult r = evaluate(prior, in.dataset, cfg);
  std::cout << format_accuracy(r) << '\n';
  std::printf("ece %.4f (bins %d, temperature %g, episodes %d, method %s)\n", r.calibration.ece,
              a.bins, a.temperature, r.episodes, to_string(cfg.method));
  return 0;
}

int run_incremental(const IncrementalArgs& a) {
  const Loaded in = load_inputs(a.features, a.prior, true);
  const Mode mode = a.mode.empty() ? in.checkpoint->mode : parse_mode(a.mode);
  const IncrementalProtocol protocol =
      make_incremental_protocol(in.dataset, a.base_classes, a.session_ways, a.sessions, a.shots,
                                a.base_shots, a.test_per_class, a.seed);
  const auto results = evaluate_incremental(in.checkpoint->prior, protocol, mode);
  for (std::size_t s = 0; s < results.size(); ++s) {
    std::printf("session %zu\tways %d\tacc %.2f\n", s, results[s].ways, results[s].accuracy);
  }
  return 0;
}

int run_calibrate(const CalibrateArgs& a) {
  const bool mle = a.mode == "mle";
  const Loaded in = load_inputs(a.features, a.prior, !mle);
  const Method method = resolve_method(a.mode, in.checkpoint);
  const NiwPrior prior = in.checkpoint ? in.checkpoint->prior : default_prior(in.dataset.dim());

  const auto episodes = sample_episodes(in.dataset, a.ways, a.shots, a.queries, a.episodes, a.seed);
  std::vector<ScoredQuery> scored;
  for (const auto& ep : episodes) {
    auto s = score_episode(prior, ep, method, a.ridge);
    scored.insert(scored.end(), s.begin(), s.end());
  }
  const double t = fit_temperature(scored, a.bins);
  const CalibrationReport before = ece(records_at(scored, 1.0), a.bins, 1.0);
  const CalibrationReport after = ece(records_at(scored, t), a.bins, t);
  std::printf("temperature %.6g\nvalidation ece %.4f -> %.4f\n", t, before.ece, after.ece);

  if (!a.report.empty()) {
    std::ofstream out(a.report);
    if (!out) throw Error(ErrorKind::Io, "cannot open report '" + a.report + "'");
    out << "bin\tcount\tconfidence\taccuracy\n" << format_report(after);
  }
  if (!a.test_features.empty()) {
    Loaded test = load_inputs(a.test_features, a.prior, !mle);
    EvalConfig cfg;
    cfg.ways = a.ways;
    cfg.shots = a.shots;
    cfg.queries = a.queries;
    cfg.episodes = a.test_episodes;
    cfg.method = method;
    cfg.seed = a.seed + 1;
    cfg.workers = a.workers;
    cfg.bins = a.bins;
    cfg.ridge = a.ridge;
    const EvalResult raw = evaluate(prior, test.dataset, cfg);
    cfg.temperature = t;
    const EvalResult scaled = evaluate(prior, test.dataset, cfg);
    std::printf("test %s\ntest ece %.4f -> %.4f\n", format_accuracy(raw).c_str(), raw.calibration.ece,
                scaled.calibration.ece);
  }
  return 0;
}

int run_synth(const SynthArgs& a) {
  SyntheticTaskSpec spec = make_benchmark_spec(a.d, a.classes, a.nu_offset, a.kappa, a.seed);
  spec.noise = a.noise;
  Rng rng = derive_rng(a.seed, 1);
  const FeatureDataset data = generate_synthetic(spec, a.classes, a.per_class, rng);
  write_feature_file(data, a.out);
  std::cout << "wrote " << a.out << ": " << data.size() << " rows, d=" << data.dim() << ", "
            << data.class_count() << " classes\n";
  return 0;
}

int run_inspect(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  char magic[4] = {};
  probe.read(magic, 4);
  if (probe.gcount() == 4 && std::memcmp(magic, "MQDF", 4) == 0) {
    const FeatureDataset data = read_feature_file(path);
    std::size_t smallest = data.size() > 0 ? static_cast<std::size_t>(data.size()) : 0;
    std::size_t largest = 0;
    for (const auto& rows : data.class_index) {
      smallest = std::min(smallest, rows.size());
      largest = std::max(largest, rows.size());
    }
    std::printf("MQDF v%d: n=%lld d=%lld classes=%d rows/class=[%zu, %zu]\n",
                static_cast<int>(kFeatureFormatVersion), static_cast<long long>(data.size()),
                static_cast<long long>(data.dim()), data.class_count(), smallest, largest);
    std::printf("ok\n");
    return 0;
  }
  const PriorCheckpoint ckpt = load_checkpoint(path);
  const NiwPrior& p = ckpt.prior;
  std::printf("checkpoint v%d: d=%lld mode=%s normalized=%d\n", kCheckpointVersion,
              static_cast<long long>(p.dim()), to_string(ckpt.mode), ckpt.normalized ? 1 : 0);
  std::printf("kappa %.6g\nnu %.6g\n|m| %.6g\ntrace(S) %.6g\n", p.kappa, p.nu, p.mean.norm(),
              p.scale().trace());
  std::printf("ok\n");
  return 0;
}

// CLI11 reads config files only at the top level, so a subcommand's --config
// file is expanded into flags placed ahead of the command-line ones.
std::vector<std::string> with_config_args(CLI::App& app, std::vector<std::string> args) {
  auto sub_it = std::find_if(args.begin(), args.end(),
                             [&](const std::string& a) { return app.get_subcommand_no_throw(a) != nullptr; });
  if (sub_it == args.end()) return {args.rbegin(), args.rend()};
  CLI::App* sub = app.get_subcommand_no_throw(*sub_it);
  std::optional<std::string> path;
  for (auto it = sub_it + 1; it != args.end(); ++it) {
    if (*it == "--config" && it + 1 != args.end()) path = *(it + 1);
    if (it->rfind("--config=", 0) == 0) path = it->substr(9);
  }
  if (path) {
    std::vector<std::string> extra;
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(*path)) {
      if (item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name())) continue;
      const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
      if (opt != nullptr && opt->get_expected_min() == 0) {
        const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
        if (v == "true" || v == "1" || v == "on" || v == "yes") extra.push_back("--" + item.name);
        continue;
      }
      extra.push_back("--" + item.name);
      extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
    }
    args.insert(sub_it + 1, extra.begin(), extra.end());
  }
  return {args.rbegin(), args.rend()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian QDA with meta-learned Normal-Inverse-Wishart priors", "metaqda"};
  app.require_subcommand(1);
  // repeated flags keep the last value, so the command line overrides config entries
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("meta-train", "Meta-learn a prior from a feature file");
  cmd_train->add_option("--config", config_path, "Key-value config file; flags take precedence");
  cmd_train->add_option("--features", train.features, "Training MQDF file")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--out", train.out, "Output checkpoint path")->required();
  cmd_train->add_option("--log", train.log, "Training log path (default <out>.log)");
  cmd_train->add_option("--ways", train.ways)->check(CLI::PositiveNumber);
  cmd_train->add_option("--shots", train.shots)->check(CLI::PositiveNumber);
  cmd_train->add_option("--queries", train.queries)->check(CLI::PositiveNumber);
  cmd_train->add_option("--iters", train.iters)->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--lr", train.lr)->check(CLI::PositiveNumber);
  cmd_train->add_option("--optimizer", train.optimizer)->check(CLI::IsMember({"sgd", "momentum", "adam"}));
  cmd_train->add_option("--schedule", train.schedule)->check(CLI::IsMember({"constant", "cosine"}));
  cmd_train->add_option("--batch", train.batch, "Episodes per update")->check(CLI::PositiveNumber);
  cmd_train->add_option("--loss", train.loss)->check(CLI::IsMember({"generative", "discriminative"}));
  cmd_train->add_option("--mode", train.mode)->check(CLI::IsMember({"map", "fb"}));
  cmd_train->add_option("--seed", train.seed);
  cmd_train->add_option("--workers", train.workers, "Threads, 0 = all cores");
  cmd_train->add_option("--eps-kappa", train.eps_kappa)->check(CLI::PositiveNumber);
  cmd_train->add_option("--eps-nu", train.eps_nu)->check(CLI::PositiveNumber);
  cmd_train->add_option("--eps-l", train.eps_l)->check(CLI::PositiveNumber);
  cmd_train->add_flag("--freeze-mean", train.freeze_mean, "Keep m fixed at its initial value");
  cmd_train->add_flag("--normalize", train.normalize, "Center by the training mean and L2-normalize");
  cmd_train->add_flag("--quiet", train.quiet);

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Few-shot accuracy with 95% interval over random episodes");
  cmd_eval->add_option("--config", config_path, "Key-value config file; flags take precedence");
  cmd_eval->add_option("--features", ev.features)->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--prior", ev.prior, "Checkpoint (not needed for --mode mle)")->check(CLI::ExistingFile);
  cmd_eval->add_option("--mode", ev.mode, "map | fb | lda | mle (default: checkpoint mode)")
      ->check([](const std::string& m) { return check_mode_name(m, true); });
  cmd_eval->add_option("--ways", ev.ways)->check(CLI::PositiveNumber);
  cmd_eval->add_option("--shots", ev.shots)->check(CLI::PositiveNumber);
  cmd_eval->add_option("--queries", ev.queries)->check(CLI::PositiveNumber);
  cmd_eval->add_option("--episodes", ev.episodes)->check(CLI::PositiveNumber);
  cmd_eval->add_option("--temperature", ev.temperature)->check(CLI::PositiveNumber);
  cmd_eval->add_option("--seed", ev.seed);
  cmd_eval->add_option("--workers", ev.workers, "Threads, 0 = all cores");
  cmd_eval->add_option("--bins", ev.bins, "ECE bins")->check(CLI::PositiveNumber);
  cmd_eval->add_option("--ridge", ev.ridge, "Ridge for --mode mle (default 1e-6 trace/d)");

  IncrementalArgs inc;
  auto* cmd_inc = app.add_subcommand("eval-incremental", "Few-shot class-incremental sessions");
  cmd_inc->add_option("--config", config_path, "Key-value config file; flags take precedence");
  cmd_inc->add_option("--features", inc.features)->required()->check(CLI::ExistingFile);
  cmd_inc->add_option("--prior", inc.prior)->required()->check(CLI::ExistingFile);
  cmd_inc->add_option("--mode", inc.mode)->check(CLI::IsMember({"map", "fb", "lda"}));
  cmd_inc->add_option("--base-classes", inc.base_classes)->check(CLI::PositiveNumber);
  cmd_inc->add_option("--session-ways", inc.session_ways)->check(CLI::NonNegativeNumber);
  cmd_inc->add_option("--sessions", inc.sessions)->check(CLI::NonNegativeNumber);
  cmd_inc->add_option("--shots", inc.shots)->check(CLI::PositiveNumber);
  cmd_inc->add_option("--base-shots", inc.base_shots)->check(CLI::PositiveNumber);
  cmd_inc->add_option("--test-per-class", inc.test_per_class, "0 = all remaining rows")
      ->check(CLI::NonNegativeNumber);
  cmd_inc->add_option("--seed", inc.seed);

  CalibrateArgs cal;
  auto* cmd_cal = app.add_subcommand("calibrate", "Fit a temperature for best ECE on validation episodes");
  cmd_cal->add_option("--config", config_path, "Key-value config file; flags take precedence");
  cmd_cal->add_option("--features", cal.features, "Validation MQDF file")->required()->check(CLI::ExistingFile);
  cmd_cal->add_option("--prior", cal.prior)->check(CLI::ExistingFile);
  cmd_cal->add_option("--mode", cal.mode)->check([](const std::string& m) { return check_mode_name(m, true); });
  cmd_cal->add_option("--ways", cal.ways)->check(CLI::PositiveNumber);
  cmd_cal->add_option("--shots", cal.shots)->check(CLI::PositiveNumber);
  cmd_cal->add_option("--queries", cal.queries)->check(CLI::PositiveNumber);
  cmd_cal->add_option("--episodes", cal.episodes)->check(CLI::PositiveNumber);
  cmd_cal->add_option("--seed", cal.seed);
  cmd_cal->add_option("--workers", cal.workers);
  cmd_cal->add_option("--bins", cal.bins)->check(CLI::PositiveNumber);
  cmd_cal->add_option("--ridge", cal.ridge);
  cmd_cal->add_option("--report", cal.report, "Write the per-bin table here");
  cmd_cal->add_option("--test", cal.test_features, "Also report test ECE with and without the temperature")
      ->check(CLI::ExistingFile);
  cmd_cal->add_option("--test-episodes", cal.test_episodes)->check(CLI::PositiveNumber);

  SynthArgs syn;
  auto* cmd_syn = app.add_subcommand("synth", "Generate a synthetic NIW benchmark feature file");
  cmd_syn->add_option("--config", config_path, "Key-value config file; flags take precedence");
  cmd_syn->add_option("--d", syn.d)->check(CLI::PositiveNumber);
  cmd_syn->add_option("--classes", syn.classes)->check(CLI::PositiveNumber);
  cmd_syn->add_option("--per-class", syn.per_class)->check(CLI::PositiveNumber);
  cmd_syn->add_option("--nu-offset", syn.nu_offset, "Ground-truth nu* = d + offset")->check(CLI::PositiveNumber);
  cmd_syn->add_option("--kappa", syn.kappa, "Ground-truth kappa*")->check(CLI::PositiveNumber);
  cmd_syn->add_option("--noise", syn.noise)->check(CLI::NonNegativeNumber);
  cmd_syn->add_option("--seed", syn.seed);
  cmd_syn->add_option("--out", syn.out)->required();

  std::string inspect_path;
  auto* cmd_inspect = app.add_subcommand("inspect", "Validate and summarize an MQDF file or checkpoint");
  cmd_inspect->add_option("path", inspect_path)->required();

  try {
    app.parse(with_config_args(app, {argv + 1, argv + argc}));
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*cmd_train) return run_train(train);
    if (*cmd_eval) return run_eval(ev);
    if (*cmd_inc) return run_incremental(inc);
    if (*cmd_cal) return run_calibrate(cal);
    if (*cmd_syn) return run_synth(syn);
    if (*cmd_inspect) return run_inspect(inspect_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
