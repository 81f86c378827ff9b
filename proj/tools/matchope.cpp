// Command-line front end: synth, eval, sweep, learn, check.

#include "matchope/errors.hpp"
#include "matchope/harness/config.hpp"
#include "matchope/harness/data_io.hpp"
#include "matchope/harness/plots.hpp"
#include "matchope/models.hpp"
#include "matchope/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

namespace mh = matchope::harness;
using namespace matchope;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitValidation = 2;
constexpr int kExitVerification = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format = "csv";
  std::optional<unsigned> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)");
}

mh::ExperimentConfig load(const Common& c) { return c.config.empty() ? mh::ExperimentConfig{} : mh::load_config(c.config); }

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct EnvOverrides {
  std::optional<Index> n_companies, n_seekers, dim;
  std::optional<double> theta_sp, beta, epsilon;

  void add(CLI::App* cmd) {
    cmd->add_option("--n-companies", n_companies);
    cmd->add_option("--n-seekers", n_seekers);
    cmd->add_option("--dim", dim);
    cmd->add_option("--theta-sp", theta_sp);
    cmd->add_option("--beta", beta);
    cmd->add_option("--epsilon", epsilon);
  }

  void apply(SyntheticEnvSpec& spec) const {
    if (n_companies) spec.n_companies = *n_companies;
    if (n_seekers) spec.n_seekers = *n_seekers;
    if (dim) spec.dim = *dim;
    if (theta_sp) spec.theta_sp = *theta_sp;
    if (beta) spec.beta = *beta;
    if (epsilon) spec.epsilon = *epsilon;
  }
};

int run_synth(const Common& c, const EnvOverrides& env_over) {
  mh::ExperimentConfig cfg = load(c);
  SyntheticEnvSpec spec = cfg.sweep.base;
  env_over.apply(spec);
  if (c.seed) spec.seed = *c.seed;
  spec.validate();
  const GeneratedEnvironment g = generate_environment(spec);
  const Policy pi0 = softmax_logging_policy(g.env, spec.beta);
  const Policy pi = epsilon_greedy_target_policy(g.env, spec.epsilon);
  const LoggedDataset data = sample_logged_data(g.env, pi0, derive_seed(spec.seed, 1));
  const std::filesystem::path out(c.out);
  mh::export_logged_data(data, &g.env.contexts(), out / "dataset.jsonl");
  mh::write_policy(pi0, out / "logging_policy.json");
  mh::write_policy(pi, out / "target_policy.json");
  nlohmann::ordered_json truth;
  truth["true_value_target"] = true_policy_value(g.env, pi);
  truth["true_value_logging"] = true_policy_value(g.env, pi0);
  mh::write_text_file(out / "truth.json", truth.dump(2) + "\n");
  std::cout << "wrote " << data.n_companies() << " records to " << (out / "dataset.jsonl").string() << "\n";
  return kExitOk;
}

struct EvalOptions {
  std::string data, policy, logging_policy, estimators = "DM,IPS,DR,DiPS,DPR", propensity;
  double switch_lambda = kDefaultSwitchLambda;
  Index clusters = 0;
};

int run_eval(const Common& c, const EvalOptions& o) {
  mh::ExperimentConfig cfg = load(c);
  const mh::IngestedData in = mh::ingest_logged_data(o.data);
  if (!in.contexts) throw ValidationError("eval needs company and seeker features to fit reward models");
  const Policy pi = mh::read_policy(o.policy);
  std::optional<Policy> pi0;
  if (!o.logging_policy.empty()) pi0 = mh::read_policy(o.logging_policy);

  // Ingested logs default to estimated propensities.
  const PropensitySource source =
      o.propensity.empty() ? PropensitySource::estimated : parse_propensity_source(o.propensity);
  std::vector<EstimatorId> ids;
  for (const auto& name : split(o.estimators)) ids.push_back(parse_estimator(name));
  if (ids.empty()) throw ConfigError("no estimators requested");

  FitDiagnostics diag;
  RewardModel model = fit_reward_models(in.dataset, *in.contexts, cfg.sweep.fit, &diag);
  if (source == PropensitySource::estimated) model.pi0_hat = fit_logging_policy(in.dataset, *in.contexts, cfg.sweep.fit);
  for (const auto& w : diag.warnings) std::cerr << "warning: " << w << "\n";

  std::optional<EmbeddingMap> embedding;
  for (EstimatorId id : ids) {
    if ((id == EstimatorId::mips || id == EstimatorId::extended_mips) && !embedding) {
      embedding = make_embedding_map(*in.contexts,
                                     o.clusters > 0 ? o.clusters : default_cluster_count(in.dataset.n_seekers()));
    }
  }
  EstimatorInput input(in.dataset, pi, model, source, pi0 ? &*pi0 : nullptr);
  EstimatorDiagnostics ediag;
  input.diagnostics = &ediag;
  const std::vector<double> values =
      estimate_many(ids, input, EstimatorOptions{o.switch_lambda, embedding ? &*embedding : nullptr});

  std::string text;
  if (c.format == "csv") {
    text = "estimator,estimate\n";
    for (std::size_t k = 0; k < ids.size(); ++k) text += to_string(ids[k]) + "," + mh::format_number(values[k]) + "\n";
  } else {
    text = "{\"estimates\": [";
    for (std::size_t k = 0; k < ids.size(); ++k) {
      text += (k == 0 ? "\n" : ",\n");
      text += "  {\"estimator\": \"" + to_string(ids[k]) + "\", \"estimate\": " + mh::format_number(values[k]) + "}";
    }
    text += "\n]}\n";
  }
  std::cout << text;
  if (ediag.zero_support_records > 0) {
    std::cerr << "note: " << ediag.zero_support_records << " records outside both policies' support\n";
  }
  if (c.out != ".") mh::write_text_file(std::filesystem::path(c.out) / ("eval." + c.format), text);
  return kExitOk;
}

struct SweepOverrides {
  std::string axis, axis_values, estimators, model_source, propensity_source;
  std::optional<std::int64_t> reps;
};

int run_sweep_cmd(const Common& c, const EnvOverrides& env_over, const SweepOverrides& o) {
  mh::ExperimentConfig cfg = load(c);
  mh::SweepConfig& sweep = cfg.sweep;
  env_over.apply(sweep.base);
  if (!o.axis.empty()) {
    sweep.axis = mh::parse_sweep_axis(o.axis);
    sweep.axis_values = mh::default_axis_values(sweep.axis);
  }
  if (!o.axis_values.empty()) {
    sweep.axis_values.clear();
    for (const auto& v : split(o.axis_values)) {
      try {
        sweep.axis_values.push_back(std::stod(v));
      } catch (const std::exception&) {
        throw ConfigError("axis value '" + v + "' is not a number");
      }
    }
  }
  if (!o.estimators.empty()) {
    sweep.estimators.clear();
    for (const auto& name : split(o.estimators)) sweep.estimators.push_back(parse_estimator(name));
  }
  if (!o.model_source.empty()) sweep.model_source = mh::parse_model_source(o.model_source);
  if (!o.propensity_source.empty()) sweep.propensity_source = parse_propensity_source(o.propensity_source);
  if (o.reps) sweep.n_replications = *o.reps;
  if (c.seed) sweep.master_seed = *c.seed;
  if (c.jobs) sweep.jobs = *c.jobs;

  const mh::ExperimentReport report = mh::run_sweep(sweep);
  const mh::ReportFormat format = mh::parse_report_format(c.format);
  const std::filesystem::path out(c.out);
  mh::export_report(report, out / ("report." + c.format), format);
  mh::emit_plots(report, out);
  for (const auto& d : report.diagnostics) {
    if (d.failed_replications > 0) {
      std::cerr << "axis value " << mh::format_number(d.axis_value) << ": " << d.failed_replications
                << " failed replications (" << d.first_failure << ")\n";
    }
  }
  std::cout << "wrote " << report.rows.size() << " rows to " << (out / ("report." + c.format)).string() << "\n";
  return kExitOk;
}

struct LearnOverrides {
  std::string learners, model_source, propensity_source, feature_mode;
  std::optional<double> learning_rate, weight_clip;
  std::optional<int> iterations;
  std::optional<std::int64_t> n_seeds;
};

int run_learn(const Common& c, const EnvOverrides& env_over, const LearnOverrides& o) {
  mh::ExperimentConfig cfg = load(c);
  mh::OplExperimentConfig& learn = cfg.learn;
  env_over.apply(learn.env);
  if (!o.learners.empty()) {
    learn.learners.clear();
    for (const auto& name : split(o.learners)) learn.learners.push_back(parse_gradient_estimator(name));
  }
  if (!o.model_source.empty()) learn.model_source = mh::parse_model_source(o.model_source);
  if (!o.propensity_source.empty()) learn.learn.propensity_source = parse_propensity_source(o.propensity_source);
  if (!o.feature_mode.empty()) learn.learn.feature_mode = parse_feature_mode(o.feature_mode);
  if (o.learning_rate) learn.learn.learning_rate = *o.learning_rate;
  if (o.weight_clip) learn.learn.weight_clip = *o.weight_clip;
  if (o.iterations) learn.learn.n_iterations = *o.iterations;
  if (o.n_seeds) learn.n_seeds = *o.n_seeds;
  if (c.seed) learn.master_seed = *c.seed;
  if (c.jobs) learn.jobs = *c.jobs;

  const mh::OplReport report = mh::run_opl_experiment(learn);
  const std::filesystem::path out(c.out);
  mh::export_opl_report(report, out / ("opl_report." + c.format), mh::parse_report_format(c.format));
  mh::write_text_file(out / "learning_curve.svg", mh::render_learning_curve_svg(report));
  for (const auto& s : report.summaries) {
    std::printf("%-8s relative value %.4f (se %.4f)\n", s.learner.c_str(), s.mean_relative_value, s.se_relative_value);
  }
  return kExitOk;
}

int run_check(const Common& c, std::optional<std::int64_t> reps) {
  mh::ExperimentConfig cfg = load(c);
  if (reps) cfg.check.n_reps = *reps;
  if (c.seed) cfg.check.seed = *c.seed;
  if (c.jobs) cfg.check.jobs = *c.jobs;
  const mh::VerificationResult result = mh::run_verification_suite(cfg.check);
  for (const auto& check : result.checks) {
    std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << ": " << check.detail << "\n";
  }
  return result.passed() ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation and learning for two-sided matching markets"};
  app.require_subcommand(1);

  Common common;
  EnvOverrides env_over;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic environment and export a logged dataset");
  add_common(synth, common);
  env_over.add(synth);

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Evaluate a target policy on a logged dataset");
  add_common(eval, common);
  eval->add_option("--data", eval_opts.data, "JSONL dataset")->required();
  eval->add_option("--policy", eval_opts.policy, "Target policy JSON")->required();
  eval->add_option("--logging-policy", eval_opts.logging_policy, "Full logging policy JSON (for MIPS)");
  eval->add_option("--estimators", eval_opts.estimators, "Comma-separated estimators")->capture_default_str();
  eval->add_option("--propensity-source", eval_opts.propensity, "logged or estimated (default estimated)");
  eval->add_option("--switch-lambda", eval_opts.switch_lambda)->capture_default_str();
  eval->add_option("--clusters", eval_opts.clusters, "Seeker clusters for MIPS (0 = default)");

  SweepOverrides sweep_over;
  auto* sweep = app.add_subcommand("sweep", "Run an estimator sweep and export the report and plots");
  add_common(sweep, common);
  env_over.add(sweep);
  sweep->add_option("--axis", sweep_over.axis, "n_companies, n_seekers or sparsity");
  sweep->add_option("--axis-values", sweep_over.axis_values, "Comma-separated axis values");
  sweep->add_option("--estimators", sweep_over.estimators, "Comma-separated estimators");
  sweep->add_option("--model-source", sweep_over.model_source, "oracle or fitted");
  sweep->add_option("--propensity-source", sweep_over.propensity_source, "logged or estimated");
  sweep->add_option("--reps", sweep_over.reps, "Replications per axis value");

  LearnOverrides learn_over;
  auto* learn = app.add_subcommand("learn", "Run the off-policy learning experiment");
  add_common(learn, common);
  env_over.add(learn);
  learn->add_option("--learners", learn_over.learners, "Comma-separated gradient estimators");
  learn->add_option("--model-source", learn_over.model_source, "oracle or fitted");
  learn->add_option("--propensity-source", learn_over.propensity_source, "logged or estimated");
  learn->add_option("--feature-mode", learn_over.feature_mode, "concat or concat_plus_product");
  learn->add_option("--learning-rate", learn_over.learning_rate);
  learn->add_option("--weight-clip", learn_over.weight_clip);
  learn->add_option("--iterations", learn_over.iterations);
  learn->add_option("--n-seeds", learn_over.n_seeds);

  std::optional<std::int64_t> check_reps;
  auto* check = app.add_subcommand("check", "Run the analytic-vs-Monte-Carlo verification suite");
  add_common(check, common);
  check->add_option("--reps", check_reps, "Monte Carlo replications");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) return run_synth(common, env_over);
    if (*eval) return run_eval(common, eval_opts);
    if (*sweep) return run_sweep_cmd(common, env_over, sweep_over);
    if (*learn) return run_learn(common, env_over, learn_over);
    if (*check) return run_check(common, check_reps);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
