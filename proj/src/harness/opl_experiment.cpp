#include "matchope/harness/opl_experiment.hpp"

#include "matchope/errors.hpp"
#include "matchope/numeric.hpp"
#include "matchope/parallel.hpp"
#include "matchope/random.hpp"

#include <json.hpp>

#include <cmath>

namespace matchope::harness {
namespace {

constexpr std::uint64_t kEnvStream = 0;
constexpr std::uint64_t kDataStream = 1;

}  // namespace

void OplExperimentConfig::validate() const {
  env.validate();
  learn.validate();
  if (learners.empty()) throw ConfigError("learners must not be empty");
  for (std::size_t a = 0; a < learners.size(); ++a) {
    for (std::size_t b = a + 1; b < learners.size(); ++b) {
      if (learners[a] == learners[b]) throw ConfigError("learner " + to_string(learners[a]) + " listed twice");
    }
  }
  if (n_seeds < 1) throw ConfigError("n_seeds must be at least 1");
  if (model_source == ModelSource::fitted || learn.propensity_source == PropensitySource::estimated) {
    fit.validate();
  }
}

OplReport run_opl_experiment(const OplExperimentConfig& cfg) {
  cfg.validate();
  SyntheticEnvSpec spec = cfg.env;
  spec.seed = derive_seed(cfg.master_seed, kEnvStream);
  const GeneratedEnvironment generated = generate_environment(spec);
  const Environment& env = generated.env;
  const ContextSet& contexts = env.contexts();
  const Policy pi0 = softmax_logging_policy(env, spec.beta);
  const double v_pi0 = true_policy_value(env, pi0);
  if (!(v_pi0 > 0.0)) throw PreconditionError("logging policy has zero true value; relative values are undefined");

  const std::size_t n_learners = cfg.learners.size();
  std::vector<std::vector<OplRun>> per_seed(static_cast<std::size_t>(cfg.n_seeds));
  parallel_for(per_seed.size(), cfg.jobs, [&](std::size_t s) {
    const LoggedDataset data = sample_logged_data(env, pi0, derive_seed(derive_seed(cfg.master_seed, kDataStream), s));
    RewardModel model = cfg.model_source == ModelSource::fitted ? fit_reward_models(data, contexts, cfg.fit)
                                                                : oracle_model(env);
    if (cfg.learn.propensity_source == PropensitySource::estimated) {
      model.pi0_hat = fit_logging_policy(data, contexts, cfg.fit);
    }
    for (GradientEstimator learner : cfg.learners) {
      LearnConfig lc = cfg.learn;
      lc.gradient_estimator = learner;
      const LearnResult result = learn_policy(data, contexts, model, lc, &env);
      OplRun run;
      run.learner = to_string(learner);
      run.seed_index = static_cast<std::int64_t>(s);
      run.final_estimate = result.estimated_values.back();
      run.relative_curve.reserve(result.true_values.size());
      for (double v : result.true_values) run.relative_curve.push_back(v / v_pi0);
      run.relative_value = run.relative_curve.back();
      per_seed[s].push_back(std::move(run));
    }
  });

  OplReport report;
  report.logging_value = v_pi0;
  for (std::size_t l = 0; l < n_learners; ++l) {
    std::vector<double> values;
    for (const auto& runs : per_seed) values.push_back(runs[l].relative_value);
    OplSummary summary;
    summary.learner = to_string(cfg.learners[l]);
    summary.n_seeds = cfg.n_seeds;
    summary.mean_relative_value = compensated_mean(values);
    if (values.size() > 1) {
      CompensatedSum ss;
      for (double v : values) ss.add((v - summary.mean_relative_value) * (v - summary.mean_relative_value));
      const double n = static_cast<double>(values.size());
      summary.se_relative_value = std::sqrt(ss.value() / (n - 1.0) / n);
    }
    report.summaries.push_back(std::move(summary));
  }
  for (std::size_t l = 0; l < n_learners; ++l) {
    for (const auto& runs : per_seed) report.runs.push_back(runs[l]);
  }
  return report;
}

const OplSummary& find_summary(const OplReport& report, GradientEstimator learner) {
  const std::string name = to_string(learner);
  for (const auto& s : report.summaries) {
    if (s.learner == name) return s;
  }
  throw ConfigError("learner " + name + " is not in the report");
}

std::string format_opl_report(const OplReport& report, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::csv) {
    out = "learner,n_seeds,mean_relative_value,se_relative_value,logging_value\n";
    for (const auto& s : report.summaries) {
      out += s.learner + "," + std::to_string(s.n_seeds) + "," + format_number(s.mean_relative_value) + "," +
             format_number(s.se_relative_value) + "," + format_number(report.logging_value) + "\n";
    }
    return out;
  }
  using nlohmann::json;
  out = "{\"logging_value\": " + format_number(report.logging_value) + ",\n \"summaries\": [";
  for (std::size_t k = 0; k < report.summaries.size(); ++k) {
    const auto& s = report.summaries[k];
    out += k == 0 ? "\n" : ",\n";
    out += "  {\"learner\": " + json(s.learner).dump() + ", \"n_seeds\": " + std::to_string(s.n_seeds) +
           ", \"mean_relative_value\": " + format_number(s.mean_relative_value) +
           ", \"se_relative_value\": " + format_number(s.se_relative_value) + "}";
  }
  out += "],\n \"runs\": [";
  for (std::size_t k = 0; k < report.runs.size(); ++k) {
    const auto& r = report.runs[k];
    out += k == 0 ? "\n" : ",\n";
    out += "  {\"learner\": " + json(r.learner).dump() + ", \"seed_index\": " + std::to_string(r.seed_index) +
           ", \"relative_value\": " + format_number(r.relative_value) +
           ", \"final_estimate\": " + format_number(r.final_estimate) + "}";
  }
  out += "]}\n";
  return out;
}

void export_opl_report(const OplReport& report, const std::filesystem::path& path, ReportFormat format) {
  write_text_file(path, format_opl_report(report, format));
}

}  // namespace matchope::harness
