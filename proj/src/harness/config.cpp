#include "matchope/harness/config.hpp"

#include "matchope/errors.hpp"
#include "matchope/harness/report.hpp"

#include <json.hpp>

#include <set>

namespace matchope::harness {
namespace {

using nlohmann::json;

// Reads typed fields from one config section and rejects unknown keys.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : doc_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + name_ + "." + item.key() + "'");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    const json& v = doc_.at(key);
    bool ok = true;
    if constexpr (std::is_same_v<T, double>) {
      ok = v.is_number();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer() && (!std::is_unsigned_v<T> || v.is_number_unsigned());
    }
    if (ok) {
      try {
        out = v.get<T>();
      } catch (const json::exception&) {
        ok = false;
      }
    }
    if (!ok) throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
  }

  void mark(const char* key) { seen_.insert(key); }

  template <typename T, typename Parse>
  void read_parsed(const char* key, T& out, Parse parse) {
    std::string text;
    bool present = doc_.contains(key);
    read(key, text);
    if (present) out = parse(text);
  }

  template <typename T, typename Parse>
  void read_list(const char* key, std::vector<T>& out, Parse parse) {
    std::vector<std::string> items;
    bool present = doc_.contains(key);
    read(key, items);
    if (!present) return;
    out.clear();
    for (const auto& item : items) out.push_back(parse(item));
  }

  bool has(const char* key) const { return doc_.contains(key); }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_env(const json& doc, SyntheticEnvSpec& spec) {
  Section s(doc, "env");
  s.read("n_companies", spec.n_companies);
  s.read("n_seekers", spec.n_seekers);
  s.read("dim", spec.dim);
  s.read("theta_sp", spec.theta_sp);
  s.read("beta", spec.beta);
  s.read("epsilon", spec.epsilon);
  s.read("seed", spec.seed);
}

void read_fit(const json& doc, FitConfig& fit) {
  Section s(doc, "fit");
  s.read("n_folds", fit.n_folds);
  s.read("l2_penalty", fit.l2_penalty);
  s.read("max_iters", fit.max_iters);
  s.read("tolerance", fit.tolerance);
  s.read_parsed("feature_mode", fit.feature_mode, parse_feature_mode);
  s.read("clamp_min", fit.clamp_min);
  s.read("q_r_shrinkage", fit.q_r_shrinkage);
}

void read_sweep(const json& doc, SweepConfig& sweep) {
  Section s(doc, "sweep");
  s.read_parsed("axis", sweep.axis, parse_sweep_axis);
  if (s.has("axis")) sweep.axis_values = default_axis_values(sweep.axis);
  s.read("axis_values", sweep.axis_values);
  s.read("n_replications", sweep.n_replications);
  s.read_list("estimators", sweep.estimators, parse_estimator);
  s.read_parsed("model_source", sweep.model_source, parse_model_source);
  s.read_parsed("propensity_source", sweep.propensity_source, parse_propensity_source);
  s.read("master_seed", sweep.master_seed);
  s.read("switch_lambda", sweep.switch_lambda);
  s.read("n_clusters", sweep.n_clusters);
  s.read("jobs", sweep.jobs);
}

void read_learn(const json& doc, OplExperimentConfig& learn) {
  Section s(doc, "learn");
  s.read("learning_rate", learn.learn.learning_rate);
  s.read("n_iterations", learn.learn.n_iterations);
  s.read_list("learners", learn.learners, parse_gradient_estimator);
  if (s.has("weight_clip") && doc.at("weight_clip").is_null()) {
    learn.learn.weight_clip.reset();
    s.mark("weight_clip");
  } else {
    double clip = 0.0;
    const bool present = s.has("weight_clip");
    s.read("weight_clip", clip);
    if (present) learn.learn.weight_clip = clip;
  }
  s.read_parsed("feature_mode", learn.learn.feature_mode, parse_feature_mode);
  s.read_parsed("propensity_source", learn.learn.propensity_source, parse_propensity_source);
  s.read_parsed("model_source", learn.model_source, parse_model_source);
  s.read("n_seeds", learn.n_seeds);
  s.read("master_seed", learn.master_seed);
  s.read("jobs", learn.jobs);
}

void read_check(const json& doc, VerificationConfig& check) {
  Section s(doc, "check");
  s.read("n_companies", check.n_companies);
  s.read("n_seekers", check.n_seekers);
  s.read("n_reps", check.n_reps);
  s.read("seed", check.seed);
  s.read("jobs", check.jobs);
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  {
    Section top(doc, "config");
    json empty = json::object();
    json env = empty, fit = empty, sweep = empty, learn = empty, check = empty;
    top.read("env", env);
    top.read("fit", fit);
    top.read("sweep", sweep);
    top.read("learn", learn);
    top.read("check", check);
    read_env(env, cfg.sweep.base);
    read_fit(fit, cfg.sweep.fit);
    read_sweep(sweep, cfg.sweep);
    read_learn(learn, cfg.learn);
    read_check(check, cfg.check);
  }
  cfg.learn.env = cfg.sweep.base;
  cfg.learn.fit = cfg.sweep.fit;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("no such config file: " + path.string());
  return parse_config(read_text_file(path));
}

}  // namespace matchope::harness
