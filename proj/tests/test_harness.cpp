#include "matchope/errors.hpp"
#include "matchope/harness/config.hpp"
#include "matchope/harness/data_io.hpp"
#include "matchope/harness/plots.hpp"
#include "matchope/harness/report.hpp"
#include "matchope/harness/sweep.hpp"
#include "matchope/harness/verify.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace matchope;
using namespace matchope::harness;

namespace {

SweepConfig small_sweep() {
  SweepConfig cfg;
  cfg.axis = SweepAxis::n_companies;
  cfg.axis_values = {20, 40};
  cfg.n_replications = 30;
  cfg.base.n_seekers = 6;
  cfg.base.dim = 3;
  cfg.master_seed = 11;
  return cfg;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentReport sample_report() {
  ExperimentReport r;
  r.rows.push_back({"n_seekers", 25, "IPS", 0.1, 1.0 / 3.0, 0.1 - 1.0 / 3.0, 0.25, 0.7, 0.6931471805599453, 200,
                    1e-17});
  r.rows.push_back({"n_seekers", 50, "DiPS", 2.5e-300, 0.0, 2.5e-300, 1.0, -0.0, 1.0, 2, 0.0});
  return r;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("matchope_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(ErrorRate, Conventions) {
  const std::vector<double> hi{0.5, 0.6, 0.7}, lo{0.1, 0.2, 0.3};
  EXPECT_EQ(error_rate(hi, lo, 0.9, 0.4), 0.0);
  EXPECT_EQ(error_rate(lo, hi, 0.9, 0.4), 1.0);
  EXPECT_EQ(error_rate(hi, lo, 0.1, 0.4), 1.0);
  // A true tie counts as pi >= pi0: only estimated losses are errors.
  const std::vector<double> a{0.3, 0.3, 0.2, 0.5}, b{0.3, 0.2, 0.3, 0.6};
  EXPECT_EQ(error_rate(a, b, 0.4, 0.4), 0.5);
  // An estimated tie reads as pi >= pi0.
  EXPECT_EQ(error_rate(a, a, 0.1, 0.4), 1.0);
  EXPECT_THROW(error_rate(a, hi, 0.1, 0.2), ShapeError);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(format_report(ExperimentReport{}, ReportFormat::csv), std::string(kReportColumns) + "\n");
  EXPECT_TRUE(parse_report(format_report(ExperimentReport{}, ReportFormat::json), ReportFormat::json).rows.empty());
}

TEST(Report, CanonicalRoundTrip) {
  const ExperimentReport r = sample_report();
  for (ReportFormat f : {ReportFormat::csv, ReportFormat::json}) {
    const std::string once = format_report(r, f);
    const ExperimentReport back = parse_report(once, f);
    EXPECT_EQ(back.rows, r.rows);
    EXPECT_EQ(format_report(back, f), once);
  }
  const std::string csv = format_report(r, ReportFormat::csv);
  std::size_t lines = 0;
  for (std::size_t start = 0; start < csv.size();) {
    const auto end = csv.find('\n', start);
    EXPECT_EQ(count(csv.substr(start, end - start), ","), 10u);
    start = end + 1;
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos);
}

TEST(Report, RejectsMalformedInput) {
  EXPECT_THROW(parse_report("axis,value\n", ReportFormat::csv), ValidationError);
  EXPECT_THROW(parse_report(std::string(kReportColumns) + "\na,1,IPS,1,1,1,1,1,1,1\n", ReportFormat::csv),
               ValidationError);
  EXPECT_THROW(parse_report(std::string(kReportColumns) + "\na,x,IPS,1,1,1,1,1,1,1,1\n", ReportFormat::csv),
               ValidationError);
  EXPECT_THROW(parse_report("{\"rows\": [{}]}", ReportFormat::json), ValidationError);
  ExperimentReport bad = sample_report();
  bad.rows[0].estimator = "a,b";
  EXPECT_THROW(format_report(bad, ReportFormat::csv), ValidationError);
  EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

TEST(Report, FileRoundTripAndUnwritablePath) {
  const auto dir = scratch_dir("report");
  const ExperimentReport r = sample_report();
  export_report(r, dir / "nested" / "r.json", ReportFormat::json);
  EXPECT_EQ(read_report(dir / "nested" / "r.json", ReportFormat::json).rows, r.rows);
  write_text_file(dir / "file", "x");
  EXPECT_THROW(export_report(r, dir / "file" / "r.csv", ReportFormat::csv), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(SweepConfig, Validation) {
  SweepConfig cfg = small_sweep();
  EXPECT_NO_THROW(cfg.validate());
  cfg.axis_values = {};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.axis_values = {40, 20};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.axis_values = {20, 20};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.axis_values = {20.5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_sweep();
  cfg.n_replications = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_sweep();
  cfg.estimators = {EstimatorId::ips, EstimatorId::ips};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_sweep();
  cfg.axis = SweepAxis::n_seekers;
  cfg.axis_values = {1, 2};
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(default_axis_values(SweepAxis::sparsity), (std::vector<double>{0, 1, 2, 3, 4}));
  EXPECT_EQ(parse_sweep_axis("n_seekers"), SweepAxis::n_seekers);
  EXPECT_THROW(parse_sweep_axis("dim"), ConfigError);
}

TEST(SweepSeeds, DependOnlyOnAxisAndReplicationIndex) {
  const SweepConfig cfg = small_sweep();
  EXPECT_NE(axis_environment(cfg, 0).seed, axis_environment(cfg, 1).seed);
  EXPECT_EQ(axis_environment(cfg, 1).n_companies, 40);
  EXPECT_EQ(replication_seed(1, 2, 3), replication_seed(1, 2, 3));
  EXPECT_NE(replication_seed(1, 2, 3), replication_seed(1, 3, 2));
  EXPECT_NE(replication_seed(1, 2, 3), replication_seed(2, 2, 3));
}

TEST(RunSweep, OracleDirectMethodIsExact) {
  SweepConfig cfg = small_sweep();
  cfg.model_source = ModelSource::oracle;
  cfg.estimators = {EstimatorId::dm};
  const ExperimentReport r = run_sweep(cfg);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.mse, 0.0);
    EXPECT_EQ(row.squared_bias, 0.0);
    EXPECT_EQ(row.variance, 0.0);
    EXPECT_EQ(row.mean_estimate, row.true_value);
    EXPECT_EQ(row.n_reps, 30);
  }
}

TEST(RunSweep, MetricIdentitiesAndSchedulingInvariance) {
  SweepConfig cfg = small_sweep();
  cfg.axis = SweepAxis::sparsity;
  cfg.axis_values = {0, 3};
  cfg.base.n_companies = 40;
  const ExperimentReport serial = run_sweep(cfg);
  cfg.jobs = 4;
  const ExperimentReport threaded = run_sweep(cfg);
  EXPECT_EQ(format_report(serial, ReportFormat::csv), format_report(threaded, ReportFormat::csv));
  ASSERT_EQ(serial.rows.size(), 2 * std::size(kAllEstimators));
  for (const auto& row : serial.rows) {
    EXPECT_EQ(row.mse, row.squared_bias + row.variance) << row.estimator;
    EXPECT_GE(row.error_rate, 0.0);
    EXPECT_LE(row.error_rate, 1.0);
    EXPECT_EQ(row.axis, "sparsity");
  }
  for (const auto& d : serial.diagnostics) EXPECT_EQ(d.failed_replications, 0);
}

TEST(RunSweep, IpsSquaredBiasShrinks) {
  SweepConfig cfg = small_sweep();
  cfg.axis_values = {30};
  cfg.model_source = ModelSource::oracle;
  cfg.estimators = {EstimatorId::ips};
  cfg.n_replications = 4000;
  const ReportRow row = run_sweep(cfg).rows.at(0);
  const double se = std::sqrt(row.variance / static_cast<double>(row.n_reps - 1));
  EXPECT_LE(std::sqrt(row.squared_bias), 3.0 * se);
}

TEST(RunSweep, EstimatedPropensities) {
  SweepConfig cfg = small_sweep();
  cfg.axis_values = {60};
  cfg.n_replications = 5;
  cfg.propensity_source = PropensitySource::estimated;
  const ExperimentReport r = run_sweep(cfg);
  EXPECT_EQ(r.rows.size(), std::size(kAllEstimators));
  for (const auto& row : r.rows) EXPECT_TRUE(std::isfinite(row.mse));
}

TEST(OplExperiment, ZeroLearningRateGivesUniformPolicy) {
  OplExperimentConfig cfg;
  cfg.env.n_companies = 40;
  cfg.env.n_seekers = 5;
  cfg.env.dim = 2;
  cfg.learn.learning_rate = 0.0;
  cfg.learn.n_iterations = 2;
  cfg.n_seeds = 2;
  cfg.model_source = ModelSource::oracle;
  const OplReport r = run_opl_experiment(cfg);

  SyntheticEnvSpec spec = cfg.env;
  spec.seed = derive_seed(cfg.master_seed, 0);
  const Environment env = generate_environment(spec).env;
  const double expected = true_policy_value(env, Policy::uniform(40, 5)) /
                          true_policy_value(env, softmax_logging_policy(env, spec.beta));
  ASSERT_EQ(r.runs.size(), 10u);
  for (const auto& run : r.runs) {
    EXPECT_NEAR(run.relative_value, expected, 1e-14);
    EXPECT_EQ(run.relative_curve.size(), 3u);
  }
  EXPECT_NEAR(find_summary(r, GradientEstimator::dips_pg).mean_relative_value, expected, 1e-14);
  EXPECT_THROW(find_summary(OplReport{}, GradientEstimator::dips_pg), ConfigError);
}

TEST(OplExperiment, DeterministicAndImproves) {
  OplExperimentConfig cfg;
  cfg.env.n_companies = 150;
  cfg.env.n_seekers = 10;
  cfg.env.dim = 3;
  cfg.learn.n_iterations = 40;
  cfg.learn.learning_rate = 0.5;
  cfg.learners = {GradientEstimator::dips_pg, GradientEstimator::ips_pg};
  cfg.n_seeds = 3;
  const OplReport a = run_opl_experiment(cfg);
  cfg.jobs = 3;
  const OplReport b = run_opl_experiment(cfg);
  EXPECT_EQ(format_opl_report(a, ReportFormat::json), format_opl_report(b, ReportFormat::json));
  EXPECT_EQ(render_learning_curve_svg(a), render_learning_curve_svg(b));
  EXPECT_GT(find_summary(a, GradientEstimator::dips_pg).mean_relative_value, 1.0);
  cfg.learners = {GradientEstimator::ips_pg, GradientEstimator::ips_pg};
  EXPECT_THROW(run_opl_experiment(cfg), ConfigError);
}

TEST(DataIo, RoundTripWithContexts) {
  const auto x = test_support::random_instance(4, 12, 5);
  const LoggedDataset data = sample_logged_data(x.env, x.pi0, 8);
  const IngestedData back = parse_logged_data(format_logged_data(data, &x.env.contexts()));
  EXPECT_TRUE(back.dataset == data);
  ASSERT_TRUE(back.contexts.has_value());
  EXPECT_TRUE(back.contexts->company() == x.env.contexts().company());
  EXPECT_TRUE(back.contexts->seeker() == x.env.contexts().seeker());

  const LoggedDataset unknown(data.records(), 5, false);
  const IngestedData bare = parse_logged_data(format_logged_data(unknown));
  EXPECT_FALSE(bare.dataset.propensities_known());
  EXPECT_FALSE(bare.contexts.has_value());
  EXPECT_EQ(bare.dataset.n_seekers(), 5);

  const auto dir = scratch_dir("data");
  export_logged_data(data, &x.env.contexts(), dir / "d.jsonl");
  EXPECT_TRUE(ingest_logged_data(dir / "d.jsonl").dataset == data);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(ingest_logged_data(dir / "missing.jsonl"), ConfigError);
}

TEST(DataIo, RejectsInvalidInput) {
  auto message = [](const std::string& text) {
    try {
      parse_logged_data(text);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_EQ(message(""), "no records");
  EXPECT_EQ(message("\n{\"seeker_id\": 0}\n"), "no records");
  const std::string ok = "{\"company_id\":0,\"seeker_id\":1,\"s\":1,\"r\":0}\n";
  EXPECT_NE(message(ok + "{\"company_id\":1,\"seeker_id\":0,\"s\":0,\"r\":1}\n").find("line 2"), std::string::npos);
  EXPECT_NE(message(ok + "{\"company_id\":1,\"seeker_id\":0,\"s\":0,\"r\":1}\n").find("m = s * r"), std::string::npos);
  EXPECT_NE(message(ok + "{\"company_id\":1,\"seeker_id\":0,\"s\":1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message(ok + ok).find("twice"), std::string::npos);
  EXPECT_NE(message("{\"company_id\":1,\"seeker_id\":0,\"s\":1,\"r\":0}\n").find("dense"), std::string::npos);
  EXPECT_NE(message(ok + "{\"company_id\":1,\"seeker_id\":0,\"s\":1,\"r\":0,\"logging_prob\":0.5}\n").find("every"),
            std::string::npos);
  EXPECT_NE(message("{\"company_id\":0,\"seeker_id\":0,\"s\":2,\"r\":0}\n").find("0 or 1"), std::string::npos);
  EXPECT_NE(message("{\"company_id\":0,\"seeker_id\":0,\"s\":1,\"r\":0,\"logging_prob\":0}\n").find("(0, 1]"),
            std::string::npos);
  EXPECT_NE(message("{\"company_id\":0,\"seeker_id\":0,\"s\":1,\"r\":0,\"extra\":1}\n").find("unknown"),
            std::string::npos);
  EXPECT_NE(message("{\"company_id\":0,\"seeker_id\":0,\"s\":1,\"r\":0,\"company_features\":[1]}\n").find("missing"),
            std::string::npos);
}

TEST(DataIo, PolicyRoundTrip) {
  const auto x = test_support::random_instance(5, 4, 3);
  const Policy back = parse_policy(format_policy(x.pi));
  EXPECT_TRUE(back.probs() == x.pi.probs());
  EXPECT_EQ(back.label(), "pi");
  EXPECT_THROW(parse_policy("{\"probs\": [[0.5, 0.5], [1.0]]}"), ValidationError);
  EXPECT_THROW(parse_policy("not json"), ValidationError);
}

TEST(Plots, OnePolylinePerSeriesAndDeterministic) {
  ExperimentReport r;
  for (double v : {1.0, 2.0, 3.0}) r.rows.push_back({"sparsity", v, "IPS", v * 1e-3, 0, v * 1e-3, 0.1, 0, 0, 10, 0});
  for (const char* metric : kPlotMetrics) {
    const std::string svg = render_metric_svg(r, "sparsity", metric);
    EXPECT_EQ(count(svg, "<polyline"), 1u) << metric;
    EXPECT_EQ(count(svg, "<circle"), 3u);
    EXPECT_EQ(svg, render_metric_svg(r, "sparsity", metric));
  }
  EXPECT_NE(render_metric_svg(r, "sparsity", "mse").find("log scale"), std::string::npos);
  EXPECT_EQ(render_metric_svg(r, "sparsity", "error_rate").find("log scale"), std::string::npos);
  EXPECT_THROW(render_metric_svg(r, "sparsity", "bias"), ConfigError);

  ExperimentReport single;
  single.rows.push_back({"n_companies", 250, "DM", 0, 0, 0, 0, 0, 0, 2, 0});
  single.rows.push_back({"n_companies", 250, "IPS", 1, 1, 0, 0, 0, 0, 2, 0});
  const std::string svg = render_metric_svg(single, "n_companies", "mse");
  EXPECT_EQ(count(svg, "<polyline"), 0u);
  EXPECT_EQ(count(svg, "<circle"), 2u);

  const auto dir = scratch_dir("plots");
  const auto paths = emit_plots(r, dir);
  ASSERT_EQ(paths.size(), 4u);
  EXPECT_EQ(paths[0].filename(), "sparsity_mse.svg");
  EXPECT_EQ(read_text_file(paths[0]), render_metric_svg(r, "sparsity", "mse"));
  std::filesystem::remove_all(dir);
}

TEST(Config, ParsesSectionsAndRejectsUnknownKeys) {
  const ExperimentConfig cfg = parse_config(R"({
    "env": {"n_companies": 300, "theta_sp": 1.5, "seed": 4},
    "fit": {"n_folds": 3, "feature_mode": "concat"},
    "sweep": {"axis": "n_seekers", "n_replications": 50, "estimators": ["ips", "DiPS"], "model_source": "oracle"},
    "learn": {"learners": ["dips-pg"], "learning_rate": 0.1, "weight_clip": 20, "n_seeds": 4},
    "check": {"n_reps": 500}
  })");
  EXPECT_EQ(cfg.sweep.base.n_companies, 300);
  EXPECT_EQ(cfg.learn.env.theta_sp, 1.5);
  EXPECT_EQ(cfg.sweep.fit.n_folds, 3);
  EXPECT_EQ(cfg.learn.fit.feature_mode, FeatureMode::concat);
  EXPECT_EQ(cfg.sweep.axis, SweepAxis::n_seekers);
  EXPECT_EQ(cfg.sweep.axis_values, default_axis_values(SweepAxis::n_seekers));
  EXPECT_EQ(cfg.sweep.estimators, (std::vector<EstimatorId>{EstimatorId::ips, EstimatorId::dips}));
  EXPECT_EQ(cfg.sweep.model_source, ModelSource::oracle);
  EXPECT_EQ(cfg.learn.learners, std::vector<GradientEstimator>{GradientEstimator::dips_pg});
  EXPECT_EQ(cfg.learn.learn.weight_clip, 20.0);
  EXPECT_EQ(cfg.learn.n_seeds, 4);
  EXPECT_EQ(cfg.check.n_reps, 500);

  EXPECT_THROW(parse_config(R"({"sweep": {"reps": 3}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"plot": {}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"env": {"n_companies": "many"}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"env": {"seed": -1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"sweep": {"axis": "dim"}})"), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_FALSE(parse_config(R"({"learn": {"weight_clip": null}})").learn.learn.weight_clip.has_value());
}

TEST(Verification, SuitePasses) {
  VerificationConfig cfg;
  cfg.n_reps = 4000;
  const VerificationResult result = run_verification_suite(cfg);
  EXPECT_GE(result.checks.size(), 9u);
  for (const auto& c : result.checks) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
  cfg.n_reps = 10;
  EXPECT_THROW(run_verification_suite(cfg), ConfigError);
}
