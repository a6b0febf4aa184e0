#include "helpers.hpp"

#include "stme/experiments.hpp"
#include "stme/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace stme {
namespace {

CycloneCatalog numbered_catalog(std::size_t events, double years) {
  std::vector<std::vector<double>> v;
  for (std::size_t i = 0; i < events; ++i) v.push_back({1.0 + static_cast<double>(i % 17)});
  return test::dense_catalog(v, years);
}

TEST(SamplePeriod, EventCountFromDurations) {
  const auto cat = numbered_catalog(1971, 3200.0);
  Rng rng(1);
  const auto s = sample_period(cat, 200.0, rng);
  EXPECT_EQ(s.events().size(), 123u);  // round(1971 * 200 / 3200) = round(123.19)
  EXPECT_DOUBLE_EQ(s.duration_years(), 200.0);
  for (std::size_t i = 1; i < s.events().size(); ++i) {
    EXPECT_LT(s.events()[i - 1].id, s.events()[i].id);  // catalog order kept
  }
}

TEST(SamplePeriod, FullPeriodIsIdentity) {
  const auto cat = numbered_catalog(50, 80.0);
  Rng rng(2);
  const auto s = sample_period(cat, 80.0, rng);
  ASSERT_EQ(s.events().size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(s.events()[i].id, cat.events()[i].id);
  EXPECT_THROW(sample_period(cat, 81.0, rng), std::invalid_argument);
}

TEST(SamplePeriod, FiftyYearsAtPointSixPerYear) {
  const auto cat = numbered_catalog(1920, 3200.0);
  Rng rng(3);
  EXPECT_EQ(sample_period(cat, 50.0, rng).events().size(), 30u);
}

TEST(SamplePeriod, WithoutReplacementAndSeeded) {
  const auto cat = numbered_catalog(300, 300.0);
  Rng a(9);
  Rng b(9);
  const auto x = sample_period(cat, 100.0, a);
  const auto y = sample_period(cat, 100.0, b);
  ASSERT_EQ(x.events().size(), y.events().size());
  std::set<EventId> seen;
  for (std::size_t i = 0; i < x.events().size(); ++i) {
    EXPECT_EQ(x.events()[i].id, y.events()[i].id);
    EXPECT_TRUE(seen.insert(x.events()[i].id).second);
  }
}

TEST(Percentile, Type7Interpolation) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(percentile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile(v, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(percentile(v, 0.1), 1.4);
  EXPECT_THROW(percentile(std::vector<double>{}, 0.5), std::invalid_argument);
}

TEST(Percentile, EvenGridIsExact) {
  // On v_i = i / (N - 1) the type-7 percentile is the identity.
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / 1000.0;
  for (const double p : {0.0, 0.025, 0.25, 0.5, 0.7513, 0.975, 1.0}) {
    EXPECT_NEAR(percentile(v, p), p, 1e-15);
  }
}

ReplicateResult replicate_of(std::size_t index, const std::vector<double>& values, LocationId loc,
                             Estimator est = Estimator::STME) {
  ReplicateResult r{index, {}};
  for (const double v : values) {
    ReturnValueEstimate e;
    e.location_id = loc;
    e.estimator = est;
    e.method = FitMethod::MLE;
    e.n = 20;
    e.T_years = 500;
    e.T0_years = 200;
    e.value_m = v;
    if (std::isnan(v)) e.flag = "fit_failed";
    r.estimates.push_back(e);
  }
  return r;
}

TEST(Summarize, SymmetricSetAndFailures) {
  std::vector<ReplicateResult> reps;
  const std::vector<double> values{1, 2, 3, 4, 5};
  for (std::size_t i = 0; i < values.size(); ++i) reps.push_back(replicate_of(i, {values[i]}, 1));
  reps.push_back(replicate_of(5, {std::nan("")}, 1));
  const auto s = summarize(reps);
  ASSERT_EQ(s.cells.size(), 1u);
  const auto& c = s.cells[0];
  EXPECT_DOUBLE_EQ(c.mean, 3.0);
  EXPECT_DOUBLE_EQ(c.median, 3.0);
  EXPECT_EQ(c.count, 5u);
  EXPECT_EQ(c.failures, 1u);
  EXPECT_TRUE(c.valid);
  EXPECT_NE(s.find(c.key), nullptr);
  EXPECT_EQ(s.find({2, Estimator::STME, FitMethod::MLE, 20}), nullptr);
}

TEST(Summarize, ConstantReplicatesGiveZeroWidth) {
  std::vector<ReplicateResult> reps;
  for (std::size_t i = 0; i < 10; ++i) reps.push_back(replicate_of(i, {7.5}, 1));
  const auto& c = summarize(reps).cells[0];
  EXPECT_EQ(c.q25, c.q75);
  EXPECT_EQ(c.q025, c.q975);
  EXPECT_TRUE(c.outliers.empty());
}

ReturnValueEstimate truth_at(LocationId loc, double v) {
  ReturnValueEstimate e;
  e.location_id = loc;
  e.estimator = Estimator::EMPIRICAL;
  e.value_m = v;
  return e;
}

TEST(Metrics, ZeroBiasWhenEstimatesEqualTruth) {
  std::vector<ReplicateResult> reps;
  for (std::size_t i = 0; i < 4; ++i) {
    auto r = replicate_of(i, {5.0}, 1);
    auto r2 = replicate_of(i, {8.0}, 2);
    r.estimates.push_back(r2.estimates[0]);
    reps.push_back(r);
  }
  const std::vector<ReturnValueEstimate> truth{truth_at(1, 5.0), truth_at(2, 8.0)};
  const auto m = performance_metrics(summarize(reps), truth);
  const auto* row = m.find(20, FitMethod::MLE, Estimator::STME);
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(row->bias_mean, 0.0);
  EXPECT_EQ(row->bias_median, 0.0);
  EXPECT_EQ(row->locations, 2u);
}

TEST(Metrics, HandBuiltTwoLocationSummary) {
  // Location 1: STME {1,2,3,4,5}, SINGLE {0,2,4,6,8}; location 2: STME {10,...,14}, SINGLE {9,...,13}.
  std::vector<ReplicateResult> reps;
  for (std::size_t i = 0; i < 5; ++i) {
    ReplicateResult r{i, {}};
    const double k = static_cast<double>(i);
    r.estimates.push_back(replicate_of(i, {1.0 + k}, 1).estimates[0]);
    r.estimates.push_back(replicate_of(i, {2.0 * k}, 1, Estimator::SINGLE).estimates[0]);
    r.estimates.push_back(replicate_of(i, {10.0 + k}, 2).estimates[0]);
    r.estimates.push_back(replicate_of(i, {9.0 + k}, 2, Estimator::SINGLE).estimates[0]);
    reps.push_back(r);
  }
  const std::vector<ReturnValueEstimate> truth{truth_at(1, 2.0), truth_at(2, 13.0)};
  const auto m = performance_metrics(summarize(reps), truth);
  const auto* st = m.find(20, FitMethod::MLE, Estimator::STME);
  const auto* si = m.find(20, FitMethod::MLE, Estimator::SINGLE);
  ASSERT_NE(st, nullptr);
  ASSERT_NE(si, nullptr);
  // Means: STME 3 and 12 -> biases +1, -1; SINGLE 4 and 11 -> +2, -2.
  EXPECT_DOUBLE_EQ(st->bias_mean, 0.0);
  EXPECT_DOUBLE_EQ(si->bias_mean, 0.0);
  // IQRs: STME 2 and 2; SINGLE 4 and 2.
  EXPECT_DOUBLE_EQ(st->w50, 2.0);
  EXPECT_DOUBLE_EQ(si->w50, 3.0);
  // U: mean of (2/4 - 1, 2/2 - 1) = -0.25; reference rows are zero.
  EXPECT_DOUBLE_EQ(st->u, -0.25);
  EXPECT_DOUBLE_EQ(si->u, 0.0);
}

TEST(Metrics, MissingTruthIsAnError) {
  std::vector<ReplicateResult> reps{replicate_of(0, {1.0}, 3), replicate_of(1, {2.0}, 3)};
  EXPECT_THROW(performance_metrics(summarize(reps), std::vector<ReturnValueEstimate>{}),
               std::invalid_argument);
}

SynthWorldConfig small_world() {
  SynthWorldConfig w;
  w.duration_years = 800.0;
  w.seed = 4;
  return w;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.replicates = 3;
  c.n_ladder = {20};
  c.locations = {1, 18};
  c.seed = 5;
  return c;
}

TEST(RunExperiment, GridShapeAndDeterminismAcrossJobs) {
  const auto cat = synth_catalog(small_world());
  const auto cfg = small_config();
  const auto a = run_experiment(cat, RegionSpec::all(), cfg, 1);
  const auto b = run_experiment(cat, RegionSpec::all(), cfg, 3);
  ASSERT_EQ(a.size(), 3u);
  // 2 estimators x 2 methods x 1 n x 2 locations
  EXPECT_EQ(a[0].estimates.size(), 8u);
  std::ostringstream x, y;
  write_results_csv(x, a);
  write_results_csv(y, b);
  EXPECT_EQ(x.str(), y.str());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].replicate, i);
}

TEST(RunExperiment, SmallestRun) {
  const auto cat = synth_catalog(small_world());
  auto cfg = small_config();
  cfg.replicates = 2;
  cfg.locations = {1};
  cfg.methods = {FitMethod::MLE};
  cfg.estimators = {Estimator::STME};
  const auto r = run_experiment(cat, RegionSpec::all(), cfg, 1);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].estimates.size(), 1u);
  EXPECT_EQ(r[1].estimates.size(), 1u);
}

TEST(RunExperiment, HooksResumeFromSavedReplicates) {
  const auto cat = synth_catalog(small_world());
  const auto cfg = small_config();
  test::TempDir dir("resume");
  std::vector<std::size_t> computed;
  ExperimentHooks save;
  save.completed = [&](const ReplicateResult& r) {
    computed.push_back(r.replicate);
    write_replicate_file(dir / ("r" + std::to_string(r.replicate) + ".csv"), r);
  };
  const auto first = run_experiment(cat, RegionSpec::all(), cfg, 1, save);
  EXPECT_EQ(computed.size(), 3u);

  computed.clear();
  ExperimentHooks resume = save;
  resume.load = [&](std::size_t i) -> std::optional<ReplicateResult> {
    const auto p = dir / ("r" + std::to_string(i) + ".csv");
    if (i == 1 || !std::filesystem::exists(p)) return std::nullopt;
    return read_replicate_file(p);
  };
  const auto second = run_experiment(cat, RegionSpec::all(), cfg, 1, resume);
  EXPECT_EQ(computed, (std::vector<std::size_t>{1}));
  std::ostringstream x, y;
  write_results_csv(x, first);
  write_results_csv(y, second);
  EXPECT_EQ(x.str(), y.str());
}

TEST(RunExperiment, ValidatesConfig) {
  const auto cat = synth_catalog(small_world());
  auto cfg = small_config();
  cfg.T_years = 100.0;
  EXPECT_THROW(run_experiment(cat, RegionSpec::all(), cfg, 1), std::invalid_argument);
  cfg = small_config();
  cfg.T0_years = 900.0;
  cfg.T_years = 1000.0;
  EXPECT_THROW(run_experiment(cat, RegionSpec::all(), cfg, 1), std::invalid_argument);
  cfg = small_config();
  cfg.estimators = {Estimator::EMPIRICAL};
  EXPECT_THROW(run_experiment(cat, RegionSpec::all(), cfg, 1), std::invalid_argument);
}

TEST(Metrics, CsvShapedAsMethodsByLadder) {
  const auto cat = synth_catalog(small_world());
  auto cfg = small_config();
  cfg.n_ladder = {20, 30, 40, 50, 60};
  cfg.replicates = 2;
  cfg.T_years = 400.0;
  const auto results = run_experiment(cat, RegionSpec::all(), cfg, 1);
  const auto truth = ground_truth(cat, cfg.locations, cfg.T_years);
  const auto metrics = performance_metrics(summarize(results), truth);
  std::ostringstream out;
  write_metrics_csv(out, metrics, cfg.n_ladder);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "method,quantity,n=20,n=30,n=40,n=50,n=60");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
  }
  EXPECT_EQ(rows, 2 * 4 * 2);  // methods x quantities x estimators
}

TEST(Synth, RateArithmeticAndDeterminism) {
  SynthWorldConfig w;
  const auto a = synth_catalog(w);
  EXPECT_EQ(a.events().size(), 1920u);
  EXPECT_EQ(a.locations().size(), 35u);
  const auto b = synth_catalog(w);
  EXPECT_EQ(a.events()[100].footprint[3].max_swh_m, b.events()[100].footprint[3].max_swh_m);
  w.poisson_counts = true;
  const auto c = synth_catalog(w);
  EXPECT_NEAR(static_cast<double>(c.events().size()), 1920.0, 3.0 * std::sqrt(1920.0));
}

TEST(Synth, OnTrackLocationSeesThePeak) {
  // Zero noise and a single location: the track always passes through it.
  SynthWorldConfig w;
  w.lon_max = w.lon_min;
  w.lat_max = w.lat_min;
  w.noise_sigma_log = 0.0;
  w.duration_years = 100.0;
  const auto cat = synth_catalog(w);
  ASSERT_EQ(cat.locations().size(), 1u);
  const auto stm = extract_stm(cat);
  const auto m = extract_exposures(cat, stm);
  for (std::size_t i = 0; i < stm.size(); ++i) {
    EXPECT_EQ(*m.at(i, 0), 1.0);
    EXPECT_GE(stm[i].value_m, w.intensity_threshold_m);
  }
}

TEST(Synth, LongDecayMakesExposureOne) {
  SynthWorldConfig w;
  w.decay_km = 1e12;
  w.noise_sigma_log = 0.0;
  w.duration_years = 100.0;
  const auto cat = synth_catalog(w);
  const auto stm = extract_stm(cat);
  const auto m = extract_exposures(cat, stm);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) EXPECT_NEAR(*m.at(i, j), 1.0, 1e-9);
  }
}

TEST(Synth, FiveHundredYearStmInTwentyToThirty) {
  const auto cat = synth_catalog(SynthWorldConfig{});
  const auto data = prepare_region(cat, RegionSpec::all());
  const auto top = top_n_events(data.stm, 60);
  std::vector<double> v;
  for (const auto& r : top.retained) v.push_back(r.value_m);
  const auto fit = fit_gpd_mle(v, top.threshold_m);
  ASSERT_TRUE(fit.converged);
  // 500-year level with 60 retained events in 3200 years: 1 - (3200/60)/500.
  const double rv = gpd_quantile(*fit.params, 1.0 - (cat.duration_years() / 60.0) / 500.0);
  EXPECT_GT(rv, 20.0);
  EXPECT_LT(rv, 30.0);
}

TEST(Synth, RejectsBadConfig) {
  SynthWorldConfig w;
  w.spacing_deg = 0.0;
  EXPECT_THROW(synth_catalog(w), std::invalid_argument);
  w = {};
  w.lon_min = 10.0;
  w.lon_max = 0.0;
  EXPECT_THROW(synth_catalog(w), std::invalid_argument);
}

}  // namespace
}  // namespace stme
