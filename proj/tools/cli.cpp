#include "cli.hpp"

#include "config.hpp"

#include "stme/baselines.hpp"
#include "stme/catalog.hpp"
#include "stme/csv.hpp"
#include "stme/diagnostics.hpp"
#include "stme/estimate.hpp"
#include "stme/evd.hpp"
#include "stme/experiments.hpp"
#include "stme/model.hpp"
#include "stme/synth.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>

namespace stme::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct CatalogArgs {
  std::string footprints;
  std::string locations;
  double duration{kUnset};
  std::vector<double> box;
  std::vector<int> ids;
  double min_depth{kUnset};
};

struct OutputArgs {
  std::string dir{"."};
};

struct FitArgs {
  std::size_t n{30};
  std::vector<std::string> methods{"mle"};
};

struct StmeArgs {
  double T{500.0};
  std::vector<std::string> estimators{"stme"};
  std::string tail{"conditional"};
  std::string exposure_source{"retained"};
  std::vector<int> locations;
};

struct DiagnosticsArgs {
  double band{0.9};
  std::vector<double> orientations{0.0, 45.0, 90.0, 135.0};
  std::size_t n_perm{999};
  std::size_t n_null{1000};
  std::size_t kl_bins{10};
  double kl_smoothing{0.5};
  std::size_t kl_sample_size{0};
  std::vector<int> kl_locations;
  std::size_t n{0};
  std::uint64_t seed{1};
};

struct ExperimentArgs {
  double T0{200.0};
  double T{500.0};
  std::vector<std::size_t> n_ladder{20, 30, 40, 50, 60};
  std::size_t replicates{100};
  std::uint64_t seed{1};
  unsigned jobs{0};
  std::vector<std::string> methods{"mle", "pwm"};
  std::vector<std::string> estimators{"stme", "single"};
  std::string tail{"conditional"};
  std::string exposure_source{"retained"};
  std::vector<int> locations;
};

struct Command {
  CLI::App* app{nullptr};
  OptionTable table;
  std::string config_path;
  std::function<int(const nlohmann::json& meta)> run;
};

// Bound option builder for one subcommand.
class Binder {
 public:
  Binder(Command& cmd) : cmd_(cmd) {}

  template <typename T>
  CLI::Option* operator()(const std::string& flags, T& var, const std::string& section,
                          const std::string& key, const std::string& help) {
    return cmd_.table.bind(cmd_.app->add_option(flags, var, help), section, key);
  }
  CLI::Option* flag(const std::string& flags, bool& var, const std::string& section,
                    const std::string& key, const std::string& help) {
    return cmd_.table.bind(cmd_.app->add_flag(flags, var, help), section, key);
  }

 private:
  Command& cmd_;
};

void add_catalog_options(Binder& bind, CatalogArgs& a, bool required_inputs,
                         const std::string& duration_flags = "--duration") {
  const std::string note = required_inputs ? "" : " (omit to use a synthetic world)";
  bind("--footprints", a.footprints, "catalog", "footprints",
       "footprint CSV: cyclone_id,location_id,max_swh_m" + note);
  bind("--locations", a.locations, "catalog", "locations",
       "location CSV: location_id,lon_deg,lat_deg,depth_m");
  bind(duration_flags, a.duration, "catalog", "duration", "catalog length in years");
  bind("--box", a.box, "catalog", "box", "region as lon_min,lon_max,lat_min,lat_max")
      ->expected(4)
      ->delimiter(',');
  bind("--ids", a.ids, "catalog", "ids", "region as a list of location ids")->delimiter(',');
  bind("--min-depth", a.min_depth, "catalog", "min_depth",
       "exclude locations shallower than this (m)");
}

void add_output_option(Binder& bind, OutputArgs& a) {
  bind("--out", a.dir, "output", "dir", "output directory");
}

void add_synth_options(Binder& bind, SynthWorldConfig& s, const std::string& prefix) {
  const auto f = [&](const char* name) { return "--" + prefix + name; };
  bind(f("lon-min"), s.lon_min, "synth", "lon_min", "grid west edge (deg)");
  bind(f("lon-max"), s.lon_max, "synth", "lon_max", "grid east edge (deg)");
  bind(f("lat-min"), s.lat_min, "synth", "lat_min", "grid south edge (deg)");
  bind(f("lat-max"), s.lat_max, "synth", "lat_max", "grid north edge (deg)");
  bind(f("spacing"), s.spacing_deg, "synth", "spacing", "grid spacing (deg)");
  bind(f("rate"), s.rate_per_year, "synth", "rate", "events per year");
  bind(f("years"), s.duration_years, "synth", "years", "catalog length in years");
  bind.flag(f("poisson"), s.poisson_counts, "synth", "poisson", "draw the event count from a Poisson law");
  bind(f("direction"), s.track_direction_deg, "synth", "direction",
       "mean track direction, deg counter-clockwise from east");
  bind(f("spread"), s.track_spread_deg, "synth", "spread", "half-width of the direction spread (deg)");
  bind(f("psi"), s.intensity_threshold_m, "synth", "psi", "peak intensity GPD threshold (m)");
  bind(f("sigma"), s.intensity_scale_m, "synth", "sigma", "peak intensity GPD scale (m)");
  bind(f("xi"), s.intensity_shape, "synth", "xi", "peak intensity GPD shape");
  bind(f("decay"), s.decay_km, "synth", "decay", "footprint decay length (km)");
  bind(f("noise"), s.noise_sigma_log, "synth", "noise", "lognormal noise level");
  bind(f("seed"), s.seed, "synth", "seed", "random seed");
}

RegionSpec region_from(const CatalogArgs& a) {
  if (!a.box.empty() && !a.ids.empty()) throw UsageError("--box and --ids are mutually exclusive");
  RegionSpec region = RegionSpec::all();
  if (!a.box.empty()) {
    if (a.box.size() != 4) throw UsageError("--box needs lon_min,lon_max,lat_min,lat_max");
    if (a.box[0] > a.box[1] || a.box[2] > a.box[3]) throw UsageError("--box has min > max");
    region = RegionSpec::box(a.box[0], a.box[1], a.box[2], a.box[3]);
  } else if (!a.ids.empty()) {
    region = RegionSpec::ids(a.ids);
  }
  if (!std::isnan(a.min_depth)) region.min_depth_m = a.min_depth;
  return region;
}

void check_catalog_args(const CatalogArgs& a) {
  if (a.footprints.empty()) throw UsageError("--footprints is required");
  if (a.locations.empty()) throw UsageError("--locations is required");
  if (!(a.duration > 0.0) || !std::isfinite(a.duration)) {
    throw UsageError("--duration must be a positive number of years");
  }
  region_from(a);
}

CycloneCatalog load(const CatalogArgs& a, std::ostream& err) {
  std::vector<std::string> warnings;
  auto catalog = load_catalog(a.footprints, a.locations, a.duration, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  return catalog;
}

std::vector<FitMethod> parse_methods(const std::vector<std::string>& names) {
  if (names.empty()) throw UsageError("at least one --method is required");
  std::vector<FitMethod> out;
  for (const auto& name : names) {
    try {
      const auto m = parse_fit_method(name);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    } catch (const std::invalid_argument&) {
      throw UsageError("unknown fit method '" + name + "' (mle or pwm)");
    }
  }
  return out;
}

std::vector<Estimator> parse_estimators(const std::vector<std::string>& names) {
  if (names.empty()) throw UsageError("at least one --estimator is required");
  std::vector<Estimator> out;
  for (const auto& name : names) {
    try {
      const auto e = parse_estimator(name);
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    } catch (const std::invalid_argument&) {
      throw UsageError("unknown estimator '" + name + "' (stme, single or empirical)");
    }
  }
  return out;
}

StmeOptions parse_stme_options(const std::string& tail, const std::string& source) {
  StmeOptions opts;
  if (tail == "conditional") {
    opts.tail = TailModel::Conditional;
  } else if (tail == "mixture") {
    opts.tail = TailModel::Mixture;
  } else {
    throw UsageError("--tail must be conditional or mixture");
  }
  if (source == "retained") {
    opts.exposures = ExposureSource::Retained;
  } else if (source == "all") {
    opts.exposures = ExposureSource::All;
  } else {
    throw UsageError("--exposure-source must be retained or all");
  }
  return opts;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw UsageError("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

std::vector<LocationId> targets_or_region(const std::vector<int>& requested,
                                          const CycloneCatalog& catalog, const RegionSpec& region) {
  if (requested.empty()) return region.resolve(catalog.locations());
  for (const auto id : requested) {
    if (catalog.find_location(id) == nullptr) {
      throw UsageError("location " + std::to_string(id) + " not in catalog");
    }
  }
  return {requested.begin(), requested.end()};
}

void report_failures(std::span<const ReturnValueEstimate> estimates, std::ostream& err) {
  for (const auto& e : estimates) {
    if (e.ok()) continue;
    err << "failed: location " << e.location_id << ' ' << to_string(e.estimator);
    if (e.method) err << ' ' << to_string(*e.method);
    err << " n=" << e.n << ": " << e.flag << '\n';
  }
}

// ---- synth ----

void setup_synth(Command& cmd, SynthWorldConfig& world, OutputArgs& output, std::ostream& out) {
  Binder bind(cmd);
  add_synth_options(bind, world, "");
  add_output_option(bind, output);
  cmd.run = [&world, &output, &out](const nlohmann::json& meta) {
    try {
      world.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto dir = prepare_dir(output.dir);
    const auto catalog = synth_catalog(world);
    write_catalog(catalog, dir / "footprints.csv", dir / "locations.csv");
    write_json(dir / "synth.meta.json", meta);
    out << "events: " << catalog.events().size() << "\nlocations: " << catalog.locations().size()
        << "\nyears: " << csv::format(catalog.duration_years()) << '\n';
    return 0;
  };
}

// ---- stm ----

void setup_stm(Command& cmd, CatalogArgs& cat, OutputArgs& output, std::ostream& out,
               std::ostream& err) {
  Binder bind(cmd);
  add_catalog_options(bind, cat, true);
  add_output_option(bind, output);
  cmd.run = [&cat, &output, &out, &err](const nlohmann::json& meta) {
    check_catalog_args(cat);
    const auto region = region_from(cat);
    const auto data = prepare_region(load(cat, err), region);
    const auto dir = prepare_dir(output.dir);
    write_file(dir / "stm.csv", [&](std::ostream& o) {
      o << "event_id,stm_m,location_id\n";
      for (const auto& r : data.stm) {
        o << r.event_id << ',' << csv::format(r.value_m) << ',' << r.location_id << '\n';
      }
    });
    write_file(dir / "exposures.csv", [&](std::ostream& o) {
      const auto& m = data.exposures;
      o << "event_id,location_id,exposure\n";
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
          if (const auto e = m.at(i, j)) {
            o << m.event_ids()[i] << ',' << m.location_ids()[j] << ',' << csv::format(*e) << '\n';
          }
        }
      }
    });
    write_json(dir / "stm.meta.json", meta);
    const auto [lo, hi] = std::minmax_element(
        data.stm.begin(), data.stm.end(),
        [](const StmRecord& a, const StmRecord& b) { return a.value_m < b.value_m; });
    out << "events: " << data.stm.size() << "\nlocations: " << data.exposures.cols()
        << "\nstm range: " << csv::format(lo->value_m) << " .. " << csv::format(hi->value_m)
        << " m\n";
    return 0;
  };
}

// ---- fit ----

void setup_fit(Command& cmd, CatalogArgs& cat, FitArgs& fit, OutputArgs& output, std::ostream& out,
               std::ostream& err) {
  Binder bind(cmd);
  add_catalog_options(bind, cat, true);
  bind("--n", fit.n, "evd", "n", "number of largest STM values fitted");
  bind("--method", fit.methods, "evd", "method", "mle and/or pwm")->delimiter(',');
  add_output_option(bind, output);
  cmd.run = [&cat, &fit, &output, &out, &err](const nlohmann::json& meta) {
    check_catalog_args(cat);
    const auto methods = parse_methods(fit.methods);
    if (fit.n < 5) throw UsageError("--n must be at least 5");
    const auto data = prepare_region(load(cat, err), region_from(cat));
    if (fit.n > data.stm.size()) {
      throw UsageError("--n " + std::to_string(fit.n) + " exceeds the " +
                       std::to_string(data.stm.size()) + " events in the region");
    }
    const auto top = top_n_events(data.stm, fit.n);
    std::vector<double> values;
    for (const auto& r : top.retained) values.push_back(r.value_m);

    nlohmann::json doc{{"n0", data.stm.size()}, {"n", fit.n}, {"threshold", top.threshold_m}};
    auto& fits = doc["fits"] = nlohmann::json::array();
    bool any = false;
    for (const auto method : methods) {
      FitReport report;
      try {
        report = fit_gpd(method, values, top.threshold_m);
      } catch (const std::invalid_argument& e) {
        report.n = values.size();
        report.method = method;
        report.message = e.what();
      }
      fits.push_back(to_json(report));
      out << to_string(method) << ": ";
      if (report.converged) {
        any = true;
        out << "threshold=" << csv::format(report.params->threshold)
            << " scale=" << csv::format(report.params->scale)
            << " shape=" << csv::format(report.params->shape) << '\n';
      } else {
        out << "failed (" << report.message << ")\n";
      }
    }
    const auto dir = prepare_dir(output.dir);
    write_json(dir / "fit.json", doc);
    write_json(dir / "fit.meta.json", meta);
    return any ? 0 : 1;
  };
}

// ---- return-values ----

void setup_return_values(Command& cmd, CatalogArgs& cat, FitArgs& fit, StmeArgs& st,
                         OutputArgs& output, std::ostream& out, std::ostream& err) {
  Binder bind(cmd);
  add_catalog_options(bind, cat, true, "--duration,--T0");
  bind("--n", fit.n, "evd", "n", "number of largest values fitted");
  bind("--method", fit.methods, "evd", "method", "mle and/or pwm")->delimiter(',');
  bind("--T", st.T, "stme", "T", "return period in years");
  bind("--estimator", st.estimators, "stme", "estimator", "stme, single and/or empirical")
      ->delimiter(',');
  bind("--tail", st.tail, "stme", "tail", "conditional or mixture");
  bind("--exposure-source", st.exposure_source, "stme", "exposure_source", "retained or all");
  bind("--location", st.locations, "stme", "locations", "target location ids (default: region)")
      ->delimiter(',');
  add_output_option(bind, output);
  cmd.run = [&cat, &fit, &st, &output, &out, &err](const nlohmann::json& meta) {
    check_catalog_args(cat);
    const auto methods = parse_methods(fit.methods);
    const auto estimators = parse_estimators(st.estimators);
    const auto options = parse_stme_options(st.tail, st.exposure_source);
    if (fit.n < 5) throw UsageError("--n must be at least 5");
    for (const auto e : estimators) {
      if (e == Estimator::EMPIRICAL && !(st.T < cat.duration)) {
        throw UsageError("the empirical estimator needs --T below the catalog duration");
      }
      if (e != Estimator::EMPIRICAL && !(st.T > cat.duration)) {
        throw UsageError("--T must exceed the catalog duration");
      }
    }
    const auto region = region_from(cat);
    const auto catalog = load(cat, err);
    const auto targets = targets_or_region(st.locations, catalog, region);

    std::vector<ReturnValueEstimate> estimates;
    std::optional<RegionalData> data;
    for (const auto estimator : estimators) {
      if (estimator == Estimator::EMPIRICAL) {
        for (const auto loc : targets) {
          const auto series = location_series(catalog, loc);
          try {
            estimates.push_back(empirical_rv(series, st.T, cat.duration));
          } catch (const std::invalid_argument&) {
            ReturnValueEstimate e;
            e.location_id = loc;
            e.estimator = Estimator::EMPIRICAL;
            e.n = series.values.size();
            e.T_years = st.T;
            e.T0_years = cat.duration;
            e.flag = "sample_too_small";
            estimates.push_back(e);
          }
        }
        continue;
      }
      for (const auto method : methods) {
        if (estimator == Estimator::STME) {
          if (!data) data = prepare_region(catalog, region);
          if (fit.n > data->stm.size()) {
            throw UsageError("--n " + std::to_string(fit.n) + " exceeds the " +
                             std::to_string(data->stm.size()) + " events in the region");
          }
          auto est = estimate_stme(*data, fit.n, st.T, method, targets, options);
          estimates.insert(estimates.end(), est.begin(), est.end());
          continue;
        }
        for (const auto loc : targets) {
          const auto series = location_series(catalog, loc);
          if (series.values.size() >= fit.n) {
            estimates.push_back(single_location_rv(series, fit.n, st.T, cat.duration, method));
          } else {
            ReturnValueEstimate e;
            e.location_id = loc;
            e.estimator = Estimator::SINGLE;
            e.method = method;
            e.n = fit.n;
            e.T_years = st.T;
            e.T0_years = cat.duration;
            e.flag = "sample_too_small";
            estimates.push_back(e);
          }
        }
      }
    }
    const auto dir = prepare_dir(output.dir);
    write_file(dir / "estimates.csv", [&](std::ostream& o) { write_estimates_csv(o, estimates); });
    write_json(dir / "return-values.meta.json", meta);
    report_failures(estimates, err);
    const auto ok = std::count_if(estimates.begin(), estimates.end(),
                                  [](const ReturnValueEstimate& e) { return e.ok(); });
    out << "estimates: " << estimates.size() << " (" << ok << " ok)\n";
    return ok > 0 ? 0 : 1;
  };
}

// ---- diagnostics ----

void setup_diagnostics(Command& cmd, CatalogArgs& cat, DiagnosticsArgs& d, OutputArgs& output,
                       std::ostream& out, std::ostream& err) {
  Binder bind(cmd);
  add_catalog_options(bind, cat, true);
  bind("--n", d.n, "evd", "n", "restrict to the n largest STM events (0 = all)");
  bind("--band", d.band, "diagnostics", "band", "two-sided level of the Kendall tau band");
  bind("--orientation", d.orientations, "diagnostics", "orientations",
       "trend test directions, deg counter-clockwise from east")
      ->delimiter(',');
  bind("--n-perm", d.n_perm, "diagnostics", "n_perm", "permutations per trend test");
  bind("--n-null", d.n_null, "diagnostics", "n_null", "random pairs in the KL null");
  bind("--kl-bins", d.kl_bins, "diagnostics", "kl_bins", "exposure histogram bins");
  bind("--kl-smoothing", d.kl_smoothing, "diagnostics", "kl_smoothing", "pseudo-count per bin");
  bind("--kl-sample-size", d.kl_sample_size, "diagnostics", "kl_sample_size",
       "largest-STM events used in the KL test (0 = all)");
  bind("--kl-location", d.kl_locations, "diagnostics", "kl_locations",
       "locations for the KL test (default: region)")
      ->delimiter(',');
  bind("--seed", d.seed, "diagnostics", "seed", "random seed");
  add_output_option(bind, output);
  cmd.run = [&cat, &d, &output, &out, &err](const nlohmann::json& meta) {
    check_catalog_args(cat);
    if (!(d.band > 0.0 && d.band < 1.0)) throw UsageError("--band must lie in (0, 1)");
    if (d.n_perm < 1) throw UsageError("--n-perm must be positive");
    if (d.n_null < 100) throw UsageError("--n-null must be at least 100");
    if (d.kl_bins < 2) throw UsageError("--kl-bins must be at least 2");
    if (!(d.kl_smoothing > 0.0)) throw UsageError("--kl-smoothing must be positive");
    if (d.n != 0 && d.n < 5) throw UsageError("--n must be 0 or at least 5");
    const auto region = region_from(cat);
    const auto catalog = load(cat, err);
    auto data = prepare_region(catalog, region);
    if (d.n > 0) {
      if (d.n > data.stm.size()) {
        throw UsageError("--n " + std::to_string(d.n) + " exceeds the " +
                         std::to_string(data.stm.size()) + " events in the region");
      }
      std::vector<CycloneEvent> kept;
      for (const auto& r : top_n_events(data.stm, d.n).retained) {
        kept.push_back(*data.catalog.find_event(r.event_id));
      }
      std::sort(kept.begin(), kept.end(),
                [](const CycloneEvent& a, const CycloneEvent& b) { return a.id < b.id; });
      data = prepare_region(data.catalog.with_events(std::move(kept), data.catalog.duration_years()),
                            RegionSpec::all());
    }
    const auto kl_targets = targets_or_region(d.kl_locations, data.catalog, RegionSpec::all());

    Rng rng(d.seed);
    const auto taus = tau_map(data.stm, data.exposures, d.band);
    nlohmann::json doc{{"events", data.stm.size()}, {"tau", to_json(taus)}};
    auto& trends = doc["trend"] = nlohmann::json::array();
    for (const double angle : d.orientations) {
      trends.push_back(to_json(trend_permutation_test(data.stm, data.catalog, angle, d.n_perm, rng)));
    }
    KlOptions kl_opts{d.kl_bins, d.kl_smoothing, d.kl_sample_size};
    auto& kls = doc["kl"] = nlohmann::json::array();
    std::vector<double> non_exceedance;
    for (const auto loc : kl_targets) {
      try {
        const auto kl = exposure_kl_test(data.exposures, data.stm, loc, d.n_null, rng, kl_opts);
        kls.push_back(to_json(kl));
        non_exceedance.push_back(kl.non_exceedance);
      } catch (const std::exception& e) {
        kls.push_back({{"location_id", loc}, {"skipped", e.what()}});
      }
    }
    if (non_exceedance.size() >= 5) {
      const auto ks = ks_uniformity(non_exceedance);
      doc["kl_uniformity"] = {{"statistic", ks.statistic}, {"p_value", ks.p_value}};
    }

    const auto dir = prepare_dir(output.dir);
    write_json(dir / "diagnostics.json", doc);
    const double z = boost::math::quantile(boost::math::normal(), 0.5 * (1.0 + taus.band));
    write_file(dir / "tau_map.csv", [&](std::ostream& o) {
      o << "location_id,lon_deg,lat_deg,n,tau,null_sd,band,lower,upper,flag\n";
      for (const auto& r : taus.results) {
        const auto* l = data.catalog.find_location(r.location_id);
        const double half = z * r.null_sd;
        o << r.location_id << ',' << csv::format(l->lon_deg) << ',' << csv::format(l->lat_deg)
          << ',' << r.n << ',' << csv::format(r.tau) << ',' << csv::format(r.null_sd) << ','
          << csv::format(r.band) << ',' << csv::format(-half) << ',' << csv::format(half) << ','
          << to_string(r.flag) << '\n';
      }
    });
    write_json(dir / "diagnostics.meta.json", meta);
    out << "events: " << data.stm.size() << "\ntau band: " << csv::format(taus.band)
        << "\ntau exceedance fraction: " << csv::format(taus.exceedance_fraction) << '\n';
    return 0;
  };
}

// ---- experiment ----

void setup_experiment(Command& cmd, CatalogArgs& cat, SynthWorldConfig& world, ExperimentArgs& x,
                      OutputArgs& output, std::ostream& out, std::ostream& err) {
  Binder bind(cmd);
  add_catalog_options(bind, cat, false);
  add_synth_options(bind, world, "synth-");
  bind("--T0", x.T0, "experiments", "T0", "length of each resampled period (years)");
  bind("--T", x.T, "experiments", "T", "return period (years)");
  bind("--n", x.n_ladder, "experiments", "n", "ladder of sample sizes")->delimiter(',');
  bind("--replicates", x.replicates, "experiments", "replicates", "number of resampled periods");
  bind("--seed", x.seed, "experiments", "seed", "master random seed");
  bind("--jobs", x.jobs, "experiments", "jobs", "worker threads (0 = all cores)");
  bind("--method", x.methods, "evd", "method", "mle and/or pwm")->delimiter(',');
  bind("--estimator", x.estimators, "stme", "estimator", "stme and/or single")->delimiter(',');
  bind("--tail", x.tail, "stme", "tail", "conditional or mixture");
  bind("--exposure-source", x.exposure_source, "stme", "exposure_source", "retained or all");
  bind("--location", x.locations, "stme", "locations", "target location ids (default: region)")
      ->delimiter(',');
  add_output_option(bind, output);
  cmd.run = [&cat, &world, &x, &output, &out, &err](const nlohmann::json& meta) {
    const bool from_files = !cat.footprints.empty() || !cat.locations.empty();
    if (from_files) {
      check_catalog_args(cat);
    } else {
      try {
        world.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    const auto region = region_from(cat);
    ExperimentConfig config;
    config.T0_years = x.T0;
    config.T_years = x.T;
    config.n_ladder = x.n_ladder;
    config.replicates = x.replicates;
    config.methods = parse_methods(x.methods);
    config.estimators = parse_estimators(x.estimators);
    config.seed = x.seed;
    config.stme = parse_stme_options(x.tail, x.exposure_source);
    config.locations = {0};  // placeholder until the catalog is known
    try {
      config.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }

    const auto catalog = from_files ? load(cat, err) : synth_catalog(world);
    config.locations = targets_or_region(x.locations, catalog, region);
    if (config.locations.empty()) throw UsageError("no target locations in the region");
    if (config.T0_years > catalog.duration_years()) {
      throw UsageError("--T0 exceeds the catalog duration");
    }

    const auto dir = prepare_dir(output.dir);
    const auto rep_dir = dir / "replicates";
    std::error_code ec;
    fs::create_directories(rep_dir, ec);
    if (ec) throw UsageError("cannot create " + rep_dir.string());

    // Resuming is only sound for the same configuration.
    auto fingerprint = meta["config"];
    fingerprint["experiments"].erase("jobs");
    fingerprint["experiments"].erase("replicates");
    fingerprint.erase("output");
    const auto fp_path = rep_dir / "fingerprint.json";
    if (fs::exists(fp_path)) {
      std::ifstream in(fp_path);
      nlohmann::json previous;
      try {
        previous = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception&) {
      }
      if (previous != fingerprint) {
        throw UsageError(rep_dir.string() +
                         " holds replicates of a different configuration; use another --out");
      }
    } else {
      write_json(fp_path, fingerprint);
    }

    const auto rep_path = [&](std::size_t i) {
      std::string name = std::to_string(i);
      name.insert(0, name.size() < 4 ? 4 - name.size() : 0, '0');
      return rep_dir / ("rep_" + name + ".csv");
    };
    std::atomic<std::size_t> done{0};
    ExperimentHooks hooks;
    hooks.load = [&](std::size_t i) -> std::optional<ReplicateResult> {
      const auto path = rep_path(i);
      if (!fs::exists(path)) return std::nullopt;
      try {
        auto r = read_replicate_file(path);
        if (r.replicate != i || r.estimates.empty()) return std::nullopt;
        ++done;
        return r;
      } catch (const InputError&) {
        return std::nullopt;
      }
    };
    hooks.completed = [&](const ReplicateResult& r) {
      write_replicate_file(rep_path(r.replicate), r);
      err << "replicate " << r.replicate << " done (" << ++done << '/' << config.replicates
          << ")\n";
    };
    const auto results = run_experiment(catalog, region, config, x.jobs, hooks);

    const auto summary = summarize(results);
    const auto truth = ground_truth(catalog, config.locations, config.T_years);
    const auto metrics = performance_metrics(summary, truth);

    write_file(dir / "results.csv", [&](std::ostream& o) { write_results_csv(o, results); });
    write_file(dir / "summary.csv", [&](std::ostream& o) { write_summary_csv(o, summary); });
    write_file(dir / "empirical.csv", [&](std::ostream& o) { write_estimates_csv(o, truth); });
    write_file(dir / "metrics.csv",
               [&](std::ostream& o) { write_metrics_csv(o, metrics, config.n_ladder); });
    write_json(dir / "experiment.meta.json", meta);

    std::size_t ok = 0;
    std::size_t total = 0;
    for (const auto& r : results) {
      for (const auto& e : r.estimates) {
        ++total;
        ok += e.ok() ? 1 : 0;
      }
    }
    out << "replicates: " << results.size() << "\nestimates: " << total << " (" << ok
        << " ok)\nlocations: " << config.locations.size() << '\n';
    return ok > 0 ? 0 : 1;
  };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Return values of cyclone-induced wave height from space-time maxima and exposures",
               "stme"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CatalogArgs cat;
  OutputArgs output;
  FitArgs fit;
  StmeArgs st;
  DiagnosticsArgs diag;
  ExperimentArgs expt;
  SynthWorldConfig world;

  std::vector<std::unique_ptr<Command>> commands;
  const auto add = [&](const char* name, const char* help) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->app = app.add_subcommand(name, help);
    cmd->app->add_option("--config", cmd->config_path, "config file ([section] key = value)");
    commands.push_back(std::move(cmd));
    return *commands.back();
  };
  setup_synth(add("synth", "generate a synthetic cyclone catalog"), world, output, out);
  setup_stm(add("stm", "extract space-time maxima and exposures"), cat, output, out, err);
  setup_fit(add("fit", "fit the STM tail"), cat, fit, output, out, err);
  setup_return_values(add("return-values", "estimate T-year return values"), cat, fit, st, output,
                      out, err);
  setup_diagnostics(add("diagnostics", "check the model assumptions"), cat, diag, output, out, err);
  setup_experiment(add("experiment", "resampling experiment against a long catalog"), cat, world,
                   expt, output, out, err);

  std::set<OptionTable::Key> known;
  for (const auto& c : commands) {
    for (const auto& [key, opt] : c->table.bindings()) known.insert(key);
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  for (auto& c : commands) {
    if (!c->app->parsed()) continue;
    try {
      if (!c->config_path.empty()) c->table.apply(read_config(c->config_path), known);
      const nlohmann::json meta{{"command", c->app->get_name()},
                                {"version", std::string(kVersion)},
                                {"config", c->table.echo()}};
      return c->run(meta);
    } catch (const UsageError& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    } catch (const InputError& e) {
      err << "error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}

}  // namespace stme::cli
