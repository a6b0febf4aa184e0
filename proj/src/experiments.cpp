#include "stme/experiments.hpp"

#include "stme/baselines.hpp"
#include "stme/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace stme {

void ExperimentConfig::validate() const {
  if (!(T0_years > 0.0)) throw std::invalid_argument("experiment: T0 must be positive");
  if (!(T_years > T0_years)) throw std::invalid_argument("experiment: T must exceed T0");
  if (n_ladder.empty()) throw std::invalid_argument("experiment: n ladder is empty");
  for (const auto n : n_ladder) {
    if (n < 5) throw std::invalid_argument("experiment: n ladder values must be >= 5");
  }
  if (replicates < 2) throw std::invalid_argument("experiment: need at least 2 replicates");
  if (methods.empty()) throw std::invalid_argument("experiment: no fit methods");
  if (estimators.empty()) throw std::invalid_argument("experiment: no estimators");
  for (const auto e : estimators) {
    if (e == Estimator::EMPIRICAL) {
      throw std::invalid_argument("experiment: EMPIRICAL is a benchmark, not a replicate estimator");
    }
  }
  if (locations.empty()) throw std::invalid_argument("experiment: no target locations");
}

CycloneCatalog sample_period(const CycloneCatalog& catalog, double T0_years, Rng& rng) {
  const double TL = catalog.duration_years();
  if (!(T0_years > 0.0) || T0_years > TL) {
    throw std::invalid_argument("sample_period: need 0 < T0 <= catalog duration");
  }
  const std::size_t n0 = catalog.events().size();
  const auto count = static_cast<std::size_t>(
      std::llround(static_cast<double>(n0) * T0_years / TL));
  std::vector<std::size_t> idx(n0);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng() % (n0 - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<CycloneEvent> events;
  events.reserve(count);
  for (const auto i : idx) events.push_back(catalog.events()[i]);
  return catalog.with_events(std::move(events), T0_years);
}

ReplicateResult run_replicate(const CycloneCatalog& catalog, const RegionSpec& region,
                              const ExperimentConfig& config, std::size_t index) {
  Rng rng(derive_seed(config.seed, index));
  const auto sampled = sample_period(catalog, config.T0_years, rng);
  const bool want_stme = std::find(config.estimators.begin(), config.estimators.end(),
                                   Estimator::STME) != config.estimators.end();
  const bool want_single = std::find(config.estimators.begin(), config.estimators.end(),
                                     Estimator::SINGLE) != config.estimators.end();

  std::optional<RegionalData> data;
  try {
    data = prepare_region(sampled, region);
  } catch (const InputError&) {
    // An empty regional sample leaves STM-E undefined for this replicate.
  }
  std::map<LocationId, std::optional<LocationSeries>> series;
  for (const auto loc : config.locations) {
    if (sampled.find_location(loc)) series[loc] = location_series(sampled, loc);
  }

  ReplicateResult result{index, {}};
  for (const auto n : config.n_ladder) {
    for (const auto method : config.methods) {
      if (want_stme) {
        if (data) {
          auto est = estimate_stme(*data, n, config.T_years, method, config.locations, config.stme);
          result.estimates.insert(result.estimates.end(), est.begin(), est.end());
        } else {
          for (const auto loc : config.locations) {
            ReturnValueEstimate e;
            e.location_id = loc;
            e.estimator = Estimator::STME;
            e.method = method;
            e.n = n;
            e.T_years = config.T_years;
            e.T0_years = config.T0_years;
            e.flag = "region_empty";
            result.estimates.push_back(e);
          }
        }
      }
      if (want_single) {
        for (const auto loc : config.locations) {
          const auto& s = series[loc];
          if (s && s->values.size() >= n) {
            result.estimates.push_back(
                single_location_rv(*s, n, config.T_years, config.T0_years, method));
            continue;
          }
          ReturnValueEstimate e;
          e.location_id = loc;
          e.estimator = Estimator::SINGLE;
          e.method = method;
          e.n = n;
          e.T_years = config.T_years;
          e.T0_years = config.T0_years;
          e.flag = s ? "sample_too_small" : "unknown_location";
          result.estimates.push_back(e);
        }
      }
    }
  }
  return result;
}

std::vector<ReplicateResult> run_experiment(const CycloneCatalog& catalog, const RegionSpec& region,
                                            const ExperimentConfig& config, unsigned jobs,
                                            const ExperimentHooks& hooks) {
  config.validate();
  if (config.T0_years > catalog.duration_years()) {
    throw std::invalid_argument("experiment: T0 exceeds catalog duration");
  }
  if (region.resolve(catalog.locations()).empty()) {
    throw std::invalid_argument("experiment: region contains no catalog locations");
  }
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, config.replicates));

  std::vector<ReplicateResult> results(config.replicates);
  std::atomic<std::size_t> next{0};
  std::mutex hook_mutex;
  std::exception_ptr error;

  const auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.replicates) return;
      try {
        std::optional<ReplicateResult> cached;
        if (hooks.load) {
          std::lock_guard lock(hook_mutex);
          cached = hooks.load(i);
        }
        if (cached) {
          results[i] = std::move(*cached);
          continue;
        }
        results[i] = run_replicate(catalog, region, config, i);
        if (hooks.completed) {
          std::lock_guard lock(hook_mutex);
          hooks.completed(results[i]);
        }
      } catch (...) {
        std::lock_guard lock(hook_mutex);
        if (!error) error = std::current_exception();
        next = config.replicates;
        return;
      }
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return results;
}

const CellSummary* SummaryStats::find(const CellKey& key) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), key,
                                   [](const CellSummary& c, const CellKey& k) { return c.key < k; });
  return (it != cells.end() && it->key == key) ? &*it : nullptr;
}

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("percentile: p outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SummaryStats summarize(std::span<const ReplicateResult> results) {
  std::map<CellKey, std::pair<std::vector<double>, std::size_t>> groups;
  for (const auto& r : results) {
    for (const auto& e : r.estimates) {
      if (!e.method) continue;
      auto& [values, failures] = groups[CellKey{e.location_id, e.estimator, *e.method, e.n}];
      if (e.ok()) {
        values.push_back(e.value_m);
      } else {
        ++failures;
      }
    }
  }
  SummaryStats summary;
  for (auto& [key, group] : groups) {
    auto& [values, failures] = group;
    CellSummary cell;
    cell.key = key;
    cell.count = values.size();
    cell.failures = failures;
    cell.valid = values.size() >= 2;
    if (!values.empty()) {
      std::sort(values.begin(), values.end());
      cell.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      cell.median = percentile(values, 0.5);
      cell.q025 = percentile(values, 0.025);
      cell.q25 = percentile(values, 0.25);
      cell.q75 = percentile(values, 0.75);
      cell.q975 = percentile(values, 0.975);
      for (const double v : values) {
        if (v < cell.q025 || v > cell.q975) cell.outliers.push_back(v);
      }
    }
    summary.cells.push_back(std::move(cell));
  }
  return summary;
}

const MetricRow* PerformanceMetrics::find(std::size_t n, FitMethod method,
                                          Estimator estimator) const {
  for (const auto& r : rows) {
    if (r.n == n && r.method == method && r.estimator == estimator) return &r;
  }
  return nullptr;
}

PerformanceMetrics performance_metrics(const SummaryStats& summary,
                                       std::span<const ReturnValueEstimate> empirical,
                                       Estimator reference) {
  std::map<LocationId, double> truth;
  for (const auto& e : empirical) truth[e.location_id] = e.value_m;

  struct Accum {
    std::size_t count{0};
    double bias_mean{0.0};
    double bias_median{0.0};
    double w50{0.0};
    double u{0.0};
    std::size_t u_count{0};
  };
  std::map<std::tuple<std::size_t, FitMethod, Estimator>, Accum> acc;
  for (const auto& cell : summary.cells) {
    if (!cell.valid) continue;
    const auto t = truth.find(cell.key.location_id);
    if (t == truth.end()) {
      throw std::invalid_argument("performance_metrics: no empirical value at location " +
                                  std::to_string(cell.key.location_id));
    }
    if (!std::isfinite(t->second)) continue;
    auto& a = acc[{cell.key.n, cell.key.method, cell.key.estimator}];
    const double width = cell.q75 - cell.q25;
    ++a.count;
    a.bias_mean += cell.mean - t->second;
    a.bias_median += cell.median - t->second;
    a.w50 += width;
    const auto* ref = summary.find(CellKey{cell.key.location_id, reference, cell.key.method, cell.key.n});
    if (ref && ref->valid && ref->q75 - ref->q25 > 0.0) {
      a.u += width / (ref->q75 - ref->q25) - 1.0;
      ++a.u_count;
    }
  }
  PerformanceMetrics metrics;
  metrics.reference = reference;
  for (const auto& [key, a] : acc) {
    const auto& [n, method, estimator] = key;
    const double c = static_cast<double>(a.count);
    MetricRow row;
    row.n = n;
    row.method = method;
    row.estimator = estimator;
    row.locations = a.count;
    row.bias_mean = a.bias_mean / c;
    row.bias_median = a.bias_median / c;
    row.w50 = a.w50 / c;
    row.u = a.u_count > 0 ? a.u / static_cast<double>(a.u_count) : std::nan("");
    metrics.rows.push_back(row);
  }
  return metrics;
}

std::vector<ReturnValueEstimate> ground_truth(const CycloneCatalog& catalog,
                                              std::span<const LocationId> locations,
                                              double T_years) {
  std::vector<ReturnValueEstimate> out;
  for (const auto loc : locations) {
    const auto series = location_series(catalog, loc);
    try {
      out.push_back(empirical_rv(series, T_years, catalog.duration_years()));
    } catch (const std::invalid_argument&) {
      ReturnValueEstimate e;
      e.location_id = loc;
      e.estimator = Estimator::EMPIRICAL;
      e.n = series.values.size();
      e.T_years = T_years;
      e.T0_years = catalog.duration_years();
      e.flag = "sample_too_small";
      out.push_back(e);
    }
  }
  return out;
}

void write_results_csv(std::ostream& out, std::span<const ReplicateResult> results) {
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    for (const auto& e : r.estimates) {
      out << r.replicate << ',';
      write_estimate_row(out, e);
    }
  }
}

void write_replicate_file(const std::filesystem::path& path, const ReplicateResult& result) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw InputError("cannot write " + tmp.string());
    write_results_csv(out, std::span(&result, 1));
  }
  std::filesystem::rename(tmp, path);
}

ReplicateResult read_replicate_file(const std::filesystem::path& path) {
  csv::Reader reader(path, kResultsHeader);
  ReplicateResult result;
  bool first = true;
  while (auto row = reader.next()) {
    const auto& f = *row;
    if (f.size() != 9) throw InputError(reader.where() + "expected 9 fields");
    const auto rep = csv::parse_int(f[0]);
    const auto loc = csv::parse_int(f[1]);
    const auto n = csv::parse_int(f[4]);
    const auto T = csv::parse_double(f[5]);
    const auto T0 = csv::parse_double(f[6]);
    if (!rep || !loc || !n || !T || !T0) throw InputError(reader.where() + "malformed row");
    if (first) {
      result.replicate = static_cast<std::size_t>(*rep);
      first = false;
    }
    ReturnValueEstimate e;
    e.location_id = static_cast<LocationId>(*loc);
    e.estimator = parse_estimator(f[2]);
    if (f[3] != "-") e.method = parse_fit_method(f[3]);
    e.n = static_cast<std::size_t>(*n);
    e.T_years = *T;
    e.T0_years = *T0;
    e.value_m = f[7] == "nan" ? std::nan("") : csv::parse_double(f[7]).value_or(std::nan(""));
    e.flag = f[8];
    result.estimates.push_back(std::move(e));
  }
  return result;
}

void write_summary_csv(std::ostream& out, const SummaryStats& summary) {
  out << "location_id,estimator,method,n,count,failures,mean,median,q025,q25,q75,q975,"
         "n_outliers,valid\n";
  for (const auto& c : summary.cells) {
    out << c.key.location_id << ',' << to_string(c.key.estimator) << ','
        << to_string(c.key.method) << ',' << c.key.n << ',' << c.count << ',' << c.failures << ','
        << csv::format(c.mean) << ',' << csv::format(c.median) << ',' << csv::format(c.q025) << ','
        << csv::format(c.q25) << ',' << csv::format(c.q75) << ',' << csv::format(c.q975) << ','
        << c.outliers.size() << ',' << (c.valid ? 1 : 0) << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const PerformanceMetrics& metrics,
                       std::span<const std::size_t> n_ladder) {
  out << "method,quantity";
  for (const auto n : n_ladder) out << ",n=" << n;
  out << '\n';
  struct Quantity {
    const char* name;
    double MetricRow::*field;
  };
  const Quantity quantities[] = {{"bias_mean", &MetricRow::bias_mean},
                                 {"bias_median", &MetricRow::bias_median},
                                 {"w50", &MetricRow::w50},
                                 {"u", &MetricRow::u}};
  for (const auto method : {FitMethod::MLE, FitMethod::PWM}) {
    for (const auto& q : quantities) {
      for (const auto estimator : {Estimator::STME, Estimator::SINGLE}) {
        bool any = false;
        for (const auto n : n_ladder) any = any || metrics.find(n, method, estimator) != nullptr;
        if (!any) continue;
        out << to_string(method) << ',' << q.name << '_' << to_string(estimator);
        for (const auto n : n_ladder) {
          const auto* row = metrics.find(n, method, estimator);
          out << ',' << (row ? csv::format(row->*q.field) : std::string("nan"));
        }
        out << '\n';
      }
    }
  }
}

}  // namespace stme
