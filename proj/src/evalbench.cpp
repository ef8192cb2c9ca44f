#include "histlearn/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "histlearn/equihist.hpp"
#include "histlearn/kernels.hpp"
#include "histlearn/online.hpp"
#include "histlearn/rng.hpp"
#include "histlearn/sphist.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace histlearn::evalbench {

double avg_rel_error(std::span<const double> truths, std::span<const double> estimates) {
  if (truths.size() != estimates.size()) {
    throw std::invalid_argument("truth and estimate lists differ in length");
  }
  if (truths.empty()) throw std::invalid_argument("error metric needs at least one query");
  double sum = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    sum += std::abs(truths[i] - estimates[i]) / std::max(100.0, truths[i]);
  }
  return sum / static_cast<double>(truths.size()) * 100.0;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::equihist:
      return "equihist";
    case Method::sphist:
      return "sphist";
    case Method::online_equihist:
      return "online-equihist";
  }
  return "?";
}

std::string sweep_var_name(SweepVar v) {
  switch (v) {
    case SweepVar::train_queries:
      return "train_queries";
    case SweepVar::buckets:
      return "buckets";
    case SweepVar::range:
      return "range";
  }
  return "?";
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t c = s.find(sep, pos);
    out.push_back(s.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::int64_t to_int(const std::string& s) {
  std::size_t used = 0;
  const std::int64_t v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad integer: " + s);
  return v;
}

Method parse_method(const std::string& s) {
  if (s == "equihist") return Method::equihist;
  if (s == "sphist") return Method::sphist;
  if (s == "online-equihist") return Method::online_equihist;
  throw std::invalid_argument("unknown method: " + s);
}

workload::Preset parse_preset(const std::string& s) {
  if (s == "type1") return workload::Preset::type1;
  if (s == "type2") return workload::Preset::type2;
  if (s == "gauss-nd" || s == "gauss2d" || s == "gauss3d") return workload::Preset::gauss_nd;
  throw std::invalid_argument("unknown dataset preset: " + s);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  cfg.sweep_values.clear();
  std::string line;
  std::int64_t lineno = 0;
  bool dims_hint = false;
  std::int64_t dims = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "dataset") {
        cfg.preset = parse_preset(value);
        if (value == "gauss2d") {
          dims = 2;
          dims_hint = true;
        } else if (value == "gauss3d") {
          dims = 3;
          dims_hint = true;
        }
      } else if (key == "range") {
        cfg.ranges.clear();
        for (const auto& tok : split(value, ',')) cfg.ranges.push_back(to_int(trim(tok)));
      } else if (key == "records") {
        cfg.records = to_int(value);
      } else if (key == "query_model") {
        if (value == "uniform") {
          cfg.model = workload::QueryModel::uniform;
        } else if (value == "data-dependent") {
          cfg.model = workload::QueryModel::data_dependent;
        } else {
          throw std::invalid_argument("unknown query model: " + value);
        }
      } else if (key == "max_volume_fraction") {
        cfg.max_volume_fraction = std::stod(value);
      } else if (key == "methods") {
        cfg.methods.clear();
        for (const auto& tok : split(value, ',')) cfg.methods.push_back(parse_method(trim(tok)));
      } else if (key == "buckets") {
        cfg.buckets = to_int(value);
      } else if (key == "train_queries") {
        cfg.train_queries = to_int(value);
      } else if (key == "test_queries") {
        cfg.test_queries = to_int(value);
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& tok : split(value, ',')) {
          cfg.seeds.push_back(static_cast<std::uint64_t>(to_int(trim(tok))));
        }
      } else if (key == "sweep") {
        if (value == "train_queries") {
          cfg.sweep = SweepVar::train_queries;
        } else if (value == "buckets") {
          cfg.sweep = SweepVar::buckets;
        } else if (value == "range") {
          cfg.sweep = SweepVar::range;
        } else {
          throw std::invalid_argument("unknown sweep variable: " + value);
        }
      } else if (key == "sweep_values") {
        cfg.sweep_values.clear();
        for (const auto& tok : split(value, ',')) cfg.sweep_values.push_back(to_int(trim(tok)));
      } else if (key == "online_gamma") {
        cfg.online_gamma = std::stod(value);
      } else if (key == "omp_budget") {
        cfg.omp_budget = to_int(value);
      } else if (key == "omp_normalize") {
        cfg.omp_normalize = to_int(value) != 0;
      } else {
        throw std::invalid_argument("unknown key: " + key);
      }
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (dims_hint && static_cast<std::int64_t>(cfg.ranges.size()) != dims) {
    cfg.ranges.assign(dims, cfg.ranges.empty() ? 32 : cfg.ranges[0]);
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (sweep_values.empty()) throw std::invalid_argument("sweep needs at least one value");
  if (methods.empty()) throw std::invalid_argument("sweep needs at least one method");
  if (test_queries < 1) throw std::invalid_argument("test size must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  AttributeDomain(ranges).validate();
}

namespace {

struct CellResult {
  double err = 0.0;
  double wall_ms = 0.0;
};

CellResult run_cell(const ExperimentConfig& cfg, Method method, std::int64_t sweep_value,
                    std::uint64_t seed) {
  std::vector<std::int64_t> ranges = cfg.ranges;
  std::int64_t buckets = cfg.buckets;
  std::int64_t train_n = cfg.train_queries;
  switch (cfg.sweep) {
    case SweepVar::train_queries:
      train_n = sweep_value;
      break;
    case SweepVar::buckets:
      buckets = sweep_value;
      break;
    case SweepVar::range:
      for (auto& r : ranges) r = sweep_value;
      break;
  }

  const AttributeDomain dom(ranges);
  workload::MixtureSpec spec;
  switch (cfg.preset) {
    case workload::Preset::type1:
      spec = workload::MixtureSpec::type1(ranges[0], cfg.records);
      break;
    case workload::Preset::type2:
      spec = workload::MixtureSpec::type2(ranges[0], cfg.records);
      break;
    default:
      spec = workload::MixtureSpec::gauss_nd(dom, cfg.records);
      break;
  }
  if (dom.dims() > 1) spec.domain = dom;

  const FrequencyTensor freq = gen_gaussian_mixture(spec, Rng::mix(seed, 0xDA7A));
  const std::vector<RangeQuery> train_q = workload::gen_queries(
      {cfg.model, train_n, cfg.max_volume_fraction, Rng::mix(seed, 0x7261)}, freq);
  const std::vector<RangeQuery> test_q = workload::gen_queries(
      {cfg.model, cfg.test_queries, cfg.max_volume_fraction, Rng::mix(seed, 0x7465)}, freq);
  const std::vector<QueryFeedbackRecord> train = workload::label_queries(freq, train_q);
  const std::vector<QueryFeedbackRecord> test = workload::label_queries(freq, test_q);

  std::vector<double> truths(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truths[i] = test[i].cardinality;

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> est;
  switch (method) {
    case Method::equihist: {
      const auto layout = equihist::EquiLayout::split_total(dom, buckets);
      auto [ls, hist] = equihist::fit(train, layout);
      est = kernels::estimate_batch(hist, test_q);
      break;
    }
    case Method::sphist: {
      sphist::FitOptions opts;
      opts.omp_budget = cfg.omp_budget;
      opts.omp.normalize_columns = cfg.omp_normalize;
      const sphist::FitResult res = sphist::fit(train, dom, buckets, opts);
      // 1-D reports the reduced histogram; higher dimensions estimate from
      // the coefficients directly.
      est = dom.dims() == 1 ? kernels::estimate_batch(res.hist, test_q)
                            : kernels::estimate_batch(res.sketch, test_q);
      break;
    }
    case Method::online_equihist: {
      const auto layout = equihist::EquiLayout::split_total(dom, buckets);
      online::OnlineState state(layout, 0.0, cfg.online_gamma);
      for (const QueryFeedbackRecord& rec : train) state.observe(rec);
      est = kernels::estimate_batch(state.histogram(), test_q);
      break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();

  for (double& e : est) e = std::max(0.0, e);
  CellResult out;
  out.err = avg_rel_error(truths, est);
  out.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return out;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg, int jobs) {
  cfg.validate();
  const std::int64_t n_values = static_cast<std::int64_t>(cfg.sweep_values.size());
  const std::int64_t n_seeds = static_cast<std::int64_t>(cfg.seeds.size());
  const std::int64_t n_methods = static_cast<std::int64_t>(cfg.methods.size());
  const std::int64_t n_cells = n_values * n_seeds * n_methods;

  std::vector<CellResult> cells(n_cells);
  std::vector<std::string> errors(n_cells);
#ifdef _OPENMP
  const int nt = jobs > 0 ? jobs : 1;
#else
  const int nt = 1;
  (void)jobs;
#endif
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt) if (nt > 1)
  for (std::int64_t cell = 0; cell < n_cells; ++cell) {
    const std::int64_t vi = cell / (n_seeds * n_methods);
    const std::int64_t mi = cell / n_seeds % n_methods;
    const std::int64_t si = cell % n_seeds;
    try {
      cells[cell] = run_cell(cfg, cfg.methods[mi], cfg.sweep_values[vi], cfg.seeds[si]);
    } catch (const std::exception& e) {
      errors[cell] = std::string(e.what()) + " (method " + method_name(cfg.methods[mi]) +
                     ", " + sweep_var_name(cfg.sweep) + "=" +
                     std::to_string(cfg.sweep_values[vi]) + ", seed " +
                     std::to_string(cfg.seeds[si]) + ")";
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::runtime_error(e);
  }

  ResultTable table;
  for (std::int64_t vi = 0; vi < n_values; ++vi) {
    for (std::int64_t mi = 0; mi < n_methods; ++mi) {
      ResultRow row;
      row.method = method_name(cfg.methods[mi]);
      row.sweep_var = sweep_var_name(cfg.sweep);
      row.sweep_value = cfg.sweep_values[vi];
      double sum = 0.0, wall = 0.0;
      for (std::int64_t si = 0; si < n_seeds; ++si) {
        const CellResult& c = cells[(vi * n_methods + mi) * n_seeds + si];
        row.per_seed_err.push_back(c.err);
        sum += c.err;
        wall += c.wall_ms;
      }
      row.seeds = static_cast<int>(n_seeds);
      row.mean_err_pct = sum / static_cast<double>(n_seeds);
      row.wall_ms = wall / static_cast<double>(n_seeds);
      double var = 0.0;
      for (double e : row.per_seed_err) var += (e - row.mean_err_pct) * (e - row.mean_err_pct);
      row.std_err_pct = n_seeds > 1 ? std::sqrt(var / static_cast<double>(n_seeds - 1)) : 0.0;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

void emit_results(const ResultTable& table, const std::string& csv_path,
                  const std::string& plot_path) {
  if (table.rows.empty()) throw std::invalid_argument("result table is empty");

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << "method,sweep_var,sweep_value,mean_err_pct,std_err_pct,seeds,wall_ms\n";
  char buf[128];
  for (const ResultRow& r : table.rows) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g", r.mean_err_pct, r.std_err_pct);
    csv << r.method << ',' << r.sweep_var << ',' << r.sweep_value << ',' << buf << ','
        << r.seeds << ',';
    std::snprintf(buf, sizeof(buf), "%.4g", r.wall_ms);
    csv << buf << '\n';
  }
  csv.close();
  if (!csv) throw std::runtime_error("write failed: " + csv_path);

  // Standalone gnuplot script with the series inlined.
  std::map<std::string, std::vector<const ResultRow*>> by_method;
  for (const ResultRow& r : table.rows) by_method[r.method].push_back(&r);

  std::ofstream gp(plot_path);
  if (!gp) throw std::runtime_error("cannot write " + plot_path);
  gp << "set datafile separator ','\n";
  gp << "set logscale y\n";
  gp << "set xlabel '" << table.rows.front().sweep_var << "'\n";
  gp << "set ylabel 'avg relative error (%)'\n";
  gp << "set key top right\n";
  int idx = 0;
  for (const auto& [method, rows] : by_method) {
    gp << "$data" << idx << " << EOD\n";
    for (const ResultRow* r : rows) {
      std::snprintf(buf, sizeof(buf), "%lld,%.10g", static_cast<long long>(r->sweep_value),
                    r->mean_err_pct);
      gp << buf << '\n';
    }
    gp << "EOD\n";
    ++idx;
  }
  gp << "plot ";
  idx = 0;
  for (const auto& [method, rows] : by_method) {
    if (idx > 0) gp << ", ";
    gp << "$data" << idx << " using 1:2 with linespoints title '" << method << "'";
    ++idx;
  }
  gp << '\n';
  gp.close();
  if (!gp) throw std::runtime_error("write failed: " + plot_path);
}

}  // namespace histlearn::evalbench
