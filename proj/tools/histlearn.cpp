// Command-line front end: dataset/workload generation, training, estimation,
// evaluation, online simulation, and experiment sweeps over CSV files.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "histlearn/equihist.hpp"
#include "histlearn/evalbench.hpp"
#include "histlearn/io.hpp"
#include "histlearn/kernels.hpp"
#include "histlearn/online.hpp"
#include "histlearn/rng.hpp"
#include "histlearn/sphist.hpp"
#include "histlearn/workload.hpp"

namespace {

using namespace histlearn;

std::vector<std::int64_t> parse_ranges(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoll(tok));
  return out;
}

workload::MixtureSpec build_spec(const std::string& preset, const std::string& ranges_str,
                                 std::int64_t records, const std::string& components) {
  const AttributeDomain dom(parse_ranges(ranges_str));
  if (preset == "type1") {
    auto spec = workload::MixtureSpec::type1(dom.ranges[0], records);
    spec.domain = dom;
    return spec;
  }
  if (preset == "type2") {
    auto spec = workload::MixtureSpec::type2(dom.ranges[0], records);
    spec.domain = dom;
    return spec;
  }
  if (preset == "gauss-nd") return workload::MixtureSpec::gauss_nd(dom, records);
  if (preset == "custom") {
    std::vector<workload::GaussianComponent> comps;
    std::stringstream ss(components);
    std::string comp;
    while (std::getline(ss, comp, ';')) {
      std::stringstream cs(comp);
      std::string means, var, weight;
      if (!std::getline(cs, means, ':') || !std::getline(cs, var, ':')) {
        throw std::runtime_error("component format is mean1,..,meand:variance[:weight]");
      }
      std::getline(cs, weight, ':');
      workload::GaussianComponent c;
      for (std::int64_t m : parse_ranges(means)) c.mean.push_back(static_cast<double>(m));
      c.variance = std::stod(var);
      c.weight = weight.empty() ? 1.0 : std::stod(weight);
      comps.push_back(std::move(c));
    }
    return workload::MixtureSpec::custom_spec(dom, std::move(comps), records);
  }
  throw std::runtime_error("unknown preset: " + preset);
}

std::vector<RangeQuery> load_queries_any(const std::string& path, AttributeDomain* dom_out) {
  auto [dom, queries] = io::read_queries(path);
  if (dom_out) *dom_out = dom;
  return queries;
}

int cmd_gen_data(const std::string& preset, const std::string& ranges, std::int64_t records,
                 std::uint64_t seed, const std::string& components,
                 const std::string& from_records, const std::string& out) {
  FrequencyTensor freq = [&] {
    if (!from_records.empty()) {
      return workload::ingest_records_csv(from_records, AttributeDomain(parse_ranges(ranges)));
    }
    return workload::gen_gaussian_mixture(build_spec(preset, ranges, records, components), seed);
  }();
  io::write_dataset(out, freq);
  std::cout << "wrote " << out << " (total=" << freq.total() << ")\n";
  return 0;
}

int cmd_gen_queries(const std::string& data, const std::string& ranges,
                    const std::string& model, std::int64_t count, double frac,
                    std::uint64_t seed, const std::string& out) {
  workload::QueryModelSpec spec;
  spec.model = model == "data-dependent" ? workload::QueryModel::data_dependent
                                         : workload::QueryModel::uniform;
  spec.count = count;
  spec.max_volume_fraction = frac;
  spec.seed = seed;
  const FrequencyTensor freq = data.empty()
                                   ? FrequencyTensor(AttributeDomain(parse_ranges(ranges)))
                                   : io::read_dataset(data);
  const std::vector<RangeQuery> queries = workload::gen_queries(spec, freq);
  io::write_queries(out, freq.domain(), queries);
  std::cout << "wrote " << out << " (" << queries.size() << " queries)\n";
  return 0;
}

int cmd_label(const std::string& data, const std::string& queries_path,
              const std::string& out) {
  const FrequencyTensor freq = io::read_dataset(data);
  AttributeDomain qdom;
  const std::vector<RangeQuery> queries = load_queries_any(queries_path, &qdom);
  if (qdom.ranges != freq.domain().ranges) {
    throw std::runtime_error("query file domain does not match dataset domain");
  }
  const auto qfrs = workload::label_queries(freq, queries);
  io::write_qfrs(out, freq.domain(), qfrs);
  std::cout << "wrote " << out << " (" << qfrs.size() << " records)\n";
  return 0;
}

int cmd_train(const std::string& method, std::int64_t buckets, const std::string& qfrs_path,
              const std::string& out, const std::string& sketch_out, double ridge,
              const std::string& buckets_per_dim, std::int64_t omp_budget,
              const std::string& selection, bool normalize_columns) {
  auto [dom, qfrs] = io::read_qfrs(qfrs_path);
  if (method == "equihist") {
    const auto layout = buckets_per_dim.empty()
                            ? equihist::EquiLayout::split_total(dom, buckets)
                            : equihist::EquiLayout::make(dom, parse_ranges(buckets_per_dim));
    auto [fit, hist] = equihist::fit(qfrs, layout, ridge);
    io::write_histogram(out, hist);
    std::cout << "wrote " << out << " (buckets=" << hist.bucket_count()
              << " rms_residual=" << fit.residual_norm
              << (fit.ridge_fallback ? " ridge_fallback" : "") << ")\n";
    return 0;
  }
  if (method == "sphist") {
    sphist::FitOptions opts;
    opts.omp_budget = omp_budget;
    opts.omp.normalize_columns = normalize_columns;
    if (selection == "signed") opts.omp.selection = sphist::OmpOptions::Selection::signed_max;
    const sphist::FitResult res = sphist::fit(qfrs, dom, buckets, opts);
    io::write_histogram(out, res.hist);
    if (!sketch_out.empty()) io::write_sketch(sketch_out, res.sketch);
    std::cout << "wrote " << out << " (buckets=" << res.hist.bucket_count()
              << " support=" << res.sketch.support() << ")\n";
    return 0;
  }
  throw std::runtime_error("unknown method: " + method);
}

std::vector<double> estimates_for(const std::string& hist_path, const std::string& sketch_path,
                                  std::span<const RangeQuery> queries) {
  std::vector<double> est;
  if (!hist_path.empty()) {
    est = kernels::estimate_batch(io::read_histogram(hist_path), queries);
  } else if (!sketch_path.empty()) {
    est = kernels::estimate_batch(io::read_sketch(sketch_path), queries);
  } else {
    throw std::runtime_error("need --hist or --sketch");
  }
  for (double& e : est) e = std::max(0.0, e);  // estimates are reported non-negative
  return est;
}

int cmd_estimate(const std::string& hist_path, const std::string& sketch_path,
                 const std::string& queries_path, const std::string& out) {
  AttributeDomain dom;
  const std::vector<RangeQuery> queries = load_queries_any(queries_path, &dom);
  const std::vector<double> est = estimates_for(hist_path, sketch_path, queries);

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw std::runtime_error("cannot write " + out);
    os = &file;
  }
  char buf[40];
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (const Interval& iv : queries[i].bounds) *os << iv.lo << ',' << iv.hi << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", est[i]);
    *os << buf << '\n';
  }
  if (!out.empty()) {
    file.close();
    if (!file) throw std::runtime_error("write failed: " + out);
  }
  return 0;
}

int cmd_evaluate(const std::string& hist_path, const std::string& sketch_path,
                 const std::string& qfrs_path) {
  auto [dom, qfrs] = io::read_qfrs(qfrs_path);
  std::vector<RangeQuery> queries(qfrs.size());
  std::vector<double> truths(qfrs.size());
  for (std::size_t i = 0; i < qfrs.size(); ++i) {
    queries[i] = qfrs[i].query;
    truths[i] = qfrs[i].cardinality;
  }
  const std::vector<double> est = estimates_for(hist_path, sketch_path, queries);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", evalbench::avg_rel_error(truths, est));
  std::cout << "avg_rel_error_pct=" << buf << "\n";
  return 0;
}

int cmd_online_sim(const std::string& preset, const std::string& ranges, std::int64_t records,
                   std::uint64_t seed, const std::string& model, double frac,
                   std::int64_t steps, std::int64_t buckets, double gamma, double lambda,
                   std::int64_t eval_every, std::int64_t test_queries,
                   std::int64_t perturb_step, double perturb_fraction,
                   const std::string& out) {
  const auto spec = build_spec(preset, ranges, records, "");
  FrequencyTensor truth = workload::gen_gaussian_mixture(spec, Rng::mix(seed, 0xDA7A));

  workload::QueryModelSpec qm;
  qm.model = model == "data-dependent" ? workload::QueryModel::data_dependent
                                       : workload::QueryModel::uniform;
  qm.max_volume_fraction = frac;
  qm.count = steps;
  qm.seed = Rng::mix(seed, 0x7261);
  const auto stream = workload::gen_queries(qm, truth);
  qm.count = test_queries;
  qm.seed = Rng::mix(seed, 0x7465);
  const auto test = workload::gen_queries(qm, truth);

  online::StreamOptions opts;
  opts.eval_every = eval_every;
  opts.perturb_step = perturb_step;
  opts.perturb_fraction = perturb_fraction;
  opts.perturb_seed = Rng::mix(seed, 0x7065);
  opts.gamma = gamma;
  opts.lambda = lambda;

  const auto layout = equihist::EquiLayout::split_total(truth.domain(), buckets);
  const auto traj = online::simulate_stream(std::move(truth), stream, test, layout, opts);
  io::write_trajectory(out, traj);
  std::cout << "wrote " << out << " (" << traj.size() << " evaluations)\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, std::uint64_t base_seed, const std::string& out,
              std::string plot_out, int jobs) {
  std::ifstream in(config_path);
  if (!in) throw std::runtime_error("cannot open " + config_path);
  evalbench::ExperimentConfig cfg = evalbench::ExperimentConfig::parse(in);
  // Config seeds are offsets on top of the base seed; ten runs by default.
  std::vector<std::uint64_t> offsets = cfg.seeds;
  if (offsets.empty()) {
    for (std::uint64_t i = 0; i < 10; ++i) offsets.push_back(i);
  }
  cfg.seeds.clear();
  for (std::uint64_t off : offsets) cfg.seeds.push_back(base_seed + off);
  if (cfg.sweep_values.empty()) {
    // Single-point sweep at the configured value.
    switch (cfg.sweep) {
      case evalbench::SweepVar::train_queries:
        cfg.sweep_values = {cfg.train_queries};
        break;
      case evalbench::SweepVar::buckets:
        cfg.sweep_values = {cfg.buckets};
        break;
      case evalbench::SweepVar::range:
        cfg.sweep_values = {cfg.ranges[0]};
        break;
    }
  }
  if (plot_out.empty()) plot_out = out + ".gp";
  const auto table = evalbench::run_experiment(cfg, jobs);
  evalbench::emit_results(table, out, plot_out);
  std::cout << "wrote " << out << " and " << plot_out << " (" << table.rows.size()
            << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"histlearn: self-tuning histograms learned from query feedback"};
  app.require_subcommand(1);
  app.set_config("--config");
  app.footer("HISTLEARN_CELL_LIMIT overrides the dense-materialization guard (cells).");

  std::string preset = "type1", ranges = "1024", components, from_records, data, queries_path,
              model = "uniform", method = "equihist", hist_path, sketch_path, qfrs_path, out,
              sketch_out, buckets_per_dim, selection = "absolute", config_path, plot_out;
  std::int64_t records = 100000, count = 100, buckets = 20, omp_budget = 0, steps = 2000,
               eval_every = 50, test_queries = 5000, perturb_step = -1;
  std::uint64_t seed = 0;
  double frac = 0.2, ridge = 0.0, gamma = 1.0, lambda = 0.0, perturb_fraction = 0.3;
  bool normalize_columns = false;
  int jobs = 1;

  auto* gen_data = app.add_subcommand("gen-data", "sample a synthetic dataset or ingest records");
  gen_data->add_option("--preset", preset, "type1|type2|gauss-nd|custom")
      ->default_val("type1");
  gen_data->add_option("--r", ranges, "domain ranges, comma-separated")->required();
  gen_data->add_option("--records", records, "number of records")->default_val(100000);
  gen_data->add_option("--seed", seed, "generation seed")->default_val(0);
  gen_data->add_option("--components", components,
                       "custom mixture: mean1,..:variance[:weight];...");
  gen_data->add_option("--from-records", from_records, "ingest a plain records CSV instead");
  gen_data->add_option("--out", out, "output dataset CSV")->required();

  auto* gen_queries = app.add_subcommand("gen-queries", "draw a query workload");
  gen_queries->add_option("--data", data, "dataset CSV (required for data-dependent)");
  gen_queries->add_option("--r", ranges, "domain ranges when --data is omitted");
  gen_queries->add_option("--model", model, "uniform|data-dependent")->default_val("uniform");
  gen_queries->add_option("--count", count, "number of queries")->required();
  gen_queries->add_option("--frac", frac, "max volume fraction")->default_val(0.2);
  gen_queries->add_option("--seed", seed, "generation seed")->default_val(0);
  gen_queries->add_option("--out", out, "output query CSV")->required();

  auto* label = app.add_subcommand("label", "attach exact cardinalities to queries");
  label->add_option("--data", data, "dataset CSV")->required();
  label->add_option("--queries", queries_path, "query CSV")->required();
  label->add_option("--out", out, "output feedback CSV")->required();

  auto* train = app.add_subcommand("train", "fit a histogram from feedback records");
  train->add_option("--method", method, "equihist|sphist")->required();
  train->add_option("--buckets", buckets, "bucket budget")->required();
  train->add_option("--qfrs", qfrs_path, "training feedback CSV")->required();
  train->add_option("--out", out, "output histogram CSV")->required();
  train->add_option("--sketch-out", sketch_out, "also write the coefficient sketch (sphist)");
  train->add_option("--ridge", ridge, "ridge weight (equihist)")->default_val(0.0);
  train->add_option("--buckets-per-dim", buckets_per_dim,
                    "per-dimension bucket counts, overriding the even split");
  train->add_option("--omp-budget", omp_budget, "atom budget (sphist; 0 = auto)")
      ->default_val(0);
  train->add_option("--selection", selection, "absolute|signed atom selection (sphist)")
      ->default_val("absolute");
  train->add_flag("--normalize-columns", normalize_columns,
                  "normalize correlations by column norms (sphist)");

  auto* estimate = app.add_subcommand("estimate", "estimate cardinalities for queries");
  estimate->add_option("--hist", hist_path, "histogram CSV");
  estimate->add_option("--sketch", sketch_path, "sketch CSV");
  estimate->add_option("--qfrs", queries_path, "query or feedback CSV")->required();
  estimate->add_option("--out", out, "output CSV (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "average relative error on a test set");
  evaluate->add_option("--hist", hist_path, "histogram CSV");
  evaluate->add_option("--sketch", sketch_path, "sketch CSV");
  evaluate->add_option("--qfrs", qfrs_path, "labeled test CSV")->required();

  auto* online_sim = app.add_subcommand("online-sim", "streaming updates with optional data churn");
  online_sim->add_option("--preset", preset, "type1|type2|gauss-nd")->default_val("type1");
  online_sim->add_option("--r", ranges, "domain ranges")->default_val("1024");
  online_sim->add_option("--records", records, "number of records")->default_val(100000);
  online_sim->add_option("--seed", seed, "simulation seed")->default_val(0);
  online_sim->add_option("--model", model, "uniform|data-dependent")->default_val("uniform");
  online_sim->add_option("--frac", frac, "max volume fraction")->default_val(0.2);
  online_sim->add_option("--steps", steps, "stream length")->default_val(2000);
  online_sim->add_option("--buckets", buckets, "bucket budget")->default_val(20);
  online_sim->add_option("--gamma", gamma, "recency decay in (0,1]")->default_val(1.0);
  online_sim->add_option("--lambda", lambda, "ridge weight")->default_val(0.0);
  online_sim->add_option("--eval-every", eval_every, "evaluation interval")->default_val(50);
  online_sim->add_option("--test-queries", test_queries, "test set size")->default_val(5000);
  online_sim->add_option("--perturb-step", perturb_step, "data update step (-1: never)")
      ->default_val(-1);
  online_sim->add_option("--perturb-fraction", perturb_fraction, "fraction of mass moved")
      ->default_val(0.3);
  online_sim->add_option("--out", out, "trajectory CSV")->required();

  auto* sweep = app.add_subcommand("sweep", "run an experiment sweep from a config file");
  sweep->add_option("--config-file", config_path, "experiment config (key = value lines)")
      ->required();
  sweep->add_option("--seed", seed, "base seed; per-run seeds add config offsets")->required();
  sweep->add_option("--out", out, "results CSV")->required();
  sweep->add_option("--plot-out", plot_out, "gnuplot script (default <out>.gp)");
  sweep->add_option("--jobs", jobs, "concurrent sweep cells")->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (gen_data->parsed()) {
      return cmd_gen_data(preset, ranges, records, seed, components, from_records, out);
    }
    if (gen_queries->parsed()) {
      return cmd_gen_queries(data, ranges, model, count, frac, seed, out);
    }
    if (label->parsed()) return cmd_label(data, queries_path, out);
    if (train->parsed()) {
      return cmd_train(method, buckets, qfrs_path, out, sketch_out, ridge, buckets_per_dim,
                       omp_budget, selection, normalize_columns);
    }
    if (estimate->parsed()) return cmd_estimate(hist_path, sketch_path, queries_path, out);
    if (evaluate->parsed()) return cmd_evaluate(hist_path, sketch_path, qfrs_path);
    if (online_sim->parsed()) {
      return cmd_online_sim(preset, ranges, records, seed, model, frac, steps, buckets, gamma,
                            lambda, eval_every, test_queries, perturb_step, perturb_fraction,
                            out);
    }
    if (sweep->parsed()) return cmd_sweep(config_path, seed, out, plot_out, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
