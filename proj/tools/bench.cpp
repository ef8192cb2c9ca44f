// Kernel benchmark: serial reference implementations against the OpenMP
// versions. Prints one CSV-ish line per (kernel, size) pair.

#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "histlearn/equihist.hpp"
#include "histlearn/haar.hpp"
#include "histlearn/kernels.hpp"
#include "histlearn/rng.hpp"
#include "histlearn/workload.hpp"

namespace {

using namespace histlearn;

double now_ms() {
#ifdef _OPENMP
  return omp_get_wtime() * 1000.0;
#else
  return 0.0;
#endif
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_ms();
    f();
    const double t1 = now_ms();
    if (t1 - t0 < best) best = t1 - t0;
  }
  return best;
}

void report(const std::string& kernel, const std::string& size, double serial_ms,
            double parallel_ms) {
  std::printf("%-22s %-18s serial %9.3f ms   parallel %9.3f ms   speedup %.2fx\n",
              kernel.c_str(), size.c_str(), serial_ms, parallel_ms,
              parallel_ms > 0 ? serial_ms / parallel_ms : 0.0);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  const std::int64_t r = 4096;
  const std::int64_t n_queries = 20000;
  const auto spec = workload::MixtureSpec::type1(r, 200000);
  const FrequencyTensor freq = workload::gen_gaussian_mixture(spec, 7);
  const auto queries =
      workload::gen_queries({workload::QueryModel::uniform, n_queries, 0.2, 11}, freq);
  const auto qfrs = workload::label_queries(freq, queries);

  {
    const kernels::SummedAreaTable sat(freq);
    std::vector<std::int64_t> out;
    const double s = time_best_of(3, [&] { out = kernels::exact_cardinalities_ref(freq, queries); });
    const double p = time_best_of(3, [&] { out = kernels::exact_cardinalities(sat, queries); });
    report("label", std::to_string(n_queries) + " queries", s, p);
  }

  {
    const auto layout = equihist::EquiLayout::make(freq.domain(), std::vector<std::int64_t>{256});
    equihist::NormalEq neq(layout.bucket_count());
    const double s = time_best_of(3, [&] { neq = kernels::accumulate_normal_ref(layout, qfrs); });
    const double p = time_best_of(3, [&] { neq = kernels::accumulate_normal(layout, qfrs); });
    report("accumulate-normal", "b=256", s, p);

    const auto fit = equihist::solve(neq, 0.0);
    const auto hist = equihist::to_histogram(layout, fit.weights);
    std::vector<double> est;
    const double es = time_best_of(3, [&] { est = kernels::estimate_batch_ref(hist, queries); });
    const double ep = time_best_of(3, [&] { est = kernels::estimate_batch(hist, queries); });
    report("estimate-histogram", "b=256", es, ep);
  }

  {
    const haar::PaddedDomain pd = haar::PaddedDomain::from(freq.domain());
    std::vector<double> z(qfrs.size(), 1.0);
    std::vector<double> cells;
    const double s =
        time_best_of(3, [&] { cells = kernels::weighted_query_cells_ref(pd, qfrs, z); });
    const double p = time_best_of(3, [&] { cells = kernels::weighted_query_cells(pd, qfrs, z); });
    report("correlation-scatter", "r=4096", s, p);
  }

  {
    const std::vector<std::int64_t> shape{128, 128, 64};
    std::vector<double> t(128 * 128 * 64);
    Rng rng(3);
    for (double& v : t) v = rng.next_double();
    std::vector<double> work;
    const double s = time_best_of(3, [&] {
      work = t;
      haar::fwt_nd(work, shape, 1);
    });
    const double p = time_best_of(3, [&] {
      work = t;
      haar::fwt_nd(work, shape);
    });
    report("wavelet-transform", "128x128x64", s, p);
  }

  return 0;
}
