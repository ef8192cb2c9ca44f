#include <doctest.h>

#include "histlearn/domain.hpp"
#include "histlearn/histogram.hpp"
#include "histlearn/rng.hpp"
#include "test_support.hpp"

using namespace histlearn;

namespace {

FrequencyTensor freq_1133() {
  return FrequencyTensor(AttributeDomain({4}), {1, 1, 3, 3});
}

BucketHistogram hist_2_6() {
  std::vector<Bucket> buckets;
  buckets.push_back({RangeQuery({{1, 2}}), 2.0});
  buckets.push_back({RangeQuery({{3, 4}}), 6.0});
  return BucketHistogram(AttributeDomain({4}), std::move(buckets));
}

}  // namespace

TEST_CASE("exact cardinality on small tensors") {
  const FrequencyTensor f = freq_1133();
  CHECK(exact_cardinality(f, RangeQuery({{2, 3}})) == 4);
  CHECK(exact_cardinality(f, RangeQuery({{1, 4}})) == 8);

  const FrequencyTensor g(AttributeDomain({2, 2}), {1, 2, 3, 4});
  // brute force over the box [1,2]x[2,2]
  std::int64_t expected = 0;
  for (std::int64_t i = 1; i <= 2; ++i) {
    expected += g.at(std::vector<std::int64_t>{i, 2});
  }
  CHECK(expected == 6);
  CHECK(exact_cardinality(g, RangeQuery({{1, 2}, {2, 2}})) == expected);
}

TEST_CASE("exact cardinality rejects out-of-domain queries") {
  const FrequencyTensor f = freq_1133();
  CHECK_THROWS_AS(exact_cardinality(f, RangeQuery({{0, 2}})), std::invalid_argument);
  CHECK_THROWS_AS(exact_cardinality(f, RangeQuery({{1, 5}})), std::invalid_argument);
  CHECK_THROWS_AS(exact_cardinality(f, RangeQuery({{1, 2}, {1, 2}})), std::invalid_argument);
}

TEST_CASE("exact cardinality is additive over splits") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const AttributeDomain dom({rng.uniform_int(2, 20)});
    const FrequencyTensor f = test::random_tensor(rng, dom);
    const std::int64_t r = dom.ranges[0];
    const std::int64_t lo = rng.uniform_int(1, r - 1);
    const std::int64_t hi = rng.uniform_int(lo + 1, r);
    const std::int64_t mid = rng.uniform_int(lo, hi - 1);
    CHECK(exact_cardinality(f, RangeQuery({{lo, mid}})) +
              exact_cardinality(f, RangeQuery({{mid + 1, hi}})) ==
          exact_cardinality(f, RangeQuery({{lo, hi}})));
  }
}

TEST_CASE("histogram estimates match hand values") {
  const BucketHistogram h = hist_2_6();
  CHECK(estimate_cardinality(h, RangeQuery({{2, 3}})) == doctest::Approx(4.0));
  CHECK(estimate_cardinality(h, RangeQuery({{1, 4}})) == doctest::Approx(8.0));

  std::vector<Bucket> one;
  one.push_back({RangeQuery({{1, 10}}), 123.0});
  const BucketHistogram full(AttributeDomain({10}), std::move(one));
  CHECK(estimate_cardinality(full, RangeQuery({{1, 10}})) == doctest::Approx(123.0));
}

TEST_CASE("histogram estimate equals the dense inner product") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const AttributeDomain dom(trial % 2 == 0
                                  ? std::vector<std::int64_t>{rng.uniform_int(2, 30)}
                                  : std::vector<std::int64_t>{rng.uniform_int(2, 8),
                                                              rng.uniform_int(2, 8)});
    // random partition with random counts, negatives allowed in memory
    std::vector<Bucket> buckets;
    if (dom.dims() == 1) {
      std::int64_t lo = 1;
      while (lo <= dom.ranges[0]) {
        const std::int64_t hi = rng.uniform_int(lo, dom.ranges[0]);
        buckets.push_back({RangeQuery({{lo, hi}}), rng.uniform(-5.0, 20.0)});
        lo = hi + 1;
      }
    } else {
      const std::int64_t cut = rng.uniform_int(1, dom.ranges[0]);
      buckets.push_back({RangeQuery({{1, cut}, {1, dom.ranges[1]}}), rng.uniform(-5.0, 20.0)});
      if (cut < dom.ranges[0]) {
        buckets.push_back({RangeQuery({{cut + 1, dom.ranges[0]}, {1, dom.ranges[1]}}),
                           rng.uniform(0.0, 20.0)});
      }
    }
    const BucketHistogram h(dom, std::move(buckets));
    const std::vector<double> dense = to_dense(h);
    const RangeQuery q = test::random_query(rng, dom);
    const std::vector<double> ind = test::unary(q, dom);
    double expected = 0.0;
    for (std::size_t i = 0; i < dense.size(); ++i) expected += dense[i] * ind[i];
    CHECK(estimate_cardinality(h, q) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("sketch estimates match hand values and the dense oracle") {
  const AttributeDomain dom({4});
  const WaveletSketch dc(dom, {{1, 4.0}});
  CHECK(estimate_cardinality(dc, RangeQuery({{1, 2}})) == doctest::Approx(4.0));
  CHECK(estimate_cardinality(dc, RangeQuery({{1, 4}})) == doctest::Approx(8.0));

  const WaveletSketch empty(dom, {});
  CHECK(estimate_cardinality(empty, RangeQuery({{1, 3}})) == 0.0);

  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const AttributeDomain rdom(trial % 2 == 0
                                   ? std::vector<std::int64_t>{rng.uniform_int(2, 16)}
                                   : std::vector<std::int64_t>{rng.uniform_int(2, 6),
                                                               rng.uniform_int(2, 6)});
    const haar::PaddedDomain pd = haar::PaddedDomain::from(rdom);
    const std::int64_t cells = pd.padded_cells();
    std::vector<SketchEntry> entries;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(cells);
    for (int k = 0; k < 4; ++k) {
      const std::int64_t idx = rng.uniform_int(1, cells);
      if (alpha[idx - 1] != 0.0) continue;
      alpha[idx - 1] = rng.uniform(-3.0, 3.0);
      entries.push_back({idx, alpha[idx - 1]});
    }
    const WaveletSketch sk(rdom, entries);
    const RangeQuery q = test::random_query(rng, rdom);

    // dense oracle: q' Psi' alpha over the padded cells
    const Eigen::MatrixXd psi = test::dense_transform(pd);
    const AttributeDomain padded_dom(pd.padded);
    const std::vector<double> ind = test::unary(q, padded_dom);
    Eigen::VectorXd qv = Eigen::VectorXd::Zero(cells);
    for (std::int64_t i = 0; i < cells; ++i) qv[i] = ind[i];
    const double expected = qv.dot(psi.transpose() * alpha);
    CHECK(estimate_cardinality(sk, q) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("sketch rejects bad coefficient indices") {
  const AttributeDomain dom({4});
  CHECK_THROWS_AS(WaveletSketch(dom, {{0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(WaveletSketch(dom, {{5, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(WaveletSketch(dom, {{2, 1.0}, {2, 2.0}}), std::invalid_argument);
}

TEST_CASE("dense materialization") {
  CHECK(to_dense(hist_2_6()) == std::vector<double>{1, 1, 3, 3});

  std::vector<Bucket> one;
  one.push_back({RangeQuery({{1, 4}}), 8.0});
  CHECK(to_dense(BucketHistogram(AttributeDomain({4}), std::move(one))) ==
        std::vector<double>{2, 2, 2, 2});

  std::vector<Bucket> two_d;
  two_d.push_back({RangeQuery({{1, 2}, {1, 2}}), 8.0});
  CHECK(to_dense(BucketHistogram(AttributeDomain({2, 2}), std::move(two_d))) ==
        std::vector<double>{2, 2, 2, 2});

  std::vector<Bucket> big;
  big.push_back({RangeQuery({{1, 100}}), 1.0});
  const BucketHistogram wide(AttributeDomain({100}), std::move(big));
  CHECK_THROWS_AS(to_dense(wide, 64), std::invalid_argument);
}

TEST_CASE("bucket volumes partition the domain") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const AttributeDomain dom({rng.uniform_int(3, 40)});
    std::vector<Bucket> buckets;
    std::int64_t lo = 1;
    while (lo <= dom.ranges[0]) {
      const std::int64_t hi = rng.uniform_int(lo, dom.ranges[0]);
      buckets.push_back({RangeQuery({{lo, hi}}), 1.0});
      lo = hi + 1;
    }
    const BucketHistogram h(dom, buckets);
    std::int64_t covered = 0;
    for (const Bucket& b : h.buckets()) covered += b.box.volume();
    CHECK(covered == dom.cells());
  }
}

TEST_CASE("histogram validation rejects overlaps and gaps") {
  const AttributeDomain dom({4});
  std::vector<Bucket> overlap;
  overlap.push_back({RangeQuery({{1, 3}}), 1.0});
  overlap.push_back({RangeQuery({{3, 4}}), 1.0});
  CHECK_THROWS_AS(BucketHistogram(dom, overlap), std::invalid_argument);

  std::vector<Bucket> gap;
  gap.push_back({RangeQuery({{1, 1}}), 1.0});
  gap.push_back({RangeQuery({{3, 4}}), 1.0});
  CHECK_THROWS_AS(BucketHistogram(dom, gap), std::invalid_argument);
}

TEST_CASE("frequency tensor bookkeeping") {
  FrequencyTensor f(AttributeDomain({3, 2}));
  CHECK(f.total() == 0);
  f.add(std::vector<std::int64_t>{2, 1}, 5);
  CHECK(f.total() == 5);
  CHECK(f.at(std::vector<std::int64_t>{2, 1}) == 5);
  CHECK_THROWS_AS(f.add(std::vector<std::int64_t>{2, 1}, -6), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyTensor(AttributeDomain({2}), {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(FrequencyTensor(AttributeDomain({2}), {1, -1}), std::invalid_argument);
}
