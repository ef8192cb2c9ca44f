#include <doctest.h>

#include "histlearn/equihist.hpp"
#include "histlearn/kernels.hpp"
#include "test_support.hpp"

using namespace histlearn;
using equihist::EquiLayout;

namespace {

std::vector<QueryFeedbackRecord> three_qfrs() {
  return {{RangeQuery({{1, 2}}), 2.0},
          {RangeQuery({{3, 4}}), 6.0},
          {RangeQuery({{1, 4}}), 8.0}};
}

Eigen::VectorXd dense_overlap(const RangeQuery& q, const EquiLayout& layout) {
  // materialized B'q: per cell, which bucket it belongs to
  const AttributeDomain& dom = layout.domain;
  const std::vector<double> ind = test::unary(q, dom);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.bucket_count());
  for (std::int64_t flat = 0; flat < dom.cells(); ++flat) {
    if (ind[flat] == 0.0) continue;
    std::int64_t rem = flat;
    std::vector<std::int64_t> cell(dom.dims());
    for (int i = dom.dims() - 1; i >= 0; --i) {
      cell[i] = rem % dom.ranges[i] + 1;
      rem /= dom.ranges[i];
    }
    std::int64_t bucket = 0;
    for (int i = 0; i < dom.dims(); ++i) {
      std::int64_t bi = 0;
      while (layout.edges[i][bi + 1] < cell[i]) ++bi;
      bucket = bucket * layout.buckets_per_dim[i] + bi;
    }
    x[bucket] += 1.0;
  }
  return x;
}

}  // namespace

TEST_CASE("layout edges partition the range") {
  const auto even = EquiLayout::make(AttributeDomain({8}), std::vector<std::int64_t>{2});
  CHECK(even.bucket_interval(0, 0) == Interval{1, 4});
  CHECK(even.bucket_interval(0, 1) == Interval{5, 8});

  const auto uneven = EquiLayout::make(AttributeDomain({10}), std::vector<std::int64_t>{3});
  std::int64_t covered = 0;
  for (std::int64_t j = 0; j < 3; ++j) {
    const Interval iv = uneven.bucket_interval(0, j);
    CHECK(iv.width() >= 3);
    CHECK(iv.width() <= 4);
    covered += iv.width();
  }
  CHECK(covered == 10);

  CHECK_THROWS_AS(EquiLayout::make(AttributeDomain({4}), std::vector<std::int64_t>{5}),
                  std::invalid_argument);

  const auto split = EquiLayout::split_total(AttributeDomain({32, 32}), 64);
  CHECK(split.buckets_per_dim == std::vector<std::int64_t>{8, 8});
}

TEST_CASE("bucket overlaps match hand values") {
  const auto layout = EquiLayout::make(AttributeDomain({8}), std::vector<std::int64_t>{2});
  const equihist::SparseVec mid = equihist::bucket_overlap(RangeQuery({{3, 6}}), layout);
  REQUIRE(mid.size() == 2);
  CHECK(mid[0] == std::pair<std::int64_t, double>{0, 2.0});
  CHECK(mid[1] == std::pair<std::int64_t, double>{1, 2.0});

  const equihist::SparseVec full = equihist::bucket_overlap(RangeQuery({{1, 8}}), layout);
  CHECK(full[0].second == 4.0);
  CHECK(full[1].second == 4.0);

  const auto grid = EquiLayout::make(AttributeDomain({4, 4}), std::vector<std::int64_t>{2, 2});
  const equihist::SparseVec corner =
      equihist::bucket_overlap(RangeQuery({{1, 2}, {2, 3}}), grid);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  for (const auto& [j, v] : corner) x[j] = v;
  const Eigen::VectorXd expected = dense_overlap(RangeQuery({{1, 2}, {2, 3}}), grid);
  CHECK((x - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(x[0] == 2.0);
  CHECK(x[1] == 2.0);
  CHECK(x[2] == 0.0);
  CHECK(x[3] == 0.0);
}

TEST_CASE("overlap vectors sum to the query volume and match dense features") {
  Rng rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const bool two_d = trial % 2 == 1;
    const AttributeDomain dom(two_d ? std::vector<std::int64_t>{rng.uniform_int(4, 16),
                                                                rng.uniform_int(4, 16)}
                                    : std::vector<std::int64_t>{rng.uniform_int(4, 64)});
    std::vector<std::int64_t> per_dim(dom.dims());
    for (int i = 0; i < dom.dims(); ++i) per_dim[i] = rng.uniform_int(1, dom.ranges[i]);
    const auto layout = EquiLayout::make(dom, per_dim);
    const RangeQuery q = test::random_query(rng, dom);
    const equihist::SparseVec x = equihist::bucket_overlap(q, layout);

    double sum = 0.0;
    for (const auto& [j, v] : x) {
      CHECK(v >= 0.0);
      CHECK(v <= static_cast<double>(layout.bucket_volume(j)));
      sum += v;
    }
    CHECK(sum == doctest::Approx(static_cast<double>(q.volume())));

    const Eigen::VectorXd expected = dense_overlap(q, layout);
    Eigen::VectorXd got = Eigen::VectorXd::Zero(layout.bucket_count());
    for (const auto& [j, v] : x) got[j] = v;
    CHECK((got - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("least squares fit recovers the two-bucket system") {
  const auto layout = EquiLayout::make(AttributeDomain({4}), std::vector<std::int64_t>{2});
  const auto qfrs = three_qfrs();

  // hand-built normal equations: x1=(2,0), x2=(0,2), x3=(2,2)
  Eigen::Matrix2d g;
  g << 8, 4, 4, 8;
  Eigen::Vector2d c(20, 28);
  const Eigen::Vector2d expected = g.inverse() * c;
  CHECK(expected[0] == doctest::Approx(1.0));
  CHECK(expected[1] == doctest::Approx(3.0));

  auto [fit, hist] = equihist::fit(qfrs, layout);
  CHECK(fit.weights[0] == doctest::Approx(1.0));
  CHECK(fit.weights[1] == doctest::Approx(3.0));
  CHECK(hist.buckets()[0].count == doctest::Approx(2.0));
  CHECK(hist.buckets()[1].count == doctest::Approx(6.0));
  CHECK(fit.residual_norm == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("single unknown equals mass over range") {
  const auto layout = EquiLayout::make(AttributeDomain({10}), std::vector<std::int64_t>{1});
  const std::vector<QueryFeedbackRecord> qfrs{{RangeQuery({{1, 10}}), 120.0}};
  auto [fit, hist] = equihist::fit(qfrs, layout);
  CHECK(fit.weights[0] == doctest::Approx(12.0));
  CHECK(hist.buckets()[0].count == doctest::Approx(120.0));
}

TEST_CASE("bucket-aligned truth fits with zero residual") {
  const AttributeDomain dom({16});
  const auto layout = EquiLayout::make(dom, std::vector<std::int64_t>{4});
  const std::vector<double> heights{2.0, 5.0, 1.0, 7.0};
  std::vector<QueryFeedbackRecord> qfrs;
  Rng rng(43);
  for (int i = 0; i < 12; ++i) {
    const RangeQuery q = test::random_query(rng, dom);
    double s = 0.0;
    for (std::int64_t c = q.bounds[0].lo; c <= q.bounds[0].hi; ++c) s += heights[(c - 1) / 4];
    qfrs.push_back({q, s});
  }
  auto [fit, hist] = equihist::fit(qfrs, layout);
  CHECK(fit.residual_norm < 1e-8);
  for (int j = 0; j < 4; ++j) CHECK(fit.weights[j] == doctest::Approx(heights[j]));
}

TEST_CASE("normal equations are stationary at the fit") {
  Rng rng(47);
  for (int trial = 0; trial < 20; ++trial) {
    const AttributeDomain dom({rng.uniform_int(8, 64)});
    const auto layout =
        EquiLayout::make(dom, std::vector<std::int64_t>{rng.uniform_int(1, 6)});
    std::vector<QueryFeedbackRecord> qfrs;
    const int n = 12;
    for (int i = 0; i < n; ++i) {
      qfrs.push_back({test::random_query(rng, dom), rng.uniform(0.0, 100.0)});
    }
    const double ridge = trial % 2 == 0 ? 0.0 : 1e-4;
    const auto neq = kernels::accumulate_normal_ref(layout, qfrs);
    const auto fit = equihist::solve(neq, ridge);
    // B'Q(Q'Bw - s) + N*eps*w = (G w - c) + N*eps*w = 0
    const Eigen::VectorXd resid = neq.G * fit.weights - neq.c +
                                  static_cast<double>(n) * fit.ridge * fit.weights;
    const double scale =
        std::max({1.0, neq.c.cwiseAbs().maxCoeff(),
                  (neq.G * fit.weights).cwiseAbs().maxCoeff()});
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8 * scale);
  }
}

TEST_CASE("one-dimensional path embeds into the grid path") {
  Rng rng(53);
  const AttributeDomain dom1({32});
  const AttributeDomain dom2({32, 1});
  const auto layout1 = EquiLayout::make(dom1, std::vector<std::int64_t>{4});
  const auto layout2 = EquiLayout::make(dom2, std::vector<std::int64_t>{4, 1});
  std::vector<QueryFeedbackRecord> qfrs1, qfrs2;
  for (int i = 0; i < 20; ++i) {
    const RangeQuery q = test::random_query(rng, dom1);
    const double s = rng.uniform(0.0, 50.0);
    qfrs1.push_back({q, s});
    qfrs2.push_back({RangeQuery({q.bounds[0], {1, 1}}), s});
  }
  const auto f1 = equihist::fit(qfrs1, layout1).first;
  const auto f2 = equihist::fit(qfrs2, layout2).first;
  CHECK((f1.weights - f2.weights).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("refitting with a duplicated record cannot raise the objective") {
  Rng rng(59);
  const AttributeDomain dom({32});
  const auto layout = EquiLayout::make(dom, std::vector<std::int64_t>{4});
  std::vector<QueryFeedbackRecord> qfrs;
  for (int i = 0; i < 15; ++i) {
    qfrs.push_back({test::random_query(rng, dom), rng.uniform(0.0, 100.0)});
  }
  const auto old_fit = equihist::fit(qfrs, layout).first;
  auto extended = qfrs;
  extended.push_back(qfrs[3]);
  const auto new_fit = equihist::fit(extended, layout).first;

  const auto sse = [&](const Eigen::VectorXd& w) {
    double total = 0.0;
    for (const auto& rec : extended) {
      double pred = 0.0;
      for (const auto& [j, v] : equihist::bucket_overlap(rec.query, layout)) pred += v * w[j];
      total += (pred - rec.cardinality) * (pred - rec.cardinality);
    }
    return total;
  };
  CHECK(sse(new_fit.weights) <= sse(old_fit.weights) * (1 + 1e-9) + 1e-9);
}

TEST_CASE("singular systems fall back to an automatic ridge") {
  const auto layout = EquiLayout::make(AttributeDomain({4}), std::vector<std::int64_t>{2});
  const std::vector<QueryFeedbackRecord> qfrs{{RangeQuery({{1, 2}}), 4.0}};
  auto [fit, hist] = equihist::fit(qfrs, layout);
  CHECK(fit.ridge_fallback);
  CHECK(fit.ridge > 0.0);
  CHECK(fit.weights.allFinite());
  CHECK(fit.weights[0] == doctest::Approx(2.0).epsilon(1e-4));

  CHECK_THROWS_AS(equihist::fit(std::vector<QueryFeedbackRecord>{}, layout),
                  std::invalid_argument);
  const auto neq = kernels::accumulate_normal_ref(layout, qfrs);
  CHECK_THROWS_AS(equihist::solve(neq, -1.0), std::invalid_argument);
}
