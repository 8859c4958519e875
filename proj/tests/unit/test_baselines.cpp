// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "rddc/baselines.hpp"
#include "rddc/errors.hpp"
#include "rddc/metrics.hpp"

using namespace rddc;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> labels;
};

Blobs blobs(std::size_t per, std::size_t k, double spread, std::uint64_t seed, std::size_t dim = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  Blobs b;
  b.x.cols = dim;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      for (std::size_t j = 0; j < dim; ++j) b.x.data.push_back((j == c % dim ? 10.0 * (1.0 + c) : 0.0) + g(rng));
      b.labels.push_back(static_cast<int>(c));
    }
  b.x.rows = per * k;
  return b;
}

double sse(const Matrix& x, const std::vector<int>& assignments, std::size_t k) {
  Matrix means = cluster_means(x, assignments, k);
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      double d = x(i, j) - means(static_cast<std::size_t>(assignments[i]), j);
      s += d * d;
    }
  return s;
}

}  // namespace

TEST_SUITE("baselines") {
  TEST_CASE("k-means trivial cases") {
    Matrix two{2, 2, {0, 0, 100, 100}};
    KMeansResult r = kmeans(two, 2);
    CHECK(r.inertia == 0.0);
    CHECK(r.assignments[0] != r.assignments[1]);

    Blobs b = blobs(7, 2, 1.0, 1);
    KMeansResult one = kmeans(b.x, 1);
    for (std::size_t j = 0; j < 2; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < b.x.rows; ++i) m += b.x(i, j);
      CHECK(one.centroids(0, j) == doctest::Approx(m / static_cast<double>(b.x.rows)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(kmeans(two, 3), ContractError);
  }

  TEST_CASE("k-means separates tight blobs") {
    Blobs b = blobs(4, 3, 0.1, 2);
    KMeansResult r = kmeans(b.x, 3);
    CHECK(acc({b.labels, r.assignments, 3, 3}) == 1.0);
    for (int a : r.assignments) {
      CHECK(a >= 0);
      CHECK(a < 3);
    }
  }

  TEST_CASE("k-means inertia never increases within a run") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Blobs b = blobs(30, 4, 6.0, seed, 3);
      KMeansResult r = kmeans(b.x, 5, {10, 300, seed});
      CHECK(r.inertia_traces.size() == 10);
      for (const auto& trace : r.inertia_traces)
        for (std::size_t t = 1; t < trace.size(); ++t) CHECK(trace[t] <= trace[t - 1] * (1.0 + 1e-12));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& trace : r.inertia_traces)
        if (!trace.empty()) best = std::min(best, trace.back());
      CHECK(r.inertia == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("k-means is deterministic under a seed") {
    Blobs b = blobs(20, 3, 4.0, 9);
    KMeansResult a = kmeans(b.x, 3, {5, 300, 42}), c = kmeans(b.x, 3, {5, 300, 42});
    CHECK(a.assignments == c.assignments);
    CHECK(a.inertia == c.inertia);
  }

  TEST_CASE("ward trivial cuts") {
    Blobs b = blobs(3, 2, 1.0, 3);
    WardResult all = ward_hc(b.x, b.x.rows);
    CHECK(std::set<int>(all.assignments.begin(), all.assignments.end()).size() == b.x.rows);
    CHECK(all.merge_heights.empty());
    WardResult one = ward_hc(b.x, 1);
    CHECK(std::all_of(one.assignments.begin(), one.assignments.end(), [](int a) { return a == 0; }));
    CHECK_THROWS_AS(ward_hc(b.x, b.x.rows + 1), ContractError);
  }

  TEST_CASE("ward recovers two separated triples") {
    Matrix x{6, 2, {0, 0, 0.5, 0, 0, 0.5, 20, 20, 20.5, 20, 20, 20.5}};
    WardResult r = ward_hc(x, 2);
    CHECK(acc({{0, 0, 0, 1, 1, 1}, r.assignments, 2, 2}) == 1.0);
  }

  TEST_CASE("ward merge heights are monotone and sum to the partition SSE") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Blobs b = blobs(12, 3, 5.0, seed, 3);
      WardResult full = ward_hc(b.x, 1);
      for (std::size_t i = 1; i < full.merge_heights.size(); ++i)
        CHECK(full.merge_heights[i] >= full.merge_heights[i - 1] - 1e-9);
      double total = std::accumulate(full.merge_heights.begin(), full.merge_heights.end(), 0.0);
      CHECK(total == doctest::Approx(sse(b.x, full.assignments, 1)).epsilon(1e-10));
      WardResult cut = ward_hc(b.x, 4);
      double partial = std::accumulate(cut.merge_heights.begin(), cut.merge_heights.end(), 0.0);
      CHECK(partial == doctest::Approx(sse(b.x, cut.assignments, 4)).epsilon(1e-10));
    }
  }

  TEST_CASE("ward on well separated blobs") {
    Blobs b = blobs(50, 3, 1.0, 21);
    WardResult r = ward_hc(b.x, 3);
    CHECK(acc({b.labels, r.assignments, 3, 3}) == 1.0);
  }

  TEST_CASE("dense-head divergence clustering on two blobs") {
    Blobs b = blobs(40, 2, 1.0, 5);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.restarts = 3;
    cfg.batch_size = 32;
    cfg.seed = 3;
    cfg.jobs = 1;
    DdcVectorResult r = ddc_vector(b.x, 2, cfg, 16);
    for (int a : r.assignments) {
      CHECK(a >= 0);
      CHECK(a < 2);
    }
    CHECK(acc({b.labels, r.assignments, 2, 2}) >= 0.95);
    CHECK(r.records.size() == 3);
    CHECK(ddc_vector_predict(r.model, b.x) == r.assignments);
    DdcVectorResult again = ddc_vector(b.x, 2, cfg, 16);
    CHECK(again.assignments == r.assignments);
  }
}
