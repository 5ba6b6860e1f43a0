#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "trapnet/rng.hpp"

using namespace trapnet;

TEST_CASE("streams are reproducible and distinct", "[rng]") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  bool differ_c = false, differ_d = false;
  for (int k = 0; k < 100; ++k) {
    const auto x = a();
    REQUIRE(x == b());
    differ_c = differ_c || x != c();
    differ_d = differ_d || x != d();
  }
  CHECK(differ_c);
  CHECK(differ_d);
  CHECK(a.draws() == 100);
}

TEST_CASE("substreams do not depend on the parent's position", "[rng]") {
  RngStream a(1, 2);
  const auto s1 = a.substream(5);
  for (int k = 0; k < 10; ++k) a();
  auto s2 = a.substream(5);
  auto s1c = s1;
  for (int k = 0; k < 20; ++k) REQUIRE(s1c() == s2());
  auto t = a.substream(6);
  auto s3 = a.substream(5);
  CHECK(t() != s3());
}

TEST_CASE("uniform ranges", "[rng]") {
  RngStream r(9, 0);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = r.uniform(), v = r.uniform_open_right();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    sum += u;
  }
  // Mean 1/2, standard deviation of the mean (12 n)^{-1/2}.
  CHECK(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("below is uniform on its range", "[rng]") {
  RngStream r(11, 3);
  const int bins = 7, n = 70000;
  std::vector<int> count(bins, 0);
  for (int k = 0; k < n; ++k) {
    const auto x = r.below(bins);
    REQUIRE(x < static_cast<std::uint64_t>(bins));
    ++count[x];
  }
  double chi2 = 0.0;
  for (int c : count) chi2 += (c - n / double(bins)) * (c - n / double(bins)) / (n / double(bins));
  // 6 degrees of freedom; the 0.999 quantile is 22.46.
  CHECK(chi2 < 22.46);
  CHECK(r.below(1) == 0);
  CHECK(r.below(0) == 0);
}

TEST_CASE("exponential, geometric and Poisson moments", "[rng]") {
  RngStream r(13, 0);
  const int n = 100000;
  double se = 0.0, sg = 0.0, sp = 0.0, sp2 = 0.0;
  for (int k = 0; k < n; ++k) {
    se += exponential(r, 2.0);
    sg += static_cast<double>(geometric_failures(r, 0.25));
    const double p = static_cast<double>(poisson(r, 45.0));
    sp += p;
    sp2 += p * p;
  }
  CHECK(std::abs(se / n - 0.5) < 5.0 * 0.5 / std::sqrt(n));
  // Geometric failures: mean (1-p)/p = 3, variance (1-p)/p^2 = 12.
  CHECK(std::abs(sg / n - 3.0) < 5.0 * std::sqrt(12.0 / n));
  const double pm = sp / n;
  CHECK(std::abs(pm - 45.0) < 5.0 * std::sqrt(45.0 / n));
  CHECK(std::abs(sp2 / n - pm * pm - 45.0) < 1.5);
  CHECK(poisson(r, 0.0) == 0);
  CHECK(geometric_failures(r, 1.0) == 0);
}

TEST_CASE("Poisson small-mean probabilities", "[rng]") {
  RngStream r(17, 0);
  const int n = 200000;
  std::vector<int> c(4, 0);
  for (int k = 0; k < n; ++k) {
    const auto x = poisson(r, 1.0);
    if (x < 4) ++c[x];
  }
  // P(N = k) = e^{-1} / k!.
  const double e = std::exp(-1.0);
  const double p[4] = {e, e, e / 2.0, e / 6.0};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(c[k] / double(n) - p[k]) < 5.0 * std::sqrt(p[k] * (1 - p[k]) / n));
}
