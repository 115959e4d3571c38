#include <doctest.h>

#include <cmath>
#include <optional>
#include <vector>

#include "hpmf/error.hpp"
#include "hpmf/factorization.hpp"
#include "support.hpp"

using namespace hpmf;
using testing::balanced_tree;

namespace {

SyntheticParams params(std::vector<double> rates, std::uint64_t seed = 3) {
  SyntheticParams p;
  p.missing_rate = std::move(rates);
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("zero spreads collapse every level onto the root vectors") {
  auto t = balanced_tree({2, 3});
  auto p = params({0.0, 0.0});
  p.sigma_u = p.sigma_v = p.sigma = 0.0;
  p.n_cols = 4;
  auto d = generate_synthetic(t, p);
  double want = 0.0;
  for (std::size_t i = 0; i < p.k; ++i) want += d.truth.U[0][0][i] * d.truth.V[0][0][i];
  for (const auto& level : d.levels) {
    CHECK(level.size() == level.n_rows() * level.n_cols());
    for (const auto& e : level.entries()) CHECK(e.value == doctest::Approx(want).epsilon(1e-12));
  }
  for (std::size_t m = 0; m < p.n_cols; ++m) CHECK(d.truth.V[2][m][0] == d.truth.V[0][0][0]);
}

TEST_CASE("zero missing rate observes every cell") {
  auto t = balanced_tree({3, 4, 2});
  auto d = generate_synthetic(t, params({0.0, 0.0, 0.0}));
  REQUIRE(d.levels.size() == 3u);
  for (int l = 1; l <= 3; ++l) {
    CHECK(d.levels[l - 1].level() == l);
    CHECK(d.levels[l - 1].size() == t.nodes_at(l) * 17);
  }
}

TEST_CASE("row and column drifts have the configured variance") {
  auto t = balanced_tree({10, 20, 20});
  auto p = params({0.5, 0.5, 0.5}, 8);
  p.n_cols = 200;
  p.sigma_u = 0.3;
  p.sigma_v = 0.5;
  auto d = generate_synthetic(t, p);
  const auto& f = d.truth;
  for (int l = 1; l <= 3; ++l) {
    double su = 0.0;
    std::size_t nu = 0;
    for (std::size_t n = 0; n < f.U[l].rows(); ++n) {
      const double* par = l == 1 ? f.U[0].vec(0) : f.U[l - 1].vec(t.parent(l, n));
      for (std::size_t i = 0; i < f.k; ++i, ++nu) su += std::pow(f.U[l][n][i] - par[i], 2);
    }
    double sv = 0.0;
    std::size_t nv = 0;
    for (std::size_t m = 0; m < p.n_cols; ++m) {
      for (std::size_t i = 0; i < f.k; ++i, ++nv) sv += std::pow(f.V[l][m][i] - f.V[l - 1][m][i], 2);
    }
    CAPTURE(l);
    if (nu >= 200) CHECK(std::abs(su / nu / 0.09 - 1.0) < 0.1);
    CHECK(std::abs(sv / nv / 0.25 - 1.0) < 0.1);
  }
}

TEST_CASE("observation noise has the configured spread") {
  auto t = balanced_tree({20, 50});
  auto p = params({0.0, 0.0}, 9);
  p.sigma = 0.2;
  auto d = generate_synthetic(t, p);
  double s = 0.0;
  const auto& leaf = d.levels.back();
  for (const auto& e : leaf.entries()) s += std::pow(e.value - predict(d.truth, e.row, e.col), 2);
  CHECK(std::abs(std::sqrt(s / leaf.size()) / 0.2 - 1.0) < 0.05);
}

TEST_CASE("observed fraction follows the missing rate") {
  auto t = balanced_tree({30, 40});
  auto d = generate_synthetic(t, params({0.5, 0.953}, 10));
  const double cells = 1200.0 * 17.0;
  const double q = 1.0 - 0.953;
  const double sd = std::sqrt(cells * q * (1 - q));
  CHECK(std::abs(static_cast<double>(d.levels[1].size()) - cells * q) < 4 * sd);
  const double cells1 = 30.0 * 17.0;
  CHECK(std::abs(static_cast<double>(d.levels[0].size()) - cells1 * 0.5) < 4 * std::sqrt(cells1 * 0.25));
}

TEST_CASE("the sampler is a function of its seed") {
  auto t = balanced_tree({3, 4});
  auto a = generate_synthetic(t, params({0.3, 0.6}, 5));
  auto b = generate_synthetic(t, params({0.3, 0.6}, 5));
  auto c = generate_synthetic(t, params({0.3, 0.6}, 6));
  CHECK(a.truth == b.truth);
  CHECK(a.levels == b.levels);
  CHECK_FALSE(a.truth == c.truth);
}

TEST_CASE("bad rates and spreads are rejected") {
  auto t = balanced_tree({3, 4});
  auto code_of = [&](SyntheticParams p) -> std::optional<ErrorCode> {
    try {
      generate_synthetic(t, p);
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  CHECK(code_of(params({0.3, 1.0})) == ErrorCode::BadRate);
  CHECK(code_of(params({-0.1, 0.5})) == ErrorCode::BadRate);
  CHECK(code_of(params({0.5})) == ErrorCode::BadRate);
  auto p = params({0.5, 0.5});
  p.sigma = -1;
  CHECK(code_of(p) == ErrorCode::InvalidArgument);
}
