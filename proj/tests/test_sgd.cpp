#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hpmf/error.hpp"
#include "hpmf/factorization.hpp"
#include "support.hpp"

using namespace hpmf;
using testing::balanced_tree;
using testing::random_factors;
using testing::random_levels;

namespace {

Hyperparams small_hyper(std::size_t k = 3) {
  Hyperparams h;
  h.k = k;
  h.lambda_u = 0.2;
  h.lambda_v = 0.3;
  h.learning_rate = 0.01;
  h.epochs_per_level = 5;
  h.max_passes = 4;
  h.patience = 2;
  h.seed = 99;
  return h;
}

bool has_row(const SparseTraitMatrix& x, std::size_t r) { return x.row_count(r) > 0; }
bool has_col(const SparseTraitMatrix& x, std::size_t c) { return x.col_count(c) > 0; }

// Ridge-toward-zero objective of one level, evaluated densely.
double naive_ridge(const FactorSet& f, const SparseTraitMatrix& x, int l, const Hyperparams& h) {
  double e = 0.0;
  for (const auto& t : x.entries()) {
    double p = 0.0;
    for (std::size_t i = 0; i < f.k; ++i) p += f.U[l][t.row][i] * f.V[l][t.col][i];
    e += (t.value - p) * (t.value - p);
  }
  for (double u : f.U[l].values()) e += h.lambda_u * u * u;
  for (double v : f.V[l].values()) e += h.lambda_v * v * v;
  return e;
}

}  // namespace

TEST_CASE("batch SGD direction is half the negative gradient with mean child coupling") {
  std::mt19937_64 rng(21);
  auto t = balanced_tree({2, 3, 2});
  const auto h = small_hyper();
  for (int trial = 0; trial < 5; ++trial) {
    auto data = random_levels(t, 4, 0.6, rng);
    auto f = random_factors(t, 4, h.k, rng);
    for (int l = 1; l <= t.depth(); ++l) {
      CAPTURE(l);
      const auto dir = sgd_batch_direction(l, f, data, t, h);
      const auto grad = gradient_level(l, f, data, t, h, ChildCoupling::Mean);
      const auto& x = data[l - 1];
      for (std::size_t n = 0; n < f.U[l].rows(); ++n) {
        for (std::size_t i = 0; i < h.k; ++i) {
          const double want = has_row(x, n) ? -0.5 * grad.du[n][i] : 0.0;
          CHECK(dir.du[n][i] == doctest::Approx(want).epsilon(1e-10).scale(1.0));
        }
      }
      for (std::size_t m = 0; m < f.V[l].rows(); ++m) {
        for (std::size_t i = 0; i < h.k; ++i) {
          const double want = has_col(x, m) ? -0.5 * grad.dv[m][i] : 0.0;
          CHECK(dir.dv[m][i] == doctest::Approx(want).epsilon(1e-10).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("zero-prior direction is half the negative ridge gradient") {
  std::mt19937_64 rng(22);
  auto t = balanced_tree({3, 4});
  auto h = small_hyper(2);
  auto data = random_levels(t, 3, 1.0, rng);
  auto f = random_factors(t, 3, h.k, rng);
  for (int l = 1; l <= 2; ++l) {
    const auto dir = sgd_batch_direction(l, f, data, t, h, Prior::Zero);
    const double step = 1e-6;
    for (std::size_t n = 0; n < f.U[l].rows(); ++n) {
      for (std::size_t i = 0; i < h.k; ++i) {
        FactorSet g = f;
        g.U[l][n][i] += step;
        const double up = naive_ridge(g, data[l - 1], l, h);
        g.U[l][n][i] -= 2 * step;
        const double down = naive_ridge(g, data[l - 1], l, h);
        CHECK(dir.du[n][i] == doctest::Approx(-0.25 * (up - down) / step).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("a vanishing learning rate turns one epoch into the batch direction") {
  std::mt19937_64 rng(23);
  auto t = balanced_tree({2, 2, 3});
  auto h = small_hyper();
  h.learning_rate = 1e-9;
  auto data = random_levels(t, 3, 0.7, rng);
  auto f = random_factors(t, 3, h.k, rng);
  for (int l = 1; l <= t.depth(); ++l) {
    FactorSet g = f;
    Rng r(5);
    sgd_epoch_level(l, g, data, t, h, r);
    const auto dir = sgd_batch_direction(l, f, data, t, h);
    for (std::size_t i = 0; i < g.U[l].values().size(); ++i) {
      const double moved = (g.U[l].values()[i] - f.U[l].values()[i]) / h.learning_rate;
      CHECK(moved == doctest::Approx(dir.du.values()[i]).epsilon(1e-4).scale(1e-3));
    }
    for (std::size_t i = 0; i < g.V[l].values().size(); ++i) {
      const double moved = (g.V[l].values()[i] - f.V[l].values()[i]) / h.learning_rate;
      CHECK(moved == doctest::Approx(dir.dv.values()[i]).epsilon(1e-4).scale(1e-3));
    }
  }
}

TEST_CASE("an epoch touches only its own level and is reproducible") {
  std::mt19937_64 rng(24);
  auto t = balanced_tree({2, 3, 2});
  const auto h = small_hyper();
  auto data = random_levels(t, 4, 0.5, rng);
  const auto f = random_factors(t, 4, h.k, rng);
  for (int l = 1; l <= t.depth(); ++l) {
    FactorSet a = f, b = f;
    Rng ra(77), rb(77);
    sgd_epoch_level(l, a, data, t, h, ra);
    sgd_epoch_level(l, b, data, t, h, rb);
    CHECK(a == b);
    for (int j = 0; j <= t.depth(); ++j) {
      if (j == l) {
        CHECK_FALSE(a.U[j] == f.U[j]);
        continue;
      }
      CHECK(a.U[j] == f.U[j]);
      CHECK(a.V[j] == f.V[j]);
    }
  }
}

TEST_CASE("a diverging step raises NonFiniteUpdate") {
  std::mt19937_64 rng(25);
  auto t = balanced_tree({4});
  auto h = small_hyper();
  h.learning_rate = 1e6;
  auto data = random_levels(t, 3, 1.0, rng);
  auto f = random_factors(t, 3, h.k, rng, 3.0);
  Rng r(1);
  try {
    for (int e = 0; e < 50; ++e) sgd_epoch_level(1, f, data, t, h, r);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteUpdate);
  }
}

TEST_CASE("hyperparameter validation") {
  auto bad = [](auto mutate) {
    Hyperparams h;
    mutate(h);
    try {
      h.validate();
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidArgument;
    }
  };
  CHECK(bad([](Hyperparams& h) { h.k = 0; }));
  CHECK(bad([](Hyperparams& h) { h.lambda_u = -1; }));
  CHECK(bad([](Hyperparams& h) { h.lambda_v = std::nan(""); }));
  CHECK(bad([](Hyperparams& h) { h.learning_rate = 0; }));
  CHECK(bad([](Hyperparams& h) { h.epochs_per_level = 0; }));
  CHECK(bad([](Hyperparams& h) { h.max_passes = 0; }));
  CHECK(bad([](Hyperparams& h) { h.patience = 0; }));
  CHECK_NOTHROW(Hyperparams{}.validate());
}

TEST_CASE("PMF on a single observation converges to the ridge optimum") {
  // min (2 - uv)^2 + lambda (u^2 + v^2) with lambda = 0.01 gives uv = 2 - lambda.
  SparseTraitMatrix x(1, 1, 1, {{0, 0, 2.0}});
  Hyperparams h;
  h.k = 1;
  h.lambda_u = h.lambda_v = 0.01;
  h.learning_rate = 0.05;
  h.epochs_per_level = 2000;
  h.max_passes = 3;
  h.init_scale = 0.1;
  auto r = train_pmf(x, SparseTraitMatrix(1, 1, 1, {}), h);
  CHECK(predict(r.factors, 0, 0) == doctest::Approx(1.99).epsilon(1e-4));
}

TEST_CASE("training without leaf data fails") {
  auto t = balanced_tree({2, 2});
  const auto h = small_hyper();
  std::vector<SparseTraitMatrix> data{SparseTraitMatrix(1, 2, 2, {{0, 0, 1.0}}), SparseTraitMatrix(2, 4, 2, {})};
  SparseTraitMatrix val(2, 4, 2, {});
  for (auto fn : {train_hpmf, train_hrpmf, train_lpmf}) {
    try {
      fn(data, val, t, h);
      FAIL("expected EmptyTrainingSet");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyTrainingSet);
    }
  }
  CHECK_THROWS_AS(train_pmf(data[1], val, h), Error);
}

TEST_CASE("HPMF on a one-level tree is flat PMF") {
  std::mt19937_64 rng(26);
  auto t = balanced_tree({30});
  auto leaf = testing::random_matrix(1, 30, 6, 0.5, rng);
  auto val = testing::random_matrix(1, 30, 6, 0.1, rng);
  const auto h = small_hyper(4);
  const SparseTraitMatrix data[] = {leaf};
  auto a = train_hpmf(data, val, t, h);
  auto b = train_pmf(leaf, val, h);
  CHECK(a.factors == b.factors);
  CHECK(identical(a.trace, b.trace));
}

TEST_CASE("training is reproducible for a fixed seed") {
  std::mt19937_64 rng(27);
  auto t = balanced_tree({2, 3, 4});
  auto data = random_levels(t, 5, 0.5, rng);
  auto val = testing::random_matrix(3, t.nodes_at(3), 5, 0.1, rng);
  auto h = small_hyper();
  for (auto fn : {train_hpmf, train_hrpmf, train_lpmf}) {
    auto a = fn(data, val, t, h);
    auto b = fn(data, val, t, h);
    CHECK(a.factors == b.factors);
    CHECK(identical(a.trace, b.trace));
  }
  auto a = train_hpmf(data, val, t, h);
  h.seed += 1;
  auto c = train_hpmf(data, val, t, h);
  CHECK_FALSE(a.factors == c.factors);
}

TEST_CASE("validation that worsens every pass stops after the patience window") {
  std::mt19937_64 rng(28);
  auto t = balanced_tree({3, 10});
  auto data = random_levels(t, 4, 0.8, rng);
  // Validation targets are the negated training targets, so fitting hurts.
  const auto& leaf = data.back();
  std::vector<double> neg;
  for (const auto& e : leaf.entries()) neg.push_back(-e.value);
  const auto val = leaf.with_values(neg);
  auto h = small_hyper();
  h.max_passes = 20;
  h.patience = 3;
  h.learning_rate = 0.02;
  const auto r = train_hpmf(data, val, t, h);
  CHECK(r.trace.stop_reason == StopReason::EarlyStop);
  CHECK(r.trace.passes.size() == 1u + 3u);
  CHECK(r.trace.best_pass == 1);
}

TEST_CASE("the returned factors are the best validation snapshot") {
  std::mt19937_64 rng(29);
  auto t = balanced_tree({3, 8});
  auto data = random_levels(t, 5, 0.6, rng);
  auto val = testing::random_matrix(2, t.nodes_at(2), 5, 0.2, rng);
  auto h = small_hyper();
  h.max_passes = 8;
  h.patience = 2;
  const auto r = train_hpmf(data, val, t, h);
  REQUIRE(r.trace.best_pass >= 1);
  const auto& best = r.trace.passes[static_cast<std::size_t>(r.trace.best_pass - 1)];
  CHECK(leaf_rmse(r.factors, val) == best.validation_rmse);
  for (const auto& p : r.trace.passes) CHECK(p.validation_rmse >= best.validation_rmse);
  // Two sweeps of L steps per pass.
  CHECK(r.trace.steps.size() == r.trace.passes.size() * 2 * 2);
}

TEST_CASE("without validation data every pass runs and the last is kept") {
  std::mt19937_64 rng(30);
  auto t = balanced_tree({2, 5});
  auto data = random_levels(t, 3, 0.6, rng);
  auto h = small_hyper();
  h.max_passes = 3;
  const auto r = train_hpmf(data, SparseTraitMatrix(2, 10, 3, {}), t, h);
  CHECK(r.trace.passes.size() == 3u);
  CHECK(r.trace.best_pass == 3);
  CHECK(r.trace.stop_reason == StopReason::MaxPasses);
}

TEST_CASE("HPMF objective does not increase over the first passes") {
  std::mt19937_64 rng(31);
  auto t = balanced_tree({3, 4, 5});
  auto truth = random_factors(t, 6, 3, rng, 0.7);
  std::vector<SparseTraitMatrix> data;
  for (int l = 1; l <= 3; ++l) {
    Rng mask(l), noise(l + 10);
    data.push_back(sample_observations(l, truth, 0.1, 0.5, mask, noise));
  }
  auto h = small_hyper();
  h.max_passes = 3;
  h.patience = 3;
  const auto r = train_hpmf(data, SparseTraitMatrix(3, t.nodes_at(3), 6, {}), t, h);
  REQUIRE(r.trace.passes.size() == 3u);
  for (std::size_t i = 1; i < 3; ++i) CHECK(r.trace.passes[i].objective <= r.trace.passes[i - 1].objective);
}

TEST_CASE("HRPMF block update minimizes over a data-free level") {
  std::mt19937_64 rng(32);
  auto t = balanced_tree({2, 3, 2, 2});
  const auto h = small_hyper(3);
  auto data = random_levels(t, 4, 0.5, rng);
  auto f = random_factors(t, 4, h.k, rng);
  for (int l = 1; l < t.depth(); ++l) {
    FactorSet g = f;
    hrpmf_block_update(l, g, t);
    const double before = objective_hrpmf(f, data, t, h);
    const double after = objective_hrpmf(g, data, t, h);
    CHECK(after <= before);
    const auto grad = gradient_hrpmf(l, g, data, t, h);
    for (double x : grad.du.values()) CHECK(std::abs(x) <= 1e-12);
    for (double x : grad.dv.values()) CHECK(std::abs(x) <= 1e-12);
  }
  CHECK_THROWS_AS(hrpmf_block_update(t.depth(), f, t), Error);
  CHECK_THROWS_AS(hrpmf_block_update(0, f, t), Error);
}

TEST_CASE("HRPMF leaves upper levels at neighbour averages") {
  std::mt19937_64 rng(33);
  auto t = balanced_tree({2, 3, 4});
  auto data = random_levels(t, 4, 0.6, rng);
  const auto h = small_hyper();
  const auto r = train_hrpmf(data, SparseTraitMatrix(3, t.nodes_at(3), 4, {}), t, h);
  // The final sweep is bottom-up and ends at level 1, so level 1 is a fixed point.
  FactorSet g = r.factors;
  hrpmf_block_update(1, g, t);
  for (std::size_t i = 0; i < g.U[1].values().size(); ++i) {
    CHECK(g.U[1].values()[i] == doctest::Approx(r.factors.U[1].values()[i]).epsilon(1e-12));
  }
}
