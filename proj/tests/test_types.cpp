#include <doctest.h>

#include <cmath>
#include <set>

#include "massive/rng.hpp"
#include "massive/types.hpp"
#include "support/test_util.hpp"

using namespace massive;

TEST_CASE("packed coordinate layout is alpha, kappa, beta, log sds, gammas") {
  const int j = 3;
  ScaledParams p;
  p.alpha_t = Vec::LinSpaced(j, 1.0, 3.0);
  p.kappa_t = Vec::LinSpaced(j, 4.0, 6.0);
  p.beta_t = 7.0;
  p.log_sd_x = 8.0;
  p.log_sd_y = 9.0;
  p.gamma_x_t = 10.0;
  p.gamma_y_t = 11.0;

  const Vec v = p.pack();
  REQUIRE(v.size() == ScaledParams::dim(j));
  REQUIRE(v.size() == 2 * j + 5);
  for (int c = 0; c < j; ++c) {
    CHECK(v[c] == p.alpha_t[c]);
    CHECK(v[j + c] == p.kappa_t[c]);
  }
  CHECK(v[2 * j] == 7.0);
  CHECK(v[2 * j + 1] == 8.0);
  CHECK(v[2 * j + 2] == 9.0);
  CHECK(v[2 * j + 3] == 10.0);
  CHECK(v[2 * j + 4] == 11.0);

  const ScaledParams q = ScaledParams::unpack(v);
  CHECK((q.pack().array() == v.array()).all());

  CHECK_THROWS_AS(ScaledParams::unpack(Vec::Zero(6)), error);  // even length is never valid
}

TEST_CASE("scale/unscale round trip is exact to 1e-12") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const int j = 1 + static_cast<int>(rng.next_below(6));
    UnscaledParams u;
    u.alpha.resize(j);
    u.kappa.resize(j);
    Vec sd_g(j);
    for (int c = 0; c < j; ++c) {
      u.alpha[c] = rng.next_normal();
      u.kappa[c] = rng.next_normal();
      sd_g[c] = 0.2 + rng.next_double();
    }
    u.beta = rng.next_normal();
    u.gamma_x = rng.next_normal();
    u.gamma_y = rng.next_normal();
    u.sd_x = 0.2 + rng.next_double();
    u.sd_y = 0.2 + rng.next_double();

    const UnscaledParams back = unscale_params(scale_params(u, sd_g), sd_g);
    CHECK((back.alpha - u.alpha).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((back.kappa - u.kappa).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(back.beta == doctest::Approx(u.beta).epsilon(1e-12));
    CHECK(back.gamma_x == doctest::Approx(u.gamma_x).epsilon(1e-12));
    CHECK(back.gamma_y == doctest::Approx(u.gamma_y).epsilon(1e-12));
    CHECK(back.sd_x == doctest::Approx(u.sd_x).epsilon(1e-12));
    CHECK(back.sd_y == doctest::Approx(u.sd_y).epsilon(1e-12));
  }
}

TEST_CASE("scaling formulas on hand values") {
  UnscaledParams u;
  u.alpha = Vec::Constant(1, 2.0);
  u.kappa = Vec::Constant(1, 3.0);
  u.beta = 0.5;
  u.gamma_x = 0.8;
  u.gamma_y = -1.0;
  u.sd_x = 1.0;
  u.sd_y = 2.0;
  const Vec sd_g = Vec::Constant(1, 0.5);

  const ScaledParams s = scale_params(u, sd_g);
  CHECK(s.alpha_t[0] == doctest::Approx(1.0));            // α σ_G / σ_X
  CHECK(s.kappa_t[0] == doctest::Approx(0.75));           // κ σ_G / σ_Y
  CHECK(s.beta_t == doctest::Approx(0.25));               // β σ_X / σ_Y
  CHECK(s.log_sd_x == doctest::Approx(0.0));
  CHECK(s.log_sd_y == doctest::Approx(std::log(2.0)));
  CHECK(s.gamma_x_t == doctest::Approx(0.8));             // γ_X / σ_X
  CHECK(s.gamma_y_t == doctest::Approx(-0.5));            // γ_Y / σ_Y

  // Data-scale causal effect needs only the scaled vector.
  CHECK(unscaled_beta(s) == doctest::Approx(0.5));

  ScaledParams t;
  t.alpha_t = Vec::Zero(1);
  t.kappa_t = Vec::Zero(1);
  t.beta_t = 0.5;
  t.log_sd_x = 0.0;
  t.log_sd_y = std::log(2.0);
  CHECK(unscaled_beta(t) == doctest::Approx(1.0));

  CHECK_THROWS_AS(scale_params(UnscaledParams{Vec::Zero(1), Vec::Zero(1), 0, 0, 0, -1.0, 1.0},
                               Vec::Ones(1)),
                  error);
  CHECK_THROWS_AS(scale_params(u, Vec::Zero(1)), error);  // zero candidate scale
}

TEST_CASE("model indicators behave as bitmasks over J candidates") {
  const int j = 5;
  const ModelIndicator spike = ModelIndicator::all_spike(j);
  const ModelIndicator slab = ModelIndicator::all_slab(j);
  CHECK(spike.bits == 0);
  CHECK(slab.bits == 0x1f);
  CHECK(spike.slab_count() == 0);
  CHECK(slab.slab_count() == j);
  CHECK(spike.to_hex() == "0x0");
  CHECK(slab.to_hex() == "0x1f");

  for (int idx = 0; idx < j; ++idx) {
    CHECK(!spike.slab(idx));
    CHECK(slab.slab(idx));
    const ModelIndicator flipped = spike.with_flip(idx);
    CHECK(flipped.slab(idx));
    CHECK(flipped.slab_count() == 1);
    CHECK(flipped.with_flip(idx) == spike);  // involution
  }

  // All 2^3 indicators reachable by flips are distinct.
  std::set<std::uint64_t> seen;
  for (int b = 0; b < 8; ++b) {
    ModelIndicator m = ModelIndicator::all_spike(3);
    for (int idx = 0; idx < 3; ++idx)
      if ((b >> idx) & 1) m = m.with_flip(idx);
    CHECK(static_cast<int>(m.bits) == b);
    seen.insert(m.bits);
  }
  CHECK(seen.size() == 8);

  CHECK(ModelIndicator::all_slab(64).slab_count() == 64);
  CHECK_THROWS_AS(ModelIndicator::all_spike(0), error);
  CHECK_THROWS_AS(ModelIndicator::all_spike(65), error);
  CHECK_THROWS_AS(spike.with_flip(j), error);
  CHECK_THROWS_AS(spike.with_flip(-1), error);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams h;
  CHECK_NOTHROW(h.validate());

  h.sd_spike = 0.0;
  CHECK_THROWS_AS(h.validate(), error);
  h.sd_spike = 2.0;  // spike wider than slab
  CHECK_THROWS_AS(h.validate(), error);
  h = Hyperparams{};
  h.var_weak = 0.0;
  CHECK_THROWS_AS(h.validate(), error);
}

TEST_CASE("sufficient statistics validate shape and definiteness") {
  Rng rng(7);
  SufficientStats s = test_util::random_stats(rng, 2, 200);
  CHECK_NOTHROW(s.validate());

  SUBCASE("dimension mismatch") {
    s.m_gx = Vec::Zero(3);
    CHECK_THROWS_AS(s.validate(), error);
  }
  SUBCASE("non-finite moment") {
    s.m_xx = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(s.validate(), error);
  }
  SUBCASE("raw second moment must be positive definite") {
    s.m_gg.setZero();
    try {
      s.validate();
      CHECK(false);
    } catch (const error& e) {
      CHECK(e.kind() == errc::degenerate_input);
    }
  }
  SUBCASE("empty stats are degenerate") {
    SufficientStats empty;
    CHECK_THROWS_AS(empty.validate(), error);
  }
}

TEST_CASE("candidate scales fall back to unit for constant columns") {
  SufficientStats s;
  s.n = 100;
  s.mean_g = Vec::Constant(2, 1.0);
  s.m_gg = Mat::Identity(2, 2);
  s.m_gg(0, 0) = 1.25;  // Var = 0.25
  s.m_gg(1, 1) = 1.0;   // Var = 0 exactly: constant (intercept-style) column
  const Vec sc = s.scale_g();
  CHECK(sc[0] == doctest::Approx(0.5));
  CHECK(sc[1] == 1.0);
}
