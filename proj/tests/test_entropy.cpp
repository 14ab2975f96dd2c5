#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tokenscreen/entropy.hpp"

using namespace tokenscreen;

namespace {

// Dirichlet(1,...,1) samples, rejected until comfortably interior.
Belief random_interior(std::mt19937& rng, std::size_t n) {
  std::exponential_distribution<double> ed(1.0);
  for (;;) {
    Vec p(n);
    double s = 0.0;
    for (auto& x : p) {
      x = ed(rng);
      s += x;
    }
    double last = 1.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      p[i] /= s;
      last -= p[i];
    }
    p[n - 1] = last;
    bool ok = true;
    for (double x : p) ok = ok && x > 1e-4;
    if (ok) return Belief(p);
  }
}

}  // namespace

TEST_CASE("homogeneous extension values") {
  auto sh = EntropyModel::shannon();
  CHECK(entropy_value(sh, {0.5, 0.5}) == Catch::Approx(-std::log(2.0)).margin(1e-15));
  CHECK(entropy_value(sh, {1.0, 0.0}) == Catch::Approx(0.0).margin(1e-15));
  // degree-1 homogeneity
  CHECK(entropy_value(sh, {0.2, 0.3}) ==
        Catch::Approx(0.5 * entropy_value(sh, {0.4, 0.6})).margin(1e-14));

  auto qb = EntropyModel::quadratic_binary();
  CHECK(entropy_value(qb, {0.5, 0.5}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(entropy_value(qb, {0.0, 1.0}) == Catch::Approx(0.25).margin(1e-15));
  CHECK(entropy_value(qb, {0.4, 0.6}) == Catch::Approx(0.01).margin(1e-15));

  CHECK_THROWS_AS(entropy_value(sh, {0.0, 0.0}), validation_error);
  CHECK_THROWS_AS(entropy_value(sh, {-0.1, 1.1}), validation_error);
  CHECK_THROWS_AS(EntropyModel::quadratic_binary(1.5), validation_error);
}

TEST_CASE("bregman divergences to vertices") {
  auto qb = EntropyModel::quadratic_binary();
  Belief half = Belief::binary(0.5);
  CHECK(bregman(qb, Belief::vertex(2, 0), half) == Catch::Approx(0.25).margin(1e-14));
  CHECK(bregman(qb, Belief::vertex(2, 1), half) == Catch::Approx(0.25).margin(1e-14));
  CHECK(bregman(qb, half, half) == Catch::Approx(0.0).margin(1e-15));

  auto sh = EntropyModel::shannon();
  Belief mu(Vec{0.6, 0.4});
  CHECK(divergence_to_state(sh, 0, mu) == Catch::Approx(-std::log(0.6)).margin(1e-12));
  CHECK(divergence_to_state(sh, 1, mu) == Catch::Approx(-std::log(0.4)).margin(1e-12));

  // quadratic alpha=2 closed form: D(e_1|mu) = mu0^2, D(e_0|mu) = mu1^2
  Belief b = Belief::binary(0.6);
  CHECK(divergence_to_state(qb, 1, b) == Catch::Approx(0.16).margin(1e-14));
  CHECK(divergence_to_state(qb, 0, b) == Catch::Approx(0.36).margin(1e-14));

  CHECK_THROWS_AS(bregman(sh, mu, Belief::vertex(2, 0)), validation_error);
}

TEST_CASE("hessian submatrices") {
  auto sh = EntropyModel::shannon();
  Belief half = Belief::binary(0.5);
  Mat m = hessian_submatrix(sh, half, {0, 1});
  CHECK(m(0, 0) == Catch::Approx(1.0).margin(1e-14));
  CHECK(m(0, 1) == Catch::Approx(-1.0).margin(1e-14));
  CHECK(m(1, 0) == Catch::Approx(-1.0).margin(1e-14));
  CHECK(m(1, 1) == Catch::Approx(1.0).margin(1e-14));

  auto qb = EntropyModel::quadratic_binary();
  Mat s = hessian_submatrix(qb, Belief::binary(0.6), {1});
  REQUIRE(s.rows() == 1);
  CHECK(s(0, 0) == Catch::Approx(2.0 * 0.4 * 0.4).margin(1e-14));
  CHECK(s(0, 0) > 0.0);
}

TEST_CASE("normalization identities at random interior beliefs") {
  std::mt19937 rng(20240817);
  auto sh = EntropyModel::shannon();
  auto qb = EntropyModel::quadratic_binary();
  for (int it = 0; it < 1000; ++it) {
    std::size_t n = 2 + (it % 2);
    Belief mu = random_interior(rng, n);
    const EntropyModel& model = (n == 2 && it % 4 == 0) ? qb : sh;
    Vec g = model.gradient(mu);
    CHECK(std::abs(dot(g, mu.probs()) - model.value(mu.probs())) < 1e-9);
    Mat h = model.hessian(mu);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < h.cols(); ++c) acc += h(r, c) * mu[c];
      CHECK(std::abs(acc) < 1e-9);
    }
    // normalized Bregman identity D(t|b) = H(t) - grad H(b) . t
    Belief target = random_interior(rng, n);
    double d1 = bregman(model, target, mu);
    double d2 = model.value(target.probs()) - dot(g, target.probs());
    CHECK(std::abs(d1 - d2) < 1e-10);
    CHECK(d1 >= -1e-12);
  }
}

TEST_CASE("gradient and hessian match finite differences") {
  std::mt19937 rng(7);
  auto sh = EntropyModel::shannon();
  auto qb = EntropyModel::quadratic_binary();
  const double step = 1e-6;
  for (int it = 0; it < 50; ++it) {
    std::size_t n = (it % 2) ? 3 : 2;
    const EntropyModel& model = (n == 2 && it % 4 == 0) ? qb : sh;
    Belief mu = random_interior(rng, n);
    Vec g = model.gradient(mu);
    for (std::size_t k = 0; k < n; ++k) {
      Vec hi = mu.probs(), lo = mu.probs();
      hi[k] += step;
      lo[k] -= step;
      double fd = (model.value(hi) - model.value(lo)) / (2 * step);
      CHECK(std::abs(fd - g[k]) < 1e-6 * std::max(1.0, std::abs(g[k])));
    }
    Mat h = model.hessian(mu);
    for (std::size_t k = 0; k < n; ++k) {
      // FD of the gradient along simplex-tangent directions only: the
      // homogeneous extension fixes the normal component, so perturb and
      // renormalize.
      Vec hi = mu.probs(), lo = mu.probs();
      std::size_t other = (k + 1) % n;
      hi[k] += step;
      hi[other] -= step;
      lo[k] -= step;
      lo[other] += step;
      Vec gh = model.gradient(Belief(hi)), gl = model.gradient(Belief(lo));
      for (std::size_t r = 0; r < n; ++r) {
        double fd = (gh[r] - gl[r]) / (2 * step);
        double an = h(r, k) - h(r, other);
        CHECK(std::abs(fd - an) < 2e-5 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("submatrix definiteness and sign pattern") {
  std::mt19937 rng(99);
  auto sh = EntropyModel::shannon();
  for (int it = 0; it < 200; ++it) {
    Belief mu = random_interior(rng, 3);
    for (const std::vector<int>& act : {std::vector<int>{0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}}) {
      Mat s = hessian_submatrix(sh, mu, act);
      Eigen::SelfAdjointEigenSolver<Mat> es(s);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      for (Eigen::Index r = 0; r < s.rows(); ++r)
        for (Eigen::Index c = 0; c < s.cols(); ++c)
          if (r != c) CHECK(s(r, c) <= 0.0);
    }
  }
}

TEST_CASE("assumption diagnostics") {
  auto sh = EntropyModel::shannon();
  auto rep = assumption1_report(sh, 100);
  CHECK(rep.pass);
  CHECK(rep.sup_min_divergence == Catch::Approx(std::log(2.0)).margin(1e-9));
  CHECK(rep.min_closest_prob == Catch::Approx(0.5).margin(1e-12));
  CHECK(rep.max_cross_term == Catch::Approx(-1.0).margin(1e-9));

  auto qb = EntropyModel::quadratic_binary();
  auto repq = assumption1_report(qb, 100);
  CHECK(repq.pass);
  CHECK(repq.sup_min_divergence == Catch::Approx(0.25).margin(1e-9));

  auto rep3 = assumption1_report(sh, 60, 3);
  CHECK(rep3.pass);
  CHECK(rep3.sup_min_divergence == Catch::Approx(std::log(3.0)).margin(1e-9));

  // synthetic violation of the cross condition: negated shannon curvature
  auto bad = EntropyModel::custom(
      [](const Vec& x) { return -EntropyModel::shannon().value(x); },
      [](const Vec& mu) {
        Vec g = EntropyModel::shannon().gradient(Belief(mu));
        for (auto& v : g) v = -v;
        return g;
      },
      [](const Vec& mu) { return Mat(-EntropyModel::shannon().hessian(Belief(mu))); },
      "nats");
  auto repb = assumption1_report(bad, 20);
  CHECK_FALSE(repb.part3_pass);
  CHECK_FALSE(repb.pass);
}
