#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tokenscreen/baselines.hpp"

using namespace tokenscreen;

TEST_CASE("constant delay needs two units of time on the leading example") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  auto cd = constant_delay_solution(tm, EntropyModel::quadratic_binary(),
                                    Belief::binary(0.5), 0.125);
  CHECK(cd.t_min == Catch::Approx(2.0).margin(1e-12));

  // take-it-or-leave-it offer: t = 2 at price e^{-3} for r <= 1.5
  CHECK(cd.screen.cutoff == Catch::Approx(1.5).margin(1e-9));
  for (const auto& row : cd.screen.rows) {
    if (row.r < 1.5 - 1e-9) {
      CHECK(row.served);
      CHECK(row.a == Catch::Approx(2.0).margin(1e-12));
      CHECK(row.price == Catch::Approx(std::exp(-3.0)).margin(1e-10));
      // IR and the decline decision above the cutoff
      CHECK(row.utility - row.price >= -1e-12);
    }
    if (row.r > 1.5 + 1e-9) {
      CHECK_FALSE(row.served);
      CHECK(row.price == 0.0);
      CHECK(std::exp(-2.0 * row.r) - std::exp(-3.0) < 1e-12);
    }
  }
  CHECK(cd.revenue() == Catch::Approx(0.5 * std::exp(-3.0)).margin(1e-9));
  CHECK(cd.screen.revenue_price_route == Catch::Approx(0.5 * std::exp(-3.0)).margin(1e-9));
}

TEST_CASE("shannon entropy budget gives the same minimal delay") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  auto cd = constant_delay_solution(tm, EntropyModel::shannon(), Belief::binary(0.5),
                                    0.5 * std::log(2.0));
  CHECK(cd.t_min == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("diffusion family pools everyone at the corner allocation") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  auto df = diffusion_solution(tm, 0.125);
  double sigma_star = 1.0 / (2.0 * std::sqrt(2.0));
  double flat = 1.0 / std::cosh(2.0 * std::sqrt(2.0));

  CHECK(df.sigma_cap == Catch::Approx(sigma_star).margin(1e-15));
  CHECK(df.screen.cutoff == Catch::Approx(2.0).margin(1e-12));
  for (const auto& row : df.screen.rows) {
    CHECK(row.served);
    CHECK(row.a == Catch::Approx(sigma_star).margin(1e-12));
    CHECK(row.price == Catch::Approx(flat).margin(1e-10));
    CHECK(row.utility - row.price >= -1e-12);
  }
  CHECK(df.revenue() == Catch::Approx(flat).margin(1e-9));
  CHECK(df.revenue() == Catch::Approx(0.11779996022607334).margin(1e-9));
}

TEST_CASE("sech evaluation is monotone, symmetric and overflow safe") {
  CHECK(sech(0.0) == 1.0);
  CHECK(sech(2.0 * std::sqrt(2.0)) == Catch::Approx(0.11779996022607334).margin(1e-15));
  CHECK(sech(-3.0) == Catch::Approx(sech(3.0)).margin(0.0));
  CHECK(sech(800.0) == 0.0);
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0}) CHECK(sech(x) > sech(x + 0.1));

  // U(sigma | r) increasing in sigma, decreasing in r
  auto U = [](double s, double r) { return sech(std::sqrt(0.5 * r) / s); };
  CHECK(U(0.3, 1.5) < U(0.35, 1.5));
  CHECK(U(0.3, 1.8) < U(0.3, 1.2));
}

TEST_CASE("screen_1d prices are discretely incentive compatible") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  auto cd = constant_delay_solution(tm, EntropyModel::quadratic_binary(),
                                    Belief::binary(0.5), 0.125);
  const auto& rows = cd.screen.rows;
  for (std::size_t i = 0; i < rows.size(); i += 10) {
    if (!rows[i].served) continue;
    double own = rows[i].utility - rows[i].price;
    for (std::size_t j = 0; j < rows.size(); j += 10) {
      if (!rows[j].served) continue;
      double cross = std::exp(-rows[i].r * rows[j].a) - rows[j].price;
      CHECK(own >= cross - 1e-8);
    }
    CHECK(own >= -1e-8);  // the null option
  }
}

TEST_CASE("nearly degenerate types pay their own utility as a monopoly price") {
  auto tm = TypeModel::uniform(1.5, 1.5 + 1e-8);
  auto cd = constant_delay_solution(tm, EntropyModel::quadratic_binary(),
                                    Belief::binary(0.5), 0.125);
  for (const auto& row : cd.screen.rows) {
    CHECK(row.served);
    CHECK(row.price == Catch::Approx(std::exp(-3.0)).margin(1e-6));
    CHECK(row.utility == Catch::Approx(std::exp(-3.0)).margin(1e-6));
  }
  CHECK(cd.revenue() == Catch::Approx(std::exp(-3.0)).margin(1e-6));
}

TEST_CASE("revenue ordering across the three mechanisms") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  auto entropy = EntropyModel::quadratic_binary();
  auto mu0 = Belief::binary(0.5);

  auto cd = constant_delay_solution(tm, entropy, mu0, 0.125);
  auto df = diffusion_solution(tm, 0.125);
  auto menu = build_menu(stopping_law(build_skeleton(entropy, mu0, 0.125)), tm);
  double top = menu_revenue(menu, tm);

  CHECK(cd.revenue() < df.revenue());
  CHECK(df.revenue() < top);
  CHECK(df.revenue() / cd.revenue() == Catch::Approx(4.73215090134167).margin(1e-6));
  CHECK(top / cd.revenue() == Catch::Approx(8.113776566389241).margin(1e-5));
}

TEST_CASE("baseline input validation") {
  auto tm = TypeModel::uniform(1.0, 2.0);
  CHECK_THROWS_AS(constant_delay_solution(tm, EntropyModel::shannon(), Belief::binary(0.5), 0.0),
                  validation_error);
  CHECK_THROWS_AS(diffusion_solution(tm, -0.1), validation_error);
  ScreenFamily empty;
  empty.utility = [](double, double) { return 0.0; };
  empty.utility_r = [](double, double) { return 0.0; };
  CHECK_THROWS_AS(screen_1d(empty, tm), validation_error);
}
