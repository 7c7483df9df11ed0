#include <doctest.h>

#include <cmath>

#include "selfcheck/errors.hpp"
#include "selfcheck/rng.hpp"
#include "selfcheck/sim.hpp"

using namespace selfcheck;

TEST_CASE("bound arithmetic") {
  CHECK(theoretical_bound(0.6, 0.4, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(theoretical_bound(0.6, 0.4, 9) == doctest::Approx(32.0 / 243.0));
  CHECK(theoretical_bound(0.6, 0.2, 3) == doctest::Approx(2.0 / 9.0));
  CHECK(theoretical_bound(0.6, 0.2, 4) == doctest::Approx(2.0 / 9.0));
  CHECK(theoretical_bound(0.6, 0.3, 5) == doctest::Approx(0.25));
  // (1 - 0.7) / 0.1 rounds to just under 3 in binary; the ratio is still 3.
  CHECK(theoretical_bound(0.7, 0.1, 1) == doctest::Approx(3.0 / 7.0));
  // Clamped to a probability.
  CHECK(theoretical_bound(0.3, 0.1, 1) == 1.0);
  CHECK_THROWS_AS(theoretical_bound(0.4, 0.4, 3), InvalidRegime);
  CHECK_THROWS_AS(theoretical_bound(0.4, 0.5, 3), InvalidRegime);
  CHECK_THROWS_AS(theoretical_bound(0.4, 0.0, 3), InvalidRegime);
}

TEST_CASE("distributions and checker models are validated") {
  CHECK_THROWS_AS((AnswerDistribution{0.7, 0.4, 3}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AnswerDistribution{0.5, 0.3, 0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((AnswerDistribution{0.5, 0.5, 0}.validate()));
  CHECK_THROWS_AS((CheckerModel{1.2, 0.5, 0.9, 0.1}.validate()), std::invalid_argument);
}

TEST_CASE("single sample votes are exact") {
  const AnswerDistribution d{0.35, 0.45, 3};
  const ExactMajority e = exact_majority(d, 1);
  CHECK(e.p_wrong == doctest::Approx(0.65));
  CHECK(e.acc_majority == doctest::Approx(0.35));
}

TEST_CASE("Monte Carlo agrees with exact enumeration") {
  for (const AnswerDistribution d : {AnswerDistribution{0.6, 0.3, 3}, AnswerDistribution{0.35, 0.45, 3},
                                     AnswerDistribution{0.5, 0.2, 5}}) {
    for (int n = 1; n <= 7; ++n) {
      const SimResult r = simulate_majority(d, n, 100000, 42 + n);
      const ExactMajority e = exact_majority(d, n);
      CAPTURE(d.p);
      CAPTURE(n);
      CHECK(std::abs(r.p_wrong_majority - e.p_wrong) <= 4 * r.p_wrong_stderr + 1e-12);
      CHECK(std::abs(r.acc_majority - e.acc_majority) <= 4 * r.acc_majority_stderr + 1e-12);
    }
  }
}

TEST_CASE("a perfect checker finds any correct sample") {
  const AnswerDistribution d{0.3, 0.5, 3};
  const CheckerModel perfect{1.0, 1.0, 0.9, 0.1};
  for (int n : {1, 5, 9}) {
    const SimResult r = simulate_weighted(d, perfect, n, 100000, 7);
    const double expected = 1.0 - std::pow(1.0 - d.p, n);
    CAPTURE(n);
    CHECK(std::abs(r.acc_weighted - expected) <= 4 * r.acc_weighted_stderr + 1e-12);
  }
}

TEST_CASE("a checker with one score level reduces to majority voting") {
  const AnswerDistribution d{0.45, 0.35, 3};
  const CheckerModel flat{0.667, 0.667, 0.5, 0.5};
  for (int n : {1, 2, 6, 11}) {
    const SimResult r = simulate_weighted(d, flat, n, 20000, 3);
    CHECK(r.acc_weighted == r.acc_majority);
  }
}

TEST_CASE("weighting beats majority on a biased question with many samples") {
  const AnswerDistribution d{0.3, 0.4, 3};
  const SimResult r = simulate_weighted(d, CheckerModel{}, 41, 40000, 5);
  CHECK(r.acc_weighted - r.acc_majority > 5 * std::hypot(r.acc_weighted_stderr, r.acc_majority_stderr));
  CHECK(std::isnan(simulate_majority(d, 41, 1000, 5).acc_weighted));
}

TEST_CASE("results do not depend on the worker count") {
  const AnswerDistribution d{0.5, 0.3, 4};
  const CheckerModel m{};
  const SimResult serial = simulate_weighted(d, m, 9, 3 * kTrialsPerChunk + 17, 11, Execution::serial);
  for (int workers : {1, 2, 5}) {
    const SimResult parallel = simulate_weighted(d, m, 9, 3 * kTrialsPerChunk + 17, 11, Execution::parallel, workers);
    CHECK(parallel.p_wrong_majority == serial.p_wrong_majority);
    CHECK(parallel.acc_majority == serial.acc_majority);
    CHECK(parallel.acc_weighted == serial.acc_weighted);
  }
  CHECK(serial.trials == 3 * kTrialsPerChunk + 17);
  CHECK(serial.seed == 11);
}

TEST_CASE("population sampling respects its ranges") {
  PopulationModel model;
  model.questions = 2000;
  Rng rng(1);
  const auto population = model.sample(rng);
  REQUIRE(population.size() == 2000);
  int biased = 0;
  for (const auto& d : population) {
    CHECK_NOTHROW(d.validate());
    if (d.q > d.p) {
      ++biased;
      CHECK(d.p >= 0.25);
      CHECK(d.p <= 0.35);
    } else {
      CHECK(d.p >= 0.7);
      CHECK(d.q >= (1.0 - d.p - d.q) / 3.0 - 1e-12);
    }
  }
  CHECK(biased == doctest::Approx(400).epsilon(0.15));
}

TEST_CASE("population curves") {
  PopulationModel model;
  model.questions = 20;
  Rng rng(2);
  const auto population = model.sample(rng);
  const std::vector<int> ns = {2, 4, 6};
  const auto serial = simulate_population(population, CheckerModel{}, ns, 500, 9, Execution::serial);
  const auto parallel = simulate_population(population, CheckerModel{}, ns, 500, 9, Execution::parallel, 3);
  REQUIRE(serial.size() == 3);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(serial[i].n == ns[i]);
    CHECK(serial[i].gap == doctest::Approx(serial[i].acc_weighted - serial[i].acc_majority));
    CHECK(serial[i].acc_weighted == parallel[i].acc_weighted);
  }
}

TEST_CASE("smoothing and sign changes") {
  const std::vector<double> v = {1, 2, 3, 2, 1, 2};
  CHECK(moving_average(v, 3) == std::vector<double>{2, 7.0 / 3.0, 2, 5.0 / 3.0});
  CHECK(sign_changes(v) == 2);
  const std::vector<double> flat_then_up = {1, 1, 1, 2, 3};
  CHECK(sign_changes(flat_then_up) == 0);
  const std::vector<double> dip = {3, 2, 2, 4};
  CHECK(sign_changes(dip) == 1);
  CHECK(moving_average(v, 1) == v);
}
