#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/parallel.hpp"
#include "ncmac/pep.hpp"
#include "ncmac/simulator.hpp"

using namespace ncmac;
using testing::e;

namespace {
bool within(const SimPoint& p, double exact) {
  return std::abs(p.ser - exact) <= 3.0 * std::sqrt(exact * (1 - exact) / static_cast<double>(p.trials));
}
}  // namespace

TEST_CASE("symbol error rate") {
  SimPlan plan;
  plan.target_errors = 0;
  SUBCASE("single symbol") {
    JointConstellation c = testing::make_constellation(2, {{e(2, 0, 1.0)}});
    plan.constellation = &c;
    plan.snr_db = {0.0};
    plan.max_trials = 1000;
    CHECK(simulate_ser(plan).points[0].ser == 0.0);
  }
  SUBCASE("orthogonal pair equals its pep") {
    JointConstellation c = testing::make_constellation(2, {{e(2, 0, std::sqrt(2.0)), e(2, 1, std::sqrt(2.0))}});
    plan.constellation = &c;
    plan.snr_db = {0.0};
    plan.max_trials = 200000;
    const SimResult r = simulate_ser(plan);
    CHECK(r.points[0].trials == 200000);
    CHECK(within(r.points[0], 0.25));
  }
  SUBCASE("gram-equal pair cannot be told apart") {
    Rng rng(1);
    const CMatrix x = std::sqrt(2.0) * random_orthonormal(3, 2, rng);
    JointConstellation c = testing::make_constellation(3, {{x, x * random_unitary(2, rng)}});
    plan.constellation = &c;
    plan.snr_db = {10.0};
    plan.max_trials = 100000;
    const SimResult r = simulate_ser(plan);
    CHECK(within(r.points[0], 0.5));
    CHECK_FALSE(r.diagnostics.empty());
  }
}

TEST_CASE("simulation is reproducible across thread counts") {
  Rng rng(2);
  JointConstellation c = testing::random_constellation(3, {1, 1}, {2, 2}, 1.0, rng);
  SimPlan plan;
  plan.constellation = &c;
  plan.snr_db = {0.0, 5.0};
  plan.max_trials = 20000;
  plan.target_errors = 500;
  plan.seed = 9;
  set_thread_count(1);
  const SimResult a = simulate_ser(plan);
  set_thread_count(4);
  const SimResult b = simulate_ser(plan);
  set_thread_count(0);
  REQUIRE(a.points.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.points[i].trials == b.points[i].trials);
    CHECK(a.points[i].errors == b.points[i].errors);
  }
  CHECK(a.points[0].errors >= 500);
  CHECK(a.points[0].trials < 20000);
}

TEST_CASE("empirical pairwise error") {
  const CMatrix x = e(2, 0, std::sqrt(2.0)), xp = e(2, 1, std::sqrt(2.0));
  CHECK(simulate_pep_empirical(x, x, 1, 1000, 1).value == 1.0);
  const PepResult p = simulate_pep_empirical(x, xp, 1, 1000000, 2);
  CHECK(std::abs(p.value - 0.25) <= 3 * std::sqrt(0.25 * 0.75 / 1e6));

  Rng rng(3);
  const CMatrix a = rng.complex_gaussian(3, 1), b = rng.complex_gaussian(3, 1);
  const double exact = pep_closed_form(a, b, 2).value;
  const PepResult q = simulate_pep_empirical(a, b, 2, 400000, 4);
  CHECK(std::abs(q.value - exact) <= 3 * std::sqrt(exact * (1 - exact) / 4e5));
}

TEST_CASE("plan validation") {
  SimPlan plan;
  CHECK_THROWS_AS(simulate_ser(plan), InvalidInput);
}
