#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "mvg/budget.hpp"
#include "mvg/error.hpp"
#include "oracles.hpp"

using namespace mvg;

TEST_CASE("expected tables, exact form") {
  CHECK(expected_tables_exact({1.0, 0.5}, 0) == 0.0);
  CHECK(expected_tables_exact({1.0, 0.5}, 1) == doctest::Approx(1.0));
  // Hand recursion: second customer opens a table with prob (1+0.5)/(1+1).
  CHECK(expected_tables_exact({1.0, 0.5}, 2) == 1.75);

  CHECK_THROWS_AS(expected_tables_exact({0.0, 0.5}, 5), ParamError);
  CHECK_THROWS_AS(expected_tables_exact({1.0, 0.0}, 5), ParamError);
  CHECK_THROWS_AS(expected_tables_exact({1.0, 1.0}, 5), ParamError);
}

TEST_CASE("exact form agrees with the step recursion oracle") {
  for (const double alpha : {0.5, 1.0, 2.0}) {
    for (const double beta : {0.3, 0.5, 0.8}) {
      for (const std::uint64_t n : {1ull, 7ull, 100ull, 5000ull, 20000ull}) {
        const double got = expected_tables_exact({alpha, beta}, n);
        const double want = oracle::expected_tables_recursion(alpha, beta, n);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("expected tables, asymptotic form") {
  // Gamma(2) / (0.5 * Gamma(1.5)), with Gamma(1.5) = sqrt(pi)/2.
  const double want = std::tgamma(2.0) / (0.5 * std::tgamma(1.5));
  CHECK(expected_tables_asymptotic({1.0, 0.5}, 1) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(2.2568).epsilon(1e-4));

  // n^beta scaling at beta = 1/2.
  const double r4 = expected_tables_asymptotic({1.0, 0.5}, 4);
  const double r1 = expected_tables_asymptotic({1.0, 0.5}, 1);
  CHECK(r4 / r1 == 2.0);

  // Asymptotic equality at large n.
  const double ratio =
      expected_tables_exact({1.0, 0.5}, 100000) / expected_tables_asymptotic({1.0, 0.5}, 100000);
  CHECK(ratio >= 0.9);
  CHECK(ratio <= 1.1);

  CHECK_THROWS_AS(expected_tables_asymptotic({1.0, 0.5}, 0), ParamError);
}

TEST_CASE("expected tables is strictly increasing in n and beta") {
  for (const double alpha : {0.5, 1.0, 3.0}) {
    double prev = 0.0;
    for (std::uint64_t n = 1; n <= 64; n *= 2) {
      const double value = expected_tables_exact({alpha, 0.5}, n);
      CHECK(value > prev);
      prev = value;
    }
    prev = 0.0;
    for (const double beta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double value = expected_tables_exact({alpha, beta}, 50);
      CHECK(value > prev);
      prev = value;
    }
  }
}

TEST_CASE("budget allocation worked examples") {
  SUBCASE("beta = 0 spreads uniformly") {
    const auto plan = allocate_budget({{"d1", 9}, {"d2", 1}}, 0.0, 2);
    CHECK(plan.m_of("d1") == 1);
    CHECK(plan.m_of("d2") == 1);
  }
  SUBCASE("beta = 1 follows popularity") {
    const auto plan = allocate_budget({{"d1", 9}, {"d2", 1}}, 1.0, 10);
    CHECK(plan.m_of("d1") == 9);
    CHECK(plan.m_of("d2") == 1);
  }
  SUBCASE("beta = 0.5 largest-remainder hand example") {
    // scores (3,2,1), scale 2/3, floors (2,1,0); leftover unit goes to d3.
    const auto plan = allocate_budget({{"d1", 9}, {"d2", 4}, {"d3", 1}}, 0.5, 4);
    CHECK(plan.m_of("d1") == 2);
    CHECK(plan.m_of("d2") == 1);
    CHECK(plan.m_of("d3") == 1);
    CHECK(plan.allocated() == 4);
  }
  SUBCASE("beta out of range") {
    CHECK_THROWS_AS(allocate_budget({{"d1", 1}}, -0.1, 1), ParamError);
    CHECK_THROWS_AS(allocate_budget({{"d1", 1}}, 1.1, 1), ParamError);
  }
  SUBCASE("zero-count docs never receive budget, even at beta 0") {
    const auto plan = allocate_budget({{"d1", 0}, {"d2", 3}}, 0.0, 5);
    CHECK(plan.m_of("d1") == 0);
    CHECK(plan.m_of("d2") == 3);  // capped at n_d
    CHECK(plan.allocated() == 3);
  }
}

TEST_CASE("budget_from_average") {
  SUBCASE("0.3 vectors per document over a 10-doc corpus") {
    const auto plan = budget_from_average({{"d1", 5}, {"d2", 5}}, 0.5, 0.3, 10);
    CHECK(plan.total_budget == 3);
  }
  SUBCASE("zero average gives an all-zero plan") {
    const auto plan = budget_from_average({{"d1", 5}}, 0.5, 0.0, 10);
    CHECK(plan.total_budget == 0);
    CHECK(plan.allocations.empty());
  }
  SUBCASE("whole-corpus basis includes graph-absent docs") {
    const auto plan = budget_from_average({{"d1", 5}}, 0.5, 0.5, 4);
    CHECK(plan.total_budget == 2);
    CHECK(plan.m_of("d1") == 2);
    CHECK(plan.allocations.size() == 1);
  }
}

TEST_CASE("budget report rendering") {
  // Nine docs in three thirds; beta=1 with a huge budget allocates m_d = n_d.
  std::map<std::string, std::size_t> counts;
  for (int d = 0; d < 9; ++d) counts["d" + std::to_string(d)] = static_cast<std::size_t>(9 - d);
  const auto plan = allocate_budget(counts, 1.0, 1000);
  const auto text = render_budget_report(counts, plan, 1.0, "fixed M");

  CHECK(text.find("# budget basis: fixed M\n") == 0);
  CHECK(text.find("# M=1000 beta=1 sum_m=45") != std::string::npos);
  // n_d = 9..1: head = {9,8,7} -> 24/45, torso = {6,5,4} -> 15/45, tail -> 6/45.
  CHECK(text.find("head_share=0.533333") != std::string::npos);
  CHECK(text.find("torso_share=0.333333") != std::string::npos);
  CHECK(text.find("tail_share=0.133333") != std::string::npos);
  // Rows ordered by n_d descending.
  CHECK(text.find("d0\t9\t9\n") < text.find("d1\t8\t8\n"));
  CHECK(text.find("d8\t1\t1\n") != std::string::npos);
}

TEST_CASE("budget shares shift from uniform to head-heavy as beta grows") {
  // Zipf-like counts: n_d = 1000 / rank over 99 docs.
  std::map<std::string, std::size_t> counts;
  for (int r = 1; r <= 99; ++r) {
    char name[16];
    std::snprintf(name, sizeof(name), "d%02d", r);
    counts[name] = static_cast<std::size_t>(1000 / r);
  }
  double prev_head = -1.0;
  for (const double beta : {0.0, 0.3, 0.5, 0.7, 1.0}) {
    const auto plan = allocate_budget(counts, beta, 990);
    const auto shares = budget_shares(counts, plan);
    CHECK(shares.head + shares.torso + shares.tail == doctest::Approx(1.0));
    CHECK(shares.head >= prev_head);
    prev_head = shares.head;
    if (beta == 0.0) CHECK(shares.head == doctest::Approx(1.0 / 3.0).epsilon(0.02));
    if (beta == 1.0) CHECK(shares.head > 0.7);  // popularity concentrates on the head
  }
}

TEST_CASE("allocation invariants over random count maps") {
  std::mt19937 gen(11);
  std::uniform_int_distribution<int> count_dist(0, 40);
  std::uniform_int_distribution<int> docs_dist(1, 25);
  std::uniform_real_distribution<double> beta_dist(0.0, 1.0);
  std::uniform_int_distribution<int> budget_dist(0, 60);

  for (int trial = 0; trial < 2000; ++trial) {
    std::map<std::string, std::size_t> counts;
    const int n_docs = docs_dist(gen);
    for (int d = 0; d < n_docs; ++d) {
      counts["doc" + std::to_string(d)] = static_cast<std::size_t>(count_dist(gen));
    }
    const double beta = beta_dist(gen);
    const auto budget = static_cast<std::uint64_t>(budget_dist(gen));
    const auto plan = allocate_budget(counts, beta, budget);

    std::uint64_t total = 0;
    std::uint64_t cap_total = 0;
    bool all_positive = true;
    for (const auto& [doc, n] : counts) {
      const auto m = plan.m_of(doc);
      total += m;
      cap_total += n;
      CHECK(m <= n);
      if (n == 0) {
        CHECK(m == 0);
        all_positive = false;
      }
    }
    CHECK(total <= budget);
    if (all_positive && !counts.empty()) {
      CHECK(total == std::min<std::uint64_t>(budget, cap_total));
    }
    // Monotone in n_d (strict counts ordering).
    for (const auto& [da, na] : counts) {
      for (const auto& [db, nb] : counts) {
        if (na > nb) CHECK(plan.m_of(da) >= plan.m_of(db));
      }
    }
  }
}
