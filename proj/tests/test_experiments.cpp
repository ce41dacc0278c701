#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "spiked/experiments.hpp"
#include "spiked/spectral.hpp"

using namespace spiked;

namespace {

TrialRecord record(Index n, double lambda, double err) {
  TrialRecord r;
  r.kind = SweepKind::Table1;
  r.n = n;
  r.lambda = lambda;
  r.err_opt = err;
  r.opt_ok = true;
  return r;
}

// CSV text with the wall_time column (always last) removed from every row.
std::string without_wall_time(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  while (std::getline(is, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST_CASE("summarize") {
  SUBCASE("hand arithmetic") {
    const auto s = summarize({record(500, 4, 10), record(500, 4, 20)});
    REQUIRE(s.size() == 1);
    CHECK(s[0].err_opt.mean == 15.0);
    CHECK(s[0].err_opt.sd == doctest::Approx(std::sqrt(50.0)).epsilon(1e-15));
    CHECK(s[0].err_opt.count == 2);
    CHECK(s[0].trials == 2);
    CHECK_FALSE(s[0].single_record);
  }
  SUBCASE("identical records give zero SD") {
    const auto s = summarize({record(500, 4, 7), record(500, 4, 7), record(500, 4, 7)});
    CHECK(s[0].err_opt.sd == 0.0);
  }
  SUBCASE("groups follow the (n, lambda) key") {
    const auto s = summarize({record(500, 4, 1), record(1000, 4, 2), record(500, 4, 3)});
    REQUIRE(s.size() == 2);
    CHECK(s[0].n == 500);
    CHECK(s[0].err_opt.mean == 2.0);
    CHECK(s[1].n == 1000);
    CHECK(s[1].single_record);
    CHECK(s[1].err_opt.sd == 0.0);
    const auto pooled = summarize({record(500, 4, 1), record(1000, 4, 2)}, GroupBy{false, true});
    CHECK(pooled.size() == 1);
  }
  SUBCASE("failed metrics are excluded and counted") {
    auto bad = record(500, 4, kNaN);
    bad.opt_ok = false;
    bad.status = "projection_failure";
    const auto s = summarize({record(500, 4, 10), bad});
    CHECK(s[0].err_opt.mean == 10.0);
    CHECK(s[0].err_opt.count == 1);
    CHECK(s[0].opt_excluded == 1);
    CHECK(s[0].trials == 2);
  }
  SUBCASE("empty input") { CHECK_THROWS_AS(summarize({}), InvalidArgument); }
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw NumericalFailure("boom", 0);
                  }),
                  NumericalFailure);
}

TEST_CASE("wigner sweep") {
  const auto recs = run_wigner_sweep({0.5, 4.0}, {300}, 3, Seed{9});
  REQUIRE(recs.size() == 6);
  CHECK(recs[0].lambda == 0.5);
  CHECK(recs[3].lambda == 4.0);
  for (const auto& r : recs) {
    CHECK(r.eig_ok);
    CHECK(r.overlap >= 0.0);
    CHECK(r.overlap <= 1.0);
    CHECK(r.err_eig_aligned <= r.err_eig_raw + 1e-9);
    CHECK(r.err_eig_aligned >= 0.0);
  }
  CHECK(recs[3].lambda_hat > 3.5);
  CHECK(recs[0].lambda_hat < 2.3);
  CHECK(recs[3].predicted_lambda_hat == 4.25);

  SUBCASE("single trial twice gives identical records") {
    const auto a = run_wigner_sweep({2.0}, {200}, 1, Seed{3});
    const auto b = run_wigner_sweep({2.0}, {200}, 1, Seed{3});
    CHECK(without_wall_time(trials_to_csv(a, Seed{3})) == without_wall_time(trials_to_csv(b, Seed{3})));
  }
  SUBCASE("thread count does not change records") {
    HarnessOptions serial, parallel;
    parallel.threads = 4;
    const auto a = run_wigner_sweep({1.0, 3.0}, {150, 250}, 4, Seed{5}, serial);
    const auto b = run_wigner_sweep({1.0, 3.0}, {150, 250}, 4, Seed{5}, parallel);
    CHECK(without_wall_time(trials_to_csv(a, Seed{5})) == without_wall_time(trials_to_csv(b, Seed{5})));
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(run_wigner_sweep({}, {100}, 1, Seed{1}), InvalidArgument);
    CHECK_THROWS_AS(run_wigner_sweep({4.0}, {100}, 0, Seed{1}), InvalidArgument);
    CHECK_THROWS_AS(run_wigner_sweep({4.0}, {10}, 1, Seed{1}), InvalidArgument);
  }
}

TEST_CASE("phase-transition shape") {
  std::vector<double> grid;
  for (double l = 0.25; l <= 3.0 + 1e-12; l += 0.25) grid.push_back(l);
  const auto summaries = summarize(run_wigner_sweep(grid, {2000}, 3, Seed{77}));
  REQUIRE(summaries.size() == grid.size());
  double prev = -1e9, worst = 0;
  for (const auto& s : summaries) {
    CHECK(s.lambda_hat.mean >= prev);  // same noise across the grid, so monotone by Weyl
    prev = s.lambda_hat.mean;
    worst = std::max(worst, std::abs(s.lambda_hat.mean - s.predicted_lambda_hat));
  }
  CHECK(worst < 0.15);
}

TEST_CASE("covariance sweep") {
  const auto recs = run_covariance_sweep({1.2, 3.0}, 100, 400, 2, Seed{4});
  REQUIRE(recs.size() == 4);
  CHECK(recs[0].predicted_lambda_hat == doctest::Approx(2.25));
  CHECK(recs[2].predicted_lambda_hat == doctest::Approx(3.0 * (1 + 0.25 / 2)));
  CHECK(recs[2].p == 100);
  for (const auto& r : recs) CHECK(r.eig_ok);
  CHECK_THROWS_AS(run_covariance_sweep({3.0}, 400, 400, 1, Seed{1}), InvalidArgument);
}

TEST_CASE("table1 trials record both eigenvector conventions and projection failures") {
  RecoveryConfig gradient;
  gradient.penalty = PenaltyVariant::Gradient;
  const auto recs = table1_trials({500}, 2, gradient, Seed{8});
  for (const auto& r : recs) {
    CHECK(r.opt_ok);
    CHECK(r.converged);
    CHECK(r.err_opt < r.err_eig_raw + 100);
    CHECK(r.err_eig_aligned <= r.err_eig_raw + 1e-9);
  }
  const auto literal = table1_trials({500}, 2, RecoveryConfig{}, Seed{8});
  for (const auto& r : literal) {
    CHECK_FALSE(r.opt_ok);
    CHECK(r.status.find("projection_failure") != std::string::npos);
    CHECK(std::isnan(r.err_opt));
    CHECK(r.converged);
  }
  const auto s = summarize(literal);
  CHECK(s[0].opt_excluded == 2);
  CHECK(s[0].err_eig_raw.count == 2);
}

TEST_CASE("esd experiment") {
  const auto rep = run_esd_experiment(100, 20, Seed{6});
  CHECK(rep.ks.size() == 20);
  CHECK(rep.mean_ks < 0.2);
  CHECK(rep.excluded == 0);
  const auto again = run_esd_experiment(100, 20, Seed{6});
  CHECK(again.ks == rep.ks);
  CHECK_THROWS_AS(run_esd_experiment(100, 1, Seed{1}, HarnessOptions{1, {}, 50}), InvalidArgument);
}

TEST_CASE("CSV layout") {
  const auto cols = trial_csv_columns();
  CHECK(cols.front() == "kind");
  CHECK(cols.back() == "wall_time");
  const auto recs = run_wigner_sweep({4.0}, {100}, 2, Seed{2});
  const std::string csv = trials_to_csv(recs, Seed{2});
  CHECK(csv.find("\r") == std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  const std::string first = csv.substr(0, csv.find('\n'));
  CHECK(std::count(first.begin(), first.end(), ',') + 1 == static_cast<long>(cols.size()));
  const std::string sum = summaries_to_csv(summarize(recs), Seed{2});
  CHECK(sum.rfind("kind,master_seed,n,p,lambda,trials,", 0) == 0);
  CHECK(to_json(recs[0]).at("kind") == "wigner");
  CHECK(wigner_predictions_to_csv({0.5, 4.0}).find("4,4.25,") != std::string::npos);
}
