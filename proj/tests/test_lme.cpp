// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Dense>

#include "cohort_sim.hpp"
#include "doctest.h"
#include "error.hpp"
#include "lme.hpp"
#include "test_support.hpp"
#include "volumetry.hpp"

using namespace nestedsurf;

namespace {

CohortTable exact_cohort() {
  CohortTable t;
  for (int s = 0; s < 6; ++s)
    for (int v = 0; v < 3; ++v) {
      VolumeRecord r;
      r.subject_id = "x" + std::to_string(s);
      r.visit_index = v;
      r.interval = 0.5 * v + 0.25 * (v > 0) * (s % 3);
      r.sex = s % 2;
      r.baseline_age = 60 + 3.5 * s;
      r.icv = 10 + 2 * r.sex + 0.5 * r.interval;
      r.sas = 1 + 0.25 * r.icv;
      t.rows.push_back(r);
    }
  return t;
}

LmeFit synthetic_fit(std::vector<std::string> names, std::vector<double> p) {
  LmeFit f;
  f.names = std::move(names);
  const auto k = static_cast<Eigen::Index>(f.names.size());
  f.beta = Eigen::VectorXd::LinSpaced(k, 1, static_cast<double>(k));
  f.se = Eigen::VectorXd::Constant(k, 0.5);
  f.p = Eigen::Map<Eigen::VectorXd>(p.data(), k);
  return f;
}

}  // namespace

TEST_CASE("noise-free data are recovered exactly") {
  const auto fit = fit_lme(exact_cohort(), Response::Icv);
  REQUIRE(fit.names == std::vector<std::string>{"intercept", "sex", "baseline_age", "interval"});
  CHECK(std::abs(fit.beta(0) - 10) < 1e-6);
  CHECK(std::abs(fit.beta(1) - 2) < 1e-6);
  CHECK(std::abs(fit.beta(2)) < 1e-6);
  CHECK(std::abs(fit.beta(3) - 0.5) < 1e-6);
  CHECK(fit.residual_variance < 1e-12);
}

TEST_CASE("zero random effects reproduce ordinary least squares") {
  const auto table = testing::simulate_cohort({}, 7);
  for (Criterion crit : {Criterion::Reml, Criterion::Ml}) {
    LmeOptions opt;
    opt.criterion = crit;
    opt.zero_random_effects = true;
    const auto p = make_problem(table, Response::Icv);
    const auto fit = fit_lme(p, opt);

    const Eigen::MatrixXd xtx = p.X.transpose() * p.X;
    const Eigen::VectorXd beta = xtx.llt().solve(p.X.transpose() * p.y);
    const double rss = (p.y - p.X * beta).squaredNorm();
    const double n = static_cast<double>(p.X.rows()), k = static_cast<double>(p.X.cols());
    const double s2 = rss / (crit == Criterion::Reml ? n - k : n);
    const Eigen::MatrixXd cov = s2 * xtx.inverse();
    for (Eigen::Index j = 0; j < p.X.cols(); ++j) {
      CHECK(std::abs(fit.beta(j) - beta(j)) <= 1e-8 * std::max(1.0, std::abs(beta(j))));
      CHECK(std::abs(fit.se(j) - std::sqrt(cov(j, j))) <= 1e-8 * std::sqrt(cov(j, j)));
    }
    CHECK(fit.var_intercept == 0);
    CHECK(fit.var_slope == 0);
  }
}

TEST_CASE("known parameters are recovered from a large cohort") {
  testing::CohortModel m;
  m.subjects = 300;
  const auto fit = fit_lme(testing::simulate_cohort(m, 123), Response::Icv);
  const std::array<double, 4> truth{m.beta0, m.beta_sex, m.beta_age, m.beta_interval};
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(fit.beta(j) - truth[static_cast<std::size_t>(j)]) < 3.5 * fit.se(j));
  CHECK(fit.n_obs == 1200);
  CHECK(fit.n_subjects == 300);
}

TEST_CASE("variance components are recovered on average") {
  testing::CohortModel m;
  m.subjects = 300;
  double psi0 = 0, psi1 = 0, sigma2 = 0;
  const int cohorts = 10;
  for (int c = 0; c < cohorts; ++c) {
    const auto fit = fit_lme(testing::simulate_cohort(m, 700 + static_cast<std::uint64_t>(c)), Response::Icv);
    psi0 += fit.var_intercept / cohorts;
    psi1 += fit.var_slope / cohorts;
    sigma2 += fit.residual_variance / cohorts;
  }
  CHECK(std::abs(psi0 - m.psi0) < 15);
  CHECK(std::abs(psi1 - m.psi1) < 0.5);
  CHECK(std::abs(sigma2 - m.sigma2) < 1.5);
}

TEST_CASE("cohorts with a flat slope-variance direction converge") {
  for (std::uint64_t seed : {900888, 903087, 903121}) {
    const auto p = make_problem(testing::simulate_cohort({}, seed), Response::Icv);
    const auto fit = fit_lme(p);
    CHECK(fit.iterations < 100);
    const double l11 = std::sqrt(fit.var_intercept / fit.residual_variance);
    const double l21 = fit.cov_intercept_slope / fit.residual_variance / l11;
    const double l22 = std::sqrt(std::max(1e-300, fit.var_slope / fit.residual_variance - l21 * l21));
    const Eigen::Vector3d theta{std::log(l11), l21, std::log(l22)};
    const double best = -2 * fit.log_likelihood;
    for (int i = 0; i < 3; ++i)
      for (double h : {-0.05, 0.05}) {
        Eigen::Vector3d t = theta;
        t(i) += h;
        CHECK(lme_objective(p, t, Criterion::Reml) >= best - 1e-6);
      }
  }
}

TEST_CASE("fit invariants") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto table = testing::simulate_cohort({}, seed);
    for (Response r : {Response::Icv, Response::Sas}) {
      const auto fit = fit_lme(table, r);
      for (Eigen::Index j = 0; j < fit.se.size(); ++j) {
        CHECK(fit.se(j) > 0);
        CHECK(fit.p(j) >= 0);
        CHECK(fit.p(j) <= 1);
      }
      CHECK(fit.var_intercept >= 0);
      CHECK(fit.var_slope >= 0);
      CHECK(fit.var_intercept * fit.var_slope - fit.cov_intercept_slope * fit.cov_intercept_slope >= -1e-9);
      for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
        CHECK(fit.objective_trace[i] <= fit.objective_trace[i - 1]);
    }
  }
}

TEST_CASE("row order does not matter") {
  auto table = testing::simulate_cohort({}, 9);
  const auto a = fit_lme(table, Response::Sas);
  std::mt19937_64 rng(10);
  std::shuffle(table.rows.begin(), table.rows.end(), rng);
  const auto b = fit_lme(table, Response::Sas);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1e-300, std::abs(x)); };
  for (Eigen::Index j = 0; j < a.beta.size(); ++j) {
    CHECK(rel(a.beta(j), b.beta(j)) < 1e-10);
    CHECK(rel(a.se(j), b.se(j)) < 1e-10);
  }
  CHECK(rel(a.log_likelihood, b.log_likelihood) < 1e-10);
}

TEST_CASE("adding a covariate never lowers the ML log-likelihood") {
  for (std::uint64_t seed : {21, 22, 23}) {
    const auto full = make_problem(testing::simulate_cohort({}, seed), Response::Sas);
    LmeProblem reduced = full;
    reduced.X = full.X.leftCols(4);
    reduced.names.resize(4);
    LmeOptions opt;
    opt.criterion = Criterion::Ml;
    const double with = fit_lme(full, opt).log_likelihood, without = fit_lme(reduced, opt).log_likelihood;
    CHECK(with >= without - 1e-8 * std::abs(without));
  }
}

TEST_CASE("objective is minimized at the reported parameters") {
  const auto p = make_problem(testing::simulate_cohort({}, 31), Response::Icv);
  const auto fit = fit_lme(p);
  const double best = -2 * fit.log_likelihood;
  std::mt19937_64 rng(32);
  std::normal_distribution<double> z(0, 1);
  // Recover theta from the variance components.
  const double l11 = std::sqrt(fit.var_intercept / fit.residual_variance);
  const double l21 = fit.cov_intercept_slope / fit.residual_variance / l11;
  const double l22 = std::sqrt(std::max(1e-300, fit.var_slope / fit.residual_variance - l21 * l21));
  const Eigen::Vector3d theta{std::log(l11), l21, std::log(l22)};
  CHECK(lme_objective(p, theta, Criterion::Reml) == doctest::Approx(best).epsilon(1e-9).scale(0));
  for (int k = 0; k < 50; ++k) {
    const Eigen::Vector3d t = theta + 0.05 * Eigen::Vector3d(z(rng), z(rng), z(rng));
    CHECK(lme_objective(p, t, Criterion::Reml) >= best - 1e-6);
  }
}

TEST_CASE("fit preconditions") {
  auto t = exact_cohort();
  for (auto& r : t.rows) r.sex = 0;
  CHECK_THROWS_AS(fit_lme(t, Response::Icv), Error);

  CohortTable single;
  for (const auto& r : testing::simulate_cohort({}, 1).rows)
    if (r.visit_index == 0) single.rows.push_back(r);
  CHECK_THROWS_AS(fit_lme(single, Response::Icv), Error);

  auto bad = testing::simulate_cohort({}, 1);
  bad.rows[1].baseline_age += 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = testing::simulate_cohort({}, 1);
  for (auto& r : bad.rows)
    if (r.subject_id == "s004") r.interval += 0.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = testing::simulate_cohort({}, 1);
  bad.rows[3].interval = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("iteration cap is reported") {
  LmeOptions opt;
  opt.max_iterations = 1;
  opt.tolerance = 0;
  CHECK_THROWS_AS(fit_lme(testing::simulate_cohort({}, 3), Response::Icv, opt), Error);
}

TEST_CASE("Wald p-values") {
  CHECK(two_sided_normal_p(0) == 1.0);
  CHECK(two_sided_normal_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12).scale(0));
  CHECK(two_sided_normal_p(-2.5758293035489) == doctest::Approx(0.01).epsilon(1e-10).scale(0));
}

TEST_CASE("significance flag uses p <= alpha") {
  const std::vector<std::string> names{"intercept", "sex", "baseline_age", "interval"};
  const auto icv = synthetic_fit(names, {0.5, 0.05, 0.051, 0.2});
  auto sas_names = names;
  sas_names.push_back("icv");
  const auto sas = synthetic_fit(sas_names, {0.5, 0.0001, 1.0, 0.049, 0.01});
  const auto rows = report_rows(icv, sas, 0.05);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].effect == "sex");
  CHECK(rows[0].significant);
  CHECK(rows[1].effect == "baseline age");
  CHECK_FALSE(rows[1].significant);
  CHECK(rows[2].effect == "follow-up interval");
  CHECK_FALSE(rows[2].significant);
  CHECK(rows[3].panel == "SAS volume");
  CHECK(rows[3].significant);
  CHECK_FALSE(rows[4].significant);
  CHECK(rows[5].significant);

  const auto csv = format_report_csv(icv, sas, 0.05);
  CHECK(csv.rfind("panel,effect,beta,se,p,significant\nICV,sex,2,0.5,0.05,1\nICV,baseline age,3,0.5,0.051,0\n", 0) == 0);
  const auto text = format_report_text(icv, sas, 0.05);
  CHECK(text.find("follow-up interval") != std::string::npos);
  CHECK(text.find("(* p <= 0.05)") != std::string::npos);
}

TEST_CASE("report rows carry the fitted values") {
  const auto table = testing::simulate_cohort({}, 44);
  const auto icv = fit_lme(table, Response::Icv), sas = fit_lme(table, Response::Sas);
  const auto rows = report_rows(icv, sas);
  const std::array<const char*, 3> keys{"sex", "baseline_age", "interval"};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto j = static_cast<Eigen::Index>(icv.index_of(keys[i]));
    CHECK(rows[i].beta == icv.beta(j));
    CHECK(rows[i].se == icv.se(j));
    CHECK(rows[i].p == icv.p(j));
    const auto k = static_cast<Eigen::Index>(sas.index_of(keys[i]));
    CHECK(rows[i + 3].beta == sas.beta(k));
    CHECK(rows[i + 3].p == sas.p(k));
  }
}

TEST_CASE("cohort CSV follows the volumetry layout") {
  const auto dir = testing::scratch_dir("lme_csv");
  const auto table = testing::simulate_cohort({}, 5);
  {
    std::ofstream f(dir / "cohort.csv");
    f << kVolumeCsvHeader << "\n";
    for (const auto& r : table.rows) {
      VisitInfo v{r.subject_id, r.visit_index, r.interval, r.sex, r.baseline_age};
      VolumeReport rep;
      rep.icv_cm3 = r.icv;
      rep.sas_cm3 = r.sas;
      f << volume_csv_row(v, rep) << "\n";
    }
  }
  const auto back = read_cohort_csv(dir / "cohort.csv");
  REQUIRE(back.rows.size() == table.rows.size());
  CHECK(back.rows[5].subject_id == table.rows[5].subject_id);
  CHECK(back.rows[5].icv == doctest::Approx(table.rows[5].icv).epsilon(1e-6).scale(0));

  {
    std::ofstream f(dir / "missing.csv");
    f << "subject_id,visit_index,sex\n";
  }
  CHECK_THROWS_AS(read_cohort_csv(dir / "missing.csv"), Error);
  CHECK_THROWS_AS(read_cohort_csv(dir / "absent.csv"), Error);
}

TEST_CASE("trajectory CSV evaluates the fixed effects") {
  const auto table = exact_cohort();
  const auto fit = fit_lme(table, Response::Icv);
  const auto csv = format_trajectory_csv(table, fit, Response::Icv);
  CHECK(csv.rfind("subject_id,interval_years,response,fitted\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 19);
}
