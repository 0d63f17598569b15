// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace nestedsurf {

struct VolumeRecord {
  std::string subject_id;
  int visit_index = 0;
  double interval = 0;  // years since the subject's first visit
  int sex = 0;          // 0 female, 1 male
  double baseline_age = 0;
  double icv = 0;  // cm^3
  double sas = 0;  // cm^3
};

struct CohortTable {
  std::vector<VolumeRecord> rows;

  // Throws InvalidArgument when a subject's first interval is not 0, an
  // interval is negative, or sex / baseline age vary within a subject.
  void validate() const;
};

// Reads the volumetry CSV layout (columns located by header name).
CohortTable read_cohort_csv(const std::filesystem::path& path);

enum class Response { Icv, Sas };
enum class Criterion { Reml, Ml };

// Generic two-level problem: y = X beta + b0_g + b1_g * slope + e, with
// (b0, b1) ~ N(0, Psi) per group and e ~ N(0, sigma^2).
struct LmeProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd slope;  // random-slope covariate (follow-up interval)
  std::vector<int> group;  // 0-based, rows of a group contiguous
  std::vector<std::string> names;
};

// Fixed effects: ICV ~ intercept + sex + baseline_age + interval; SAS adds
// ICV. Rows are ordered by subject id, then interval, so the result does not
// depend on the input row order.
LmeProblem make_problem(const CohortTable& table, Response response);

struct LmeOptions {
  Criterion criterion = Criterion::Reml;
  bool zero_random_effects = false;  // pin Psi = 0 (ordinary least squares)
  int max_iterations = 500;
  double tolerance = 1e-10;  // relative objective change
};

struct LmeFit {
  std::vector<std::string> names;
  Eigen::VectorXd beta, se, p;
  double var_intercept = 0, var_slope = 0, cov_intercept_slope = 0;
  double residual_variance = 0;
  double log_likelihood = 0;  // of the chosen criterion
  std::size_t n_obs = 0, n_subjects = 0;
  int iterations = 0;
  Criterion criterion = Criterion::Reml;
  std::vector<double> objective_trace;  // -2 log-likelihood at accepted iterates

  double coefficient(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
};

// Restricted (or full) maximum likelihood with the variance parameters in
// log-Cholesky form, relative to sigma^2 which is profiled out; optimized by
// Newton steps on a finite-difference Hessian (made positive definite) from a
// diagonal start, with Armijo backtracking. Fixed effects
// by generalized least squares at the optimum, Wald p-values with the normal
// approximation.
//
// Throws InvalidArgument for a rank-deficient design or fewer than two
// subjects with two visits, Convergence when the iteration cap is hit.
LmeFit fit_lme(const LmeProblem& problem, const LmeOptions& options = {});
LmeFit fit_lme(const CohortTable& table, Response response, const LmeOptions& options = {});

// Profiled -2 log-likelihood at relative covariance parameters theta =
// (log L11, L21, log L22); exposed for tests.
double lme_objective(const LmeProblem& problem, const Eigen::Vector3d& theta, Criterion criterion);

double two_sided_normal_p(double z);

struct ReportRow {
  std::string panel;   // "ICV" / "SAS volume"
  std::string effect;  // "sex" / "baseline age" / "follow-up interval"
  double beta = 0, se = 0, p = 0;
  bool significant = false;  // p <= alpha
};

std::vector<ReportRow> report_rows(const LmeFit& icv, const LmeFit& sas, double alpha = 0.05);
std::string format_report_text(const LmeFit& icv, const LmeFit& sas, double alpha = 0.05);
std::string format_report_csv(const LmeFit& icv, const LmeFit& sas, double alpha = 0.05);

// "subject_id,interval_years,response,fitted": fixed-effect trend per visit;
// for SAS the ICV covariate is replaced by the cohort's sex-specific mean ICV.
std::string format_trajectory_csv(const CohortTable& table, const LmeFit& fit, Response response);

}  // namespace nestedsurf
