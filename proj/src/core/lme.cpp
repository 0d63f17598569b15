// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "lme.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include "error.hpp"
#include "keyvalue.hpp"

namespace nestedsurf {

void CohortTable::validate() const {
  struct Subject {
    double min_interval = std::numeric_limits<double>::infinity();
    int sex = 0;
    double age = 0;
    bool seen = false;
  };
  std::map<std::string, Subject> subjects;
  for (const auto& r : rows) {
    if (!(r.interval >= 0)) throw Error(ErrorKind::InvalidArgument, "negative follow-up interval for " + r.subject_id);
    if (r.sex != 0 && r.sex != 1) throw Error(ErrorKind::InvalidArgument, "sex must be coded 0 or 1 for " + r.subject_id);
    auto& s = subjects[r.subject_id];
    if (s.seen && (s.sex != r.sex || s.age != r.baseline_age))
      throw Error(ErrorKind::InvalidArgument, "sex or baseline age varies within subject " + r.subject_id);
    s.seen = true;
    s.sex = r.sex;
    s.age = r.baseline_age;
    s.min_interval = std::min(s.min_interval, r.interval);
  }
  for (const auto& [id, s] : subjects)
    if (s.min_interval != 0) throw Error(ErrorKind::InvalidArgument, "first visit of " + id + " has non-zero interval");
}

CohortTable read_cohort_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  const std::string src = path.string();
  auto split = [](const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1)
      cols.push_back(trim(line.substr(start, pos - start)));
    cols.push_back(trim(line.substr(start)));
    return cols;
  };
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, src + ": empty cohort file");
  const auto header = split(trim(line));
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::Format, src + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_id = column("subject_id"), c_visit = column("visit_index"), c_int = column("interval_years"),
             c_sex = column("sex"), c_age = column("baseline_age"), c_icv = column("icv_cm3"), c_sas = column("sas_cm3");

  CohortTable t;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cols = split(line);
    if (cols.size() != header.size()) throw Error(ErrorKind::Format, src + ": wrong column count in '" + line + "'");
    VolumeRecord r;
    r.subject_id = cols[c_id];
    r.visit_index = static_cast<int>(parse_integer(cols[c_visit], src));
    r.interval = parse_real(cols[c_int], src);
    r.sex = static_cast<int>(parse_integer(cols[c_sex], src));
    r.baseline_age = parse_real(cols[c_age], src);
    r.icv = parse_real(cols[c_icv], src);
    r.sas = parse_real(cols[c_sas], src);
    t.rows.push_back(std::move(r));
  }
  t.validate();
  return t;
}

LmeProblem make_problem(const CohortTable& table, Response response) {
  table.validate();
  std::vector<std::size_t> order(table.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = table.rows[a];
    const auto& rb = table.rows[b];
    if (ra.subject_id != rb.subject_id) return ra.subject_id < rb.subject_id;
    if (ra.interval != rb.interval) return ra.interval < rb.interval;
    return ra.visit_index < rb.visit_index;
  });

  LmeProblem p;
  p.names = {"intercept", "sex", "baseline_age", "interval"};
  if (response == Response::Sas) p.names.push_back("icv");
  const auto n = static_cast<Eigen::Index>(order.size());
  p.X.resize(n, static_cast<Eigen::Index>(p.names.size()));
  p.y.resize(n);
  p.slope.resize(n);
  p.group.resize(order.size());
  int g = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[order[static_cast<std::size_t>(i)]];
    if (i == 0 || r.subject_id != table.rows[order[static_cast<std::size_t>(i - 1)]].subject_id) ++g;
    p.group[static_cast<std::size_t>(i)] = g;
    p.X(i, 0) = 1.0;
    p.X(i, 1) = r.sex;
    p.X(i, 2) = r.baseline_age;
    p.X(i, 3) = r.interval;
    if (response == Response::Sas) p.X(i, 4) = r.icv;
    p.y(i) = response == Response::Icv ? r.icv : r.sas;
    p.slope(i) = r.interval;
  }
  return p;
}

namespace {

struct Evaluation {
  double objective = 0;  // -2 log-likelihood
  double sigma2 = 0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd a_inv;  // (X' H^-1 X)^-1
  double rss = 0;
};

struct GroupRange {
  Eigen::Index begin, size;
};

std::vector<GroupRange> group_ranges(const LmeProblem& p) {
  std::vector<GroupRange> out;
  const auto n = static_cast<Eigen::Index>(p.group.size());
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && p.group[static_cast<std::size_t>(j)] == p.group[static_cast<std::size_t>(i)]) ++j;
    out.push_back({i, j - i});
    i = j;
  }
  return out;
}

Eigen::Matrix2d relative_covariance(const Eigen::Vector3d& theta) {
  Eigen::Matrix2d L;
  L << std::exp(theta(0)), 0.0, theta(1), std::exp(theta(2));
  return L * L.transpose();
}

Evaluation evaluate(const LmeProblem& p, const std::vector<GroupRange>& groups, const Eigen::Matrix2d& D,
                    Criterion criterion) {
  const auto k = p.X.cols();
  const auto n = p.X.rows();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  double logdet_h = 0;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
  factors.reserve(groups.size());
  for (const auto& g : groups) {
    Eigen::MatrixXd Z(g.size, 2);
    Z.col(0).setOnes();
    Z.col(1) = p.slope.segment(g.begin, g.size);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(g.size, g.size) + Z * D * Z.transpose();
    factors.emplace_back(H);
    const auto& llt = factors.back();
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Convergence, "covariance factorization failed");
    logdet_h += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const auto Xg = p.X.middleRows(g.begin, g.size);
    const Eigen::MatrixXd HiX = llt.solve(Xg);
    A.noalias() += Xg.transpose() * HiX;
    b.noalias() += HiX.transpose() * p.y.segment(g.begin, g.size);
  }
  Evaluation e;
  Eigen::LDLT<Eigen::MatrixXd> a_fact(A);
  e.beta = a_fact.solve(b);
  e.a_inv = a_fact.solve(Eigen::MatrixXd::Identity(k, k));
  double rss = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const Eigen::VectorXd r = p.y.segment(g.begin, g.size) - p.X.middleRows(g.begin, g.size) * e.beta;
    rss += r.dot(factors[gi].solve(r));
  }
  e.rss = rss;
  const double dof = criterion == Criterion::Reml ? static_cast<double>(n - k) : static_cast<double>(n);
  e.sigma2 = rss / dof;
  e.objective = dof * (1.0 + std::log(2.0 * std::numbers::pi * e.sigma2)) + logdet_h;
  if (criterion == Criterion::Reml) {
    const Eigen::VectorXd d = a_fact.vectorD();
    e.objective += d.array().log().sum();
  }
  return e;
}

void fill_fit(LmeFit& fit, const LmeProblem& p, const Evaluation& e, const Eigen::Matrix2d& D) {
  const auto k = p.X.cols();
  fit.names = p.names;
  fit.beta = e.beta;
  fit.se.resize(k);
  fit.p.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    fit.se(j) = std::sqrt(std::max(0.0, e.sigma2 * e.a_inv(j, j)));
    fit.p(j) = fit.se(j) > 0 ? two_sided_normal_p(e.beta(j) / fit.se(j)) : (e.beta(j) == 0 ? 1.0 : 0.0);
  }
  fit.residual_variance = e.sigma2;
  fit.var_intercept = e.sigma2 * D(0, 0);
  fit.var_slope = e.sigma2 * D(1, 1);
  fit.cov_intercept_slope = e.sigma2 * D(0, 1);
  fit.log_likelihood = -0.5 * e.objective;
}

}  // namespace

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

double lme_objective(const LmeProblem& problem, const Eigen::Vector3d& theta, Criterion criterion) {
  return evaluate(problem, group_ranges(problem), relative_covariance(theta), criterion).objective;
}

LmeFit fit_lme(const LmeProblem& p, const LmeOptions& options) {
  const auto n = p.X.rows();
  const auto k = p.X.cols();
  if (p.y.size() != n || p.slope.size() != n || static_cast<Eigen::Index>(p.group.size()) != n)
    throw Error(ErrorKind::InvalidArgument, "inconsistent LME problem dimensions");
  if (n <= k) throw Error(ErrorKind::InvalidArgument, "not enough observations for the fixed effects");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p.X);
  if (qr.rank() < k) throw Error(ErrorKind::InvalidArgument, "rank-deficient design matrix");

  const auto groups = group_ranges(p);
  std::size_t longitudinal = 0;
  for (const auto& g : groups) longitudinal += g.size >= 2;
  if (!options.zero_random_effects && longitudinal < 2)
    throw Error(ErrorKind::InvalidArgument,
                "need at least two subjects with two or more visits (random slope unidentifiable)");

  LmeFit fit;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.n_subjects = groups.size();
  fit.criterion = options.criterion;

  if (options.zero_random_effects) {
    const Eigen::Matrix2d D = Eigen::Matrix2d::Zero();
    const auto e = evaluate(p, groups, D, options.criterion);
    fill_fit(fit, p, e, D);
    fit.objective_trace.push_back(e.objective);
    return fit;
  }

  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  auto eval_theta = [&](const Eigen::Vector3d& t) { return evaluate(p, groups, relative_covariance(t), options.criterion); };
  Evaluation cur = eval_theta(theta);

  // An exact linear fit leaves no residual variance to apportion.
  const double tss = (p.y.array() - p.y.mean()).square().sum();
  if (cur.rss <= 1e-20 * std::max(tss, p.y.squaredNorm())) {
    fill_fit(fit, p, cur, relative_covariance(theta));
    fit.var_intercept = fit.var_slope = fit.cov_intercept_slope = 0;
    fit.objective_trace.push_back(cur.objective);
    return fit;
  }

  auto objective = [&](const Eigen::Vector3d& t) {
    const double v = eval_theta(t).objective;
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  auto gradient = [&](const Eigen::Vector3d& t) {
    Eigen::Vector3d g;
    for (int i = 0; i < 3; ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(t(i)));
      Eigen::Vector3d tp = t, tm = t;
      tp(i) += h;
      tm(i) -= h;
      g(i) = (objective(tp) - objective(tm)) / (2 * h);
    }
    return g;
  };

  // Central-difference Hessian with eigenvalues reflected and floored so the
  // Newton direction always descends.
  auto newton_matrix = [&](const Eigen::Vector3d& t, double f0) -> Eigen::Matrix3d {
    Eigen::Matrix3d H;
    Eigen::Vector3d h;
    for (int i = 0; i < 3; ++i) h(i) = 1e-3 * std::max(1.0, std::abs(t(i)));
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d tp = t, tm = t;
      tp(i) += h(i);
      tm(i) -= h(i);
      H(i, i) = (objective(tp) - 2 * f0 + objective(tm)) / (h(i) * h(i));
      for (int j = 0; j < i; ++j) {
        Eigen::Vector3d pp = t, pm = t, mp = t, mm = t;
        pp(i) += h(i), pp(j) += h(j);
        pm(i) += h(i), pm(j) -= h(j);
        mp(i) -= h(i), mp(j) += h(j);
        mm(i) -= h(i), mm(j) -= h(j);
        H(i, j) = H(j, i) = (objective(pp) - objective(pm) - objective(mp) + objective(mm)) / (4 * h(i) * h(j));
      }
    }
    if (!H.allFinite()) return Eigen::Matrix3d::Identity();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(H);
    Eigen::Vector3d lambda = eig.eigenvalues().cwiseAbs();
    const double floor = 1e-6 * std::max(1.0, lambda.maxCoeff());
    lambda = lambda.cwiseMax(floor);
    return eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  };

  fit.objective_trace.push_back(cur.objective);
  Eigen::Vector3d grad = gradient(theta);
  bool converged = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Eigen::Vector3d dir = -newton_matrix(theta, cur.objective) * grad;
    if (!(dir.dot(grad) < 0)) dir = -grad;
    // Cap the step in log-variance units.
    const double max_step = dir.cwiseAbs().maxCoeff();
    if (max_step > 2.0) dir *= 2.0 / max_step;

    double step = 1.0;
    Eigen::Vector3d next;
    double f_next = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      next = theta + step * dir;
      f_next = objective(next);
      if (f_next <= cur.objective + 1e-4 * step * dir.dot(grad)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;  // no descent available at working precision
      break;
    }
    const double change = std::abs(cur.objective - f_next) / std::max(1.0, std::abs(cur.objective));
    theta = next;
    grad = gradient(theta);
    cur = eval_theta(theta);
    fit.objective_trace.push_back(cur.objective);
    if (change < options.tolerance) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged) throw Error(ErrorKind::Convergence, fmt::format("LME did not converge in {} iterations", it));
  fit.iterations = it;
  fill_fit(fit, p, cur, relative_covariance(theta));
  return fit;
}

LmeFit fit_lme(const CohortTable& table, Response response, const LmeOptions& options) {
  return fit_lme(make_problem(table, response), options);
}

std::size_t LmeFit::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::InvalidArgument, "no coefficient named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double LmeFit::coefficient(const std::string& name) const { return beta(static_cast<Eigen::Index>(index_of(name))); }

std::vector<ReportRow> report_rows(const LmeFit& icv, const LmeFit& sas, double alpha) {
  static const std::array<std::pair<const char*, const char*>, 3> effects{
      {{"sex", "sex"}, {"baseline_age", "baseline age"}, {"interval", "follow-up interval"}}};
  std::vector<ReportRow> rows;
  for (const auto* fit : {&icv, &sas}) {
    for (const auto& [key, label] : effects) {
      const auto j = static_cast<Eigen::Index>(fit->index_of(key));
      ReportRow r;
      r.panel = fit == &icv ? "ICV" : "SAS volume";
      r.effect = label;
      r.beta = fit->beta(j);
      r.se = fit->se(j);
      r.p = fit->p(j);
      r.significant = r.p <= alpha;
      rows.push_back(r);
    }
  }
  return rows;
}

std::string format_report_text(const LmeFit& icv, const LmeFit& sas, double alpha) {
  const auto rows = report_rows(icv, sas, alpha);
  std::string out;
  out += fmt::format("# criterion={} p-values=Wald(normal) alpha={}\n",
                     icv.criterion == Criterion::Reml ? "REML" : "ML", alpha);
  out += "# sex coding: 0=female 1=male; volumes in cm3; ages and intervals in years\n";
  out += fmt::format("# ICV: {} visits, {} subjects; SAS: {} visits, {} subjects\n", icv.n_obs, icv.n_subjects,
                     sas.n_obs, sas.n_subjects);
  out += fmt::format("{:<20} | {:>10} {:>10} {:>11}  | {:>10} {:>10} {:>11}\n", "effect", "ICV beta", "SE", "p",
                     "SAS beta", "SE", "p");
  out += std::string(98, '-') + "\n";
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& a = rows[i];
    const auto& s = rows[i + 3];
    out += fmt::format("{:<20} | {:>10.3f} {:>10.3f} {:>10.3g}{} | {:>10.3f} {:>10.3f} {:>10.3g}{}\n", a.effect, a.beta,
                       a.se, a.p, a.significant ? "*" : " ", s.beta, s.se, s.p, s.significant ? "*" : " ");
  }
  out += fmt::format("(* p <= {})\n", alpha);
  return out;
}

std::string format_report_csv(const LmeFit& icv, const LmeFit& sas, double alpha) {
  std::string out = "panel,effect,beta,se,p,significant\n";
  for (const auto& r : report_rows(icv, sas, alpha))
    out += fmt::format("{},{},{},{},{},{}\n", r.panel, r.effect, r.beta, r.se, r.p, r.significant ? 1 : 0);
  return out;
}

std::string format_trajectory_csv(const CohortTable& table, const LmeFit& fit, Response response) {
  std::array<double, 2> icv_sum{}, icv_n{};
  for (const auto& r : table.rows) {
    icv_sum[static_cast<std::size_t>(r.sex)] += r.icv;
    icv_n[static_cast<std::size_t>(r.sex)] += 1;
  }
  std::string out = "subject_id,interval_years,response,fitted\n";
  for (const auto& r : table.rows) {
    double fitted = fit.coefficient("intercept") + fit.coefficient("sex") * r.sex +
                    fit.coefficient("baseline_age") * r.baseline_age + fit.coefficient("interval") * r.interval;
    if (response == Response::Sas) {
      const auto s = static_cast<std::size_t>(r.sex);
      fitted += fit.coefficient("icv") * (icv_sum[s] / icv_n[s]);
    }
    out += fmt::format("{},{},{},{}\n", r.subject_id, r.interval, response == Response::Icv ? r.icv : r.sas, fitted);
  }
  return out;
}

}  // namespace nestedsurf
