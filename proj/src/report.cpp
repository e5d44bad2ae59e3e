#include "threshcox/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace threshcox {

using nlohmann::json;

namespace {

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r ? static_cast<int>(j[0].size()) : 0;
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

Method method_from_name(const std::string& s) {
  for (Method m : {Method::Naive, Method::RC1, Method::RC2, Method::RR1, Method::RR2,
                   Method::MPPLE, Method::SIMEX})
    if (s == method_name(m)) return m;
  throw ConfigError("unknown method: " + s);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

double wald_pvalue(double estimate, double se) {
  if (!(se > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double z = std::abs(estimate / se);
  return std::erfc(z / std::sqrt(2.0));
}

std::string fit_result_to_json(const FitResult& fr) {
  json j;
  j["method"] = method_name(fr.method);
  j["gamma"] = std::vector<double>(fr.theta_hat.gamma.data(),
                                   fr.theta_hat.gamma.data() + fr.theta_hat.p());
  j["beta"] = fr.theta_hat.beta;
  j["omega"] = fr.theta_hat.omega;
  j["tau"] = fr.theta_hat.tau;
  j["covariance"] = matrix_to_json(fr.covariance);
  j["converged"] = fr.converged;
  j["tau_on_boundary"] = fr.tau_on_boundary;
  j["newton_iterations"] = fr.newton_iterations;
  j["tau_evaluations"] = fr.tau_evaluations;
  j["objective"] = fr.objective;
  j["tau_bracket"] = {fr.tau_bracket_used.first, fr.tau_bracket_used.second};
  j["warnings"] = fr.warnings;
  return j.dump(2);
}

FitResult parse_fit_result(const std::string& json_text) {
  const json j = json::parse(json_text);
  FitResult fr;
  fr.method = method_from_name(j.at("method").get<std::string>());
  const auto g = j.at("gamma").get<std::vector<double>>();
  fr.theta_hat.gamma = Eigen::Map<const Vec>(g.data(), static_cast<int>(g.size()));
  fr.theta_hat.beta = j.at("beta").get<double>();
  fr.theta_hat.omega = j.at("omega").get<double>();
  fr.theta_hat.tau = j.at("tau").get<double>();
  fr.covariance = matrix_from_json(j.at("covariance"));
  fr.converged = j.at("converged").get<bool>();
  fr.tau_on_boundary = j.at("tau_on_boundary").get<bool>();
  fr.newton_iterations = j.at("newton_iterations").get<int>();
  fr.tau_evaluations = j.at("tau_evaluations").get<int>();
  fr.objective = j.at("objective").get<double>();
  fr.tau_bracket_used = {j.at("tau_bracket")[0].get<double>(),
                         j.at("tau_bracket")[1].get<double>()};
  fr.warnings = j.at("warnings").get<std::vector<std::string>>();
  return fr;
}

std::string render_fit_table(const std::vector<FitResult>& fits) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "method" << std::setw(10) << "param"
     << std::setw(22) << "estimate(SE)" << std::setw(10) << "p-value"
     << "95% CI exp(coef)\n";
  os << std::string(70, '-') << "\n";
  for (const FitResult& fr : fits) {
    const Vec se = fr.se();
    const int p = fr.p();
    std::vector<std::pair<std::string, int>> params;
    for (int k = 0; k < p; ++k) params.emplace_back("z" + std::to_string(k + 1), k);
    params.emplace_back("beta", p);
    params.emplace_back("omega", p + 1);
    params.emplace_back("tau", p + 2);
    const Vec full = fr.theta_hat.full();
    for (const auto& [name, idx] : params) {
      const double est = full[idx], s = se[idx];
      os << std::left << std::setw(10) << method_name(fr.method) << std::setw(10)
         << name << std::setw(22) << (fmt(est) + "(" + fmt(s) + ")");
      if (name == "tau") {
        os << std::setw(10) << "-" << "-\n";
      } else {
        const double pv = wald_pvalue(est, s);
        const double lo = std::exp(est - 1.959964 * s);
        const double hi = std::exp(est + 1.959964 * s);
        os << std::setw(10) << (std::isnan(pv) ? std::string("-") : fmt(pv))
           << "(" << fmt(lo) << ", " << fmt(hi) << ")\n";
      }
    }
    if (!fr.converged) os << "  [warning] " << method_name(fr.method)
                          << ": did not converge\n";
  }
  return os.str();
}

std::string bias_table_csv(const BiasTable& table) {
  std::ostringstream os;
  os << "method,param,median,rel_bias,sd,converged,total,pct\n";
  for (const MethodSummary& row : table.rows) {
    const std::pair<const char*, const BiasCell*> cells[] = {
        {"beta", &row.beta}, {"omega", &row.omega}, {"tau", &row.tau}};
    for (const auto& [param, cell] : cells)
      os << row.method << "," << param << "," << cell->median << ","
         << cell->rel_bias << "," << cell->sd << "," << row.converged << ","
         << row.total << "," << row.pct() << "\n";
  }
  return os.str();
}

std::string bias_table_text(const BiasTable& table) {
  std::ostringstream os;
  os << "n=" << table.scenario.n << " incidence=" << table.scenario.cumulative_incidence
     << " rho_xw=" << table.scenario.rho_xw
     << " tau_true=" << table.scenario.theta_true.tau
     << " reps=" << table.scenario.replications << "\n";
  os << std::left << std::setw(10) << "method" << std::setw(12) << "beta"
     << std::setw(12) << "omega" << std::setw(12) << "tau" << "pct\n";
  os << std::string(50, '-') << "\n";
  for (const MethodSummary& row : table.rows)
    os << std::left << std::setw(10) << row.method << std::setw(12)
       << fmt(row.beta.rel_bias, 3) << std::setw(12) << fmt(row.omega.rel_bias, 3)
       << std::setw(12) << fmt(row.tau.rel_bias, 3) << fmt(row.pct(), 1) << "\n";
  return os.str();
}

std::string atlas_csv(const std::vector<AtlasCell>& cells) {
  std::ostringstream os;
  os << "method,rho_xw,tau_true,converged,"
        "beta_star,omega_star,tau_star,bias_beta,bias_omega,bias_tau,"
        "empirical_beta,empirical_omega,delta_beta,delta_omega\n";
  for (const AtlasCell& c : cells) {
    os << method_name(c.method) << "," << c.rho_xw << "," << c.tau_true << ","
       << (c.converged ? 1 : 0) << "," << c.theta_star.beta << ","
       << c.theta_star.omega << "," << c.theta_star.tau << "," << c.bias_beta << ","
       << c.bias_omega << "," << c.bias_tau << ",";
    if (c.empirical)
      os << c.empirical->beta << "," << c.empirical->omega << "," << c.delta_beta()
         << "," << c.delta_omega();
    else
      os << ",,,";
    os << "\n";
  }
  return os.str();
}

std::string manifest_json(const std::string& config_text, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : config_text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  json j;
  j["config_hash"] = h;
  j["seed"] = seed;
  j["library"] = "threshcox";
  j["version"] = "1.0.0";
  return j.dump(2);
}

}  // namespace threshcox
