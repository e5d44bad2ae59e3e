#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "threshcox/csvio.hpp"
#include "threshcox/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace threshcox;

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("THRESHCOX_SEED");
  if (!s || !*s) return std::nullopt;
  return std::strtoull(s, nullptr, 10);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::Naive, Method::RC1, Method::RC2, Method::RR1, Method::RR2,
                   Method::MPPLE, Method::SIMEX})
    if (s == method_name(m)) return m;
  throw ConfigError("unknown method: " + s);
}

struct FitArgs {
  std::string cohort_path;
  std::vector<std::string> methods{"naive"};
  std::string reliability_path;
  std::vector<double> calibration;  // a, b, v
  double sigma_x2 = -1.0, sigma_u2 = -1.0, alpha0 = 0.0;
  std::vector<double> alpha1;
  double tau_fixed = std::numeric_limits<double>::quiet_NaN();
  std::string out_dir = ".";
  std::uint64_t seed = 20240817ull;
  int bootstrap_reps = 50;
  int simex_b = 200;
  double bracket_q = 0.05;
  int threads = 0;
};

MeasurementModel resolve_nuisance(const FitArgs& a, bool needed,
                                  std::vector<std::string>& notes) {
  const int sources = (!a.reliability_path.empty()) + (!a.calibration.empty()) +
                      (a.sigma_x2 >= 0.0 || a.sigma_u2 >= 0.0);
  if (sources > 1)
    throw ConfigError("give exactly one nuisance source: --reliability, "
                      "--calibration, or --sigma-x2/--sigma-u2");
  if (!a.reliability_path.empty()) {
    const NuisanceEstimate est =
        estimate_nuisance(read_reliability_csv_file(a.reliability_path));
    if (est.sigma_x2_clamped) notes.emplace_back("SigmaX2ClampedToZero");
    return est.model;
  }
  if (!a.calibration.empty()) {
    if (a.calibration.size() != 3)
      throw ConfigError("--calibration needs a,b,v (E(X|W)=a+bW, Var(X|W)=v)");
    return MeasurementModel::from_calibration_line(a.calibration[0], a.calibration[1],
                                                   a.calibration[2]);
  }
  if (a.sigma_x2 >= 0.0 && a.sigma_u2 >= 0.0) {
    Vec al1;
    if (!a.alpha1.empty())
      al1 = Eigen::Map<const Vec>(a.alpha1.data(),
                                  static_cast<int>(a.alpha1.size()));
    return MeasurementModel(a.alpha0, al1, a.sigma_x2, a.sigma_u2);
  }
  if (needed)
    throw ConfigError("this method needs nuisance parameters "
                      "(--reliability/--calibration/--sigma-x2 --sigma-u2)");
  return MeasurementModel::error_free();
}

int cmd_fit(const FitArgs& a) {
  const Cohort cohort = read_cohort_csv_file(a.cohort_path);

  std::vector<Method> methods;
  for (const std::string& s : a.methods) methods.push_back(parse_method(s));
  bool needs_nuisance = false;
  for (Method m : methods) needs_nuisance |= m != Method::Naive;

  std::vector<std::string> notes;
  const MeasurementModel me = resolve_nuisance(a, needs_nuisance, notes);

  FitConfig cfg;
  cfg.seed = env_seed().value_or(a.seed);
  cfg.bootstrap_reps = a.bootstrap_reps;
  cfg.optim.tau_quantile_q = a.bracket_q;
  if (!std::isnan(a.tau_fixed)) cfg.fixed_tau = a.tau_fixed;

  fs::create_directories(a.out_dir);
  std::vector<FitResult> fits;
  bool all_converged = true;
  for (Method m : methods) {
    FitResult fr;
    switch (m) {
      case Method::Naive: fr = fit_naive(cohort, cfg); break;
      case Method::RC1: fr = fit_rc1(cohort, me, cfg); break;
      case Method::RC2: fr = fit_rc2(cohort, me, cfg); break;
      case Method::RR1: fr = fit_rr1(cohort, me, cfg); break;
      case Method::RR2: fr = fit_rr2(cohort, me, cfg); break;
      case Method::MPPLE: fr = fit_mpple(cohort, me, cfg); break;
      case Method::SIMEX: {
        SimexPlan plan;
        plan.b_per_lambda = a.simex_b;
        plan.seed = cfg.seed;
        fr = fit_simex(cohort, me, plan, cfg);
        break;
      }
    }
    fr.warnings.insert(fr.warnings.end(), notes.begin(), notes.end());
    all_converged &= fr.converged;
    write_file(fs::path(a.out_dir) / ("fit_" + std::string(method_name(m)) + ".json"),
               fit_result_to_json(fr));
    fits.push_back(std::move(fr));
  }
  const std::string table = render_fit_table(fits);
  write_file(fs::path(a.out_dir) / "fit_table.txt", table);
  std::cout << table;

  std::ostringstream cfgtext;
  cfgtext << a.cohort_path;
  for (const std::string& m : a.methods) cfgtext << " " << m;
  cfgtext << " tau=" << a.tau_fixed << " q=" << a.bracket_q;
  write_file(fs::path(a.out_dir) / "manifest.json",
             manifest_json(cfgtext.str(), cfg.seed));
  return all_converged ? 0 : 2;
}

SimScenario scenario_from_json(const json& j) {
  SimScenario sc;
  sc.n = j.value("n", sc.n);
  sc.cumulative_incidence = j.value("incidence", sc.cumulative_incidence);
  sc.rho_xw = j.value("rho_xw", sc.rho_xw);
  sc.theta_true.gamma = Vec();
  sc.theta_true.beta = j.value("beta", std::log(1.5));
  sc.theta_true.omega = j.value("omega", std::log(2.0));
  sc.theta_true.tau = j.value("tau", 0.0);
  sc.replications = j.value("replications", sc.replications);
  const std::string law = j.value("error_law", std::string("normal"));
  if (law == "normal") {
    sc.error_law = ErrorLaw::Normal;
  } else if (law == "t") {
    sc.error_law = ErrorLaw::StudentT;
    sc.t_df = j.value("t_df", sc.t_df);
  } else {
    throw ConfigError("error_law must be 'normal' or 't' (at scenario." + law + ")");
  }
  const std::string nm = j.value("nuisance", std::string("known"));
  if (nm == "known") {
    sc.nuisance_known = true;
  } else if (nm == "estimated") {
    sc.nuisance_known = false;
    sc.reliability_k = j.value("reliability_k", sc.reliability_k);
    sc.reliability_m = j.value("reliability_m", sc.reliability_m);
  } else {
    throw ConfigError("nuisance must be 'known' or 'estimated'");
  }
  sc.seed = j.value("seed", sc.seed);
  sc.admin_censor_time = j.value("censor_time", sc.admin_censor_time);
  return sc;
}

int cmd_simulate(const std::string& config_path, const std::string& out_prefix) {
  const std::string text = read_file(config_path);
  const json cfg = json::parse(text);

  RunOptions opt;
  if (cfg.contains("methods")) {
    opt.methods.clear();
    for (const auto& m : cfg.at("methods"))
      opt.methods.push_back(parse_method(m.get<std::string>()));
  }
  opt.include_benchmark = cfg.value("benchmark", true);
  opt.fit.bootstrap_reps = cfg.value("bootstrap_reps", opt.fit.bootstrap_reps);
  opt.simex.b_per_lambda = cfg.value("simex_b", opt.simex.b_per_lambda);
  opt.progress = [](int rep, int total) {
    if (rep % 25 == 0) std::cerr << "rep " << rep << "/" << total << "\n";
  };

  const auto scenarios = cfg.at("scenarios");
  int idx = 0;
  for (const auto& sj : scenarios) {
    SimScenario sc = scenario_from_json(sj);
    if (const auto s = env_seed()) sc.seed = *s;
    const BiasTable table = run_scenario(sc, opt);
    const std::string base = out_prefix + "_" + std::to_string(idx);
    write_file(base + ".csv", bias_table_csv(table));
    write_file(base + ".txt", bias_table_text(table));
    std::cout << bias_table_text(table) << "\n";
    ++idx;
  }
  write_file(out_prefix + "_manifest.json",
             manifest_json(text, env_seed().value_or(cfg.value("seed", 20240817ull))));
  return 0;
}

int cmd_biasatlas(const std::string& config_path, const std::string& out_path) {
  const std::string text = read_file(config_path);
  const json cfg = json::parse(text);

  SimScenario base;
  base.n = cfg.value("n", 50000);
  base.cumulative_incidence = cfg.value("incidence", 0.01);
  base.theta_true.gamma = Vec();
  base.theta_true.beta = cfg.value("beta", std::log(1.5));
  base.theta_true.omega = cfg.value("omega", std::log(2.0));
  base.replications = 1;
  base.seed = env_seed().value_or(cfg.value("seed", 20240817ull));

  std::vector<Method> methods{Method::Naive, Method::RC1, Method::RC2, Method::RR1};
  if (cfg.contains("methods")) {
    methods.clear();
    for (const auto& m : cfg.at("methods"))
      methods.push_back(parse_method(m.get<std::string>()));
  }
  std::vector<double> rhos = cfg.value("rhos", std::vector<double>{0.8, 0.6, 0.4});
  std::vector<double> taus =
      cfg.value("taus", std::vector<double>{-1.2816, -0.6745, 0.0, 0.6745, 1.2816});

  const auto cells = atlas_grid(methods, rhos, taus, base);
  write_file(out_path, atlas_csv(cells));
  write_file(out_path + ".manifest.json", manifest_json(text, base.seed));
  std::cout << "wrote " << cells.size() << " atlas cells to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cox changepoint models with covariate measurement error"};
  app.require_subcommand(1);

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "fit a cohort CSV");
  fit->add_option("--cohort", fa.cohort_path, "cohort CSV path")->required();
  fit->add_option("--method", fa.methods,
                  "methods: naive rc1 rc2 rr1 rr2 mpple simex")
      ->delimiter(',');
  fit->add_option("--reliability", fa.reliability_path, "reliability CSV (id,w)");
  fit->add_option("--calibration", fa.calibration,
                  "calibration line a,b,v: E(X|W)=a+bW, Var(X|W)=v")
      ->delimiter(',');
  fit->add_option("--sigma-x2", fa.sigma_x2, "sigma_x^2 (with --sigma-u2)");
  fit->add_option("--sigma-u2", fa.sigma_u2, "sigma_u^2 (with --sigma-x2)");
  fit->add_option("--alpha0", fa.alpha0, "error model intercept");
  fit->add_option("--alpha1", fa.alpha1, "error model covariate slopes")->delimiter(',');
  fit->add_option("--tau", fa.tau_fixed, "fix the changepoint (skip profiling)");
  fit->add_option("--out", fa.out_dir, "output directory");
  fit->add_option("--seed", fa.seed, "RNG seed (THRESHCOX_SEED overrides)");
  fit->add_option("--bootstrap-reps", fa.bootstrap_reps, "RR2 resamples");
  fit->add_option("--simex-b", fa.simex_b, "SIMEX B per lambda");
  fit->add_option("--bracket-q", fa.bracket_q, "tau bracket quantile");
  fit->add_option("--threads", fa.threads, "worker threads (0 = all cores)");

  std::string sim_config, sim_out = "simulation";
  CLI::App* sim = app.add_subcommand("simulate", "run a scenario grid");
  sim->add_option("--config", sim_config, "scenario JSON")->required();
  sim->add_option("--out", sim_out, "output prefix");
  int sim_threads = 0;
  sim->add_option("--threads", sim_threads, "worker threads (0 = all cores)");

  std::string atlas_config, atlas_out = "atlas.csv";
  CLI::App* atlas = app.add_subcommand("biasatlas", "asymptotic-bias grid");
  atlas->add_option("--config", atlas_config, "grid JSON")->required();
  atlas->add_option("--out", atlas_out, "output CSV");
  int atlas_threads = 0;
  atlas->add_option("--threads", atlas_threads, "worker threads (0 = all cores)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (fit->parsed()) return cmd_fit(fa);
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out);
    if (atlas->parsed()) return cmd_biasatlas(atlas_config, atlas_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
