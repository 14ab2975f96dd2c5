// token-screen: build greedy exploration scenarios, derive their stopping
// laws, price the token menu and verify the optimality certificates from the
// command line. Every CSV has a header row; column orders are listed in the
// per-command help text and never change.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tokenscreen/baselines.hpp"
#include "tokenscreen/config.hpp"
#include "tokenscreen/csvio.hpp"
#include "tokenscreen/extensions.hpp"
#include "tokenscreen/simulate.hpp"
#include "tokenscreen/verify.hpp"

using namespace tokenscreen;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::string law_path;
  std::string valuation = "1";
  std::string example = "leading";
  std::size_t paths = 100000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
  double r = 1.25;
  double alpha = 0.0;  // 0: take the config's entropy alpha
};

std::string join_out(const RunConfig& cfg, const std::string& out,
                     const std::string& fallback) {
  if (!out.empty()) return out;
  if (cfg.out_dir.empty() || cfg.out_dir == ".") return fallback;
  return cfg.out_dir + "/" + fallback;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

double to_num(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw validation_error("bad number '" + s + "' in " + where);
  }
}

// ---------------------------------------------------------------------------

int cmd_skeleton(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  GreedySkeleton sk = cfg.skeleton();
  const std::size_t n = sk.n();

  std::vector<std::string> header{"t", "k"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("mu_" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) header.push_back("beta_" + std::to_string(i));
  header.push_back("zeta");

  std::string path = join_out(cfg, opt.out, "skeleton.csv");
  CsvWriter csv(path, header);
  auto emit = [&](double t, int k, const Vec& mu, const Vec& beta, double zeta) {
    Vec row{t, static_cast<double>(k)};
    row.insert(row.end(), mu.begin(), mu.end());
    row.insert(row.end(), beta.begin(), beta.end());
    row.push_back(zeta);
    csv.row(row);
  };
  for (const Phase& ph : sk.phases)
    for (const PhaseStep& st : ph.steps) emit(st.t, ph.index, st.mu, st.beta, st.zeta);
  emit(sk.t_hat_K, static_cast<int>(sk.phases.size()), sk.stat.mu, sk.stat.beta,
       sk.stat.zeta);

  std::cout << "skeleton: " << sk.phases.size() << " transient phase(s), t_hat="
            << fmt17(sk.t_hat_K) << ", stationary hazard=" << fmt17(sk.stat.hazard)
            << ", wrote " << path << "\n";
  return 0;
}

int cmd_law(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  GreedySkeleton sk = cfg.skeleton();
  StoppingLaw law = cfg.law();
  CapacityAudit audit = capacity_audit(law, sk.entropy, cfg.make_prior(), cfg.chi,
                                       cfg.tolerances.eps_cap);

  const std::size_t n = law.n();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("F_" + std::to_string(i));
  header.push_back("f");
  header.push_back("slack");

  std::string path = join_out(cfg, opt.out, "law.csv");
  CsvWriter csv(path, header);
  for (std::size_t j = 0; j < law.grid.size(); ++j) {
    double t = law.grid[j];
    Vec row{t};
    for (std::size_t i = 0; i < n; ++i) row.push_back(Fi_at(law, i, t));
    row.push_back(law.f[j]);
    row.push_back(detail::interp(audit.times, audit.slack, t));
    csv.row(row);
  }
  std::cout << "law: " << law.grid.size() << " grid points, min slack "
            << fmt17(audit.min_slack) << " at t=" << fmt17(audit.argmin_time)
            << ", wrote " << path << "\n";
  if (!audit.feasible)
    throw certificate_error("capacity constraint violated at t=" +
                            fmt17(audit.argmin_time) +
                            " (slack " + fmt17(audit.min_slack) + ")");
  return 0;
}

int cmd_simulate(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  GreedySkeleton sk = cfg.skeleton();
  SimulateOpts so;
  so.paths = opt.paths;
  so.seed = opt.seed_set ? opt.seed : cfg.seed;
  so.threads = opt.threads;
  Simulation sim = simulate_paths(sk, so);

  std::string path = join_out(cfg, opt.out, "sim.csv");
  CsvWriter csv(path, {"path", "theta", "tau"});
  for (std::size_t i = 0; i < sim.paths(); ++i)
    csv.row(Vec{static_cast<double>(i), static_cast<double>(sim.theta[i]), sim.tau[i]});
  std::cout << "simulate: " << sim.paths() << " paths, seed " << so.seed << ", wrote "
            << path << "\n";
  return 0;
}

int cmd_menu(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  StoppingLaw law = cfg.law();
  TypeModel tm = cfg.make_types();
  TokenMenu menu = build_menu(law, tm, cfg.grids.type_count);

  std::string path = join_out(cfg, opt.out, "menu.csv");
  CsvWriter csv(path, {"r", "T", "cap_tokens", "price", "marginal_price", "utility",
                       "net_utility"});
  for (const MenuRow& row : menu.rows)
    csv.row(Vec{row.r, row.T, row.cap_tokens, row.price, row.marginal_price,
                row.utility, row.net_utility});
  std::cout << "menu: " << menu.rows.size() << " rows, revenue "
            << fmt17(menu_revenue(menu, tm)) << ", wrote " << path << "\n";
  return 0;
}

int cmd_revenue(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  StoppingLaw law = cfg.law();
  TypeModel tm = cfg.make_types();
  TokenMenu menu = build_menu(law, tm, cfg.grids.type_count);
  double revenue = menu_revenue(menu, tm);

  EntropyModel entropy = cfg.make_entropy();
  Belief mu0 = cfg.make_prior();
  ConstantDelaySolution cd = constant_delay_solution(tm, entropy, mu0, cfg.chi);
  DiffusionSolution df = diffusion_solution(tm, cfg.chi);

  JsonBuilder ratios;
  ratios.put("constant_delay", revenue / cd.revenue())
      .put("diffusion", revenue / df.revenue());
  JsonBuilder report;
  report.put("revenue", revenue)
      .put("baseline_constant_delay", cd.revenue())
      .put("baseline_diffusion", df.revenue())
      .put("ratios", ratios);

  std::string text = report.str() + "\n";
  std::cout << text;
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw validation_error("cannot open output file: " + opt.out);
    out << text;
  }
  return 0;
}

int cmd_baselines(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  TypeModel tm = cfg.make_types();
  ConstantDelaySolution cd =
      constant_delay_solution(tm, cfg.make_entropy(), cfg.make_prior(), cfg.chi);
  DiffusionSolution df = diffusion_solution(tm, cfg.chi);

  JsonBuilder jcd, jdf, report;
  jcd.put("t_min", cd.t_min).put("revenue", cd.revenue());
  jdf.put("sigma_cap", df.sigma_cap).put("revenue", df.revenue());
  report.put("constant_delay", jcd).put("diffusion", jdf);

  std::string text = report.str() + "\n";
  std::cout << text;
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw validation_error("cannot open output file: " + opt.out);
    out << text;
  }
  return 0;
}

StoppingLaw read_law_csv(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open law file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw validation_error("law file is empty: " + path);
  auto hdr = split(line, ',');
  if (hdr.size() < 4 || hdr.front() != "t" || hdr[hdr.size() - 2] != "f")
    throw validation_error("law file header must be t,F_0..,f,slack");
  std::size_t n = hdr.size() - 3;

  StoppingLaw law;
  law.mu0 = cfg.prior;
  if (n != law.mu0.size())
    throw validation_error("law file has " + std::to_string(n) +
                           " states but the config prior has " +
                           std::to_string(law.mu0.size()));
  law.chi = cfg.chi;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != hdr.size())
      throw validation_error("law file row " + std::to_string(lineno) +
                             " has the wrong width");
    std::string where = path + ":" + std::to_string(lineno);
    law.grid.push_back(to_num(cells[0], where));
    Vec row(n);
    for (std::size_t i = 0; i < n; ++i) row[i] = to_num(cells[1 + i], where);
    law.Fi.push_back(std::move(row));
    law.f.push_back(to_num(cells[1 + n], where));
  }
  if (law.grid.size() < 2 || law.grid.front() != 0.0)
    throw validation_error("law grid must start at t=0 with at least two rows");
  law.horizon = law.grid.back();
  law.never_mass.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    law.never_mass[i] = std::max(0.0, law.mu0[i] - Fi_total(law, i));
  return law;
}

int cmd_verify(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  EntropyModel entropy = cfg.make_entropy();
  Belief mu0 = cfg.make_prior();

  if (!opt.law_path.empty()) {
    // audit a stored (possibly hand-edited) law against the capacity bound
    StoppingLaw law = read_law_csv(opt.law_path, cfg);
    CapacityAudit audit =
        capacity_audit(law, entropy, mu0, cfg.chi, cfg.tolerances.eps_cap);
    std::cout << "capacity audit: min slack " << fmt17(audit.min_slack) << " at t="
              << fmt17(audit.argmin_time) << "\n";
    if (!audit.feasible)
      throw certificate_error("capacity constraint violated at t=" +
                              fmt17(audit.argmin_time) + " (slack " +
                              fmt17(audit.min_slack) + ")");
    return 0;
  }

  GreedySkeleton sk = cfg.skeleton();
  StoppingLaw law = stopping_law(sk, cfg.grids.horizon);
  CapacityAudit audit =
      capacity_audit(law, entropy, mu0, cfg.chi, cfg.tolerances.eps_cap);

  Payoff rho = Payoff::exponential(1.0);
  MultiplierPath mp = foc_multiplier(sk, rho);
  FocReport foc = foc_check(sk, law, mp, rho);

  double greedy = expected_payoff(law, rho);
  OracleBound ob = oracle_upper_bound(rho, entropy, mu0, cfg.chi,
                                      geometric_grid(40.0, 200, 2e-3),
                                      cfg.tolerances.eps_cap);
  double oracle_gap = ob.value / greedy - 1.0;

  TypeModel tm = cfg.make_types();
  TokenMenu menu = build_menu(law, tm, cfg.grids.type_count);
  IcReport ic = ic_audit(menu, tm, law, static_cast<int>(opt.threads));

  JsonBuilder jfoc;
  jfoc.put("max_violation", foc.max_violation)
      .put("max_active_gap", foc.max_active_gap)
      .put("min_inactive_dl", foc.min_inactive_dl)
      .put("max_active_abs_dl", foc.max_active_abs_dl)
      .put("sign_pattern_ok", foc.sign_pattern_ok);
  JsonBuilder report;
  report.put("foc", jfoc)
      .put("oracle_gap", oracle_gap)
      .put("ic_max_gain", ic.max_gain)
      .put("ir_min_slack", ic.min_ir_slack);

  std::string text = report.str() + "\n";
  std::cout << text;
  std::string path = join_out(cfg, opt.out, "verify.json");
  {
    std::ofstream out(path);
    if (!out) throw validation_error("cannot open output file: " + path);
    out << text;
  }

  if (!audit.feasible)
    throw certificate_error("capacity constraint violated at t=" +
                            fmt17(audit.argmin_time));
  if (!foc.sign_pattern_ok || foc.max_violation > 1e-7 || foc.max_active_gap > 1e-7)
    throw certificate_error("FOC certificate failed (max violation " +
                            fmt17(foc.max_violation) + ")");
  if (!ob.converged || oracle_gap > 0.02)
    throw certificate_error("oracle bound did not certify the greedy value (gap " +
                            fmt17(oracle_gap) + ")");
  if (ic.max_gain > 1e-6 || ic.min_ir_slack < -1e-8)
    throw certificate_error("IC/IR audit failed (max gain " + fmt17(ic.max_gain) + ")");
  return 0;
}

int cmd_quality(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  TypeModel tm = cfg.make_types();
  double alpha = opt.alpha > 0.0 ? opt.alpha : cfg.entropy.alpha;
  QualityCurve qc = quality_curve(opt.r, tm, alpha, cfg.chi);

  std::string path = join_out(cfg, opt.out, "quality.csv");
  CsvWriter csv(path, {"t", "kappa", "upper", "lower"});
  for (std::size_t j = 0; j < qc.t.size(); ++j)
    csv.row(Vec{qc.t[j], qc.kappa[j], qc.upper[j], qc.lower[j]});
  std::cout << "quality: r=" << fmt17(qc.r) << " cutoff=" << fmt17(qc.T)
            << " plateau=" << fmt17(qc.plateau) << ", wrote " << path << "\n";
  return 0;
}

int cmd_extended_menu(const Options& opt) {
  RunConfig cfg = load_config(opt.config_path);
  StoppingLaw law = cfg.law();
  TypeModel tm = cfg.make_types();
  ValuationProfile v = ValuationProfile::parse(opt.valuation);
  TokenMenu menu = extended_menu(tm, v, law, cfg.chi, cfg.grids.type_count);

  std::string path = join_out(cfg, opt.out, "extended_menu.csv");
  CsvWriter csv(path, {"r", "T", "cap_tokens", "price", "marginal_price", "utility",
                       "net_utility"});
  for (const MenuRow& row : menu.rows)
    csv.row(Vec{row.r, row.T, row.cap_tokens, row.price, row.marginal_price,
                row.utility, row.net_utility});
  std::cout << "extended-menu: valuation " << opt.valuation << ", wrote " << path
            << "\n";
  return 0;
}

int cmd_reproduce(const Options& opt) {
  if (opt.example != "leading")
    throw validation_error("unknown example '" + opt.example +
                           "'; available: leading");

  EntropyModel entropy = EntropyModel::quadratic_binary();
  Belief mu0 = Belief::binary(0.5);
  const double chi = 0.125;
  TypeModel tm = TypeModel::uniform(1.0, 2.0);

  struct Target {
    std::string name;
    double value, target, tol;
    bool pass;
  };
  std::vector<Target> targets;
  auto add = [&](const std::string& name, double value, double target, double tol) {
    targets.push_back({name, value, target, tol, std::abs(value - target) <= tol});
  };

  ConstantDelaySolution cd = constant_delay_solution(tm, entropy, mu0, chi);
  add("constant_delay_t_min", cd.t_min, 2.0, 1e-9);
  add("constant_delay_revenue", cd.revenue(), 0.5 * std::exp(-3.0), 1e-6);

  DiffusionSolution df = diffusion_solution(tm, chi);
  add("diffusion_sigma_cap", df.sigma_cap, 1.0 / (2.0 * std::sqrt(2.0)), 1e-12);
  add("diffusion_revenue", df.revenue(), sech(2.0 * std::sqrt(2.0)), 1e-6);

  GreedySkeleton sk = build_skeleton(entropy, mu0, chi);
  add("stationary_hazard", sk.stat.hazard, 0.5, 1e-9);

  StoppingLaw law = stopping_law(sk);
  TokenMenu menu = build_menu(law, tm, 401);
  double cutoff_dev = 0.0, price_dev = 0.0;
  for (int k = 0; k <= 9; ++k) {
    double r = 1.1 + 0.1 * k;
    cutoff_dev = std::max(cutoff_dev,
                          std::abs(virtual_preference(tm, r).T - 1.0 / (r - 1.0)));
    double closed =
        (3.0 + 2.0 * std::exp(-2.5) - 5.0 * std::exp(-(r + 0.5) / (r - 1.0))) / 15.0;
    price_dev = std::max(price_dev, std::abs(price(tm, law, r) - closed));
  }
  add("cutoff_T_max_dev", cutoff_dev, 0.0, 1e-9);
  add("price_closed_form_max_dev", price_dev, 0.0, 1e-6);
  add("menu_revenue", menu_revenue(menu, tm), 0.20198057431619676, 1e-3);

  Payoff rho = Payoff::exponential(1.0);
  MultiplierPath mp = foc_multiplier(sk, rho);
  FocReport foc = foc_check(sk, law, mp, rho);
  add("foc_max_violation", foc.max_violation, 0.0, 1e-7);
  add("foc_max_active_gap", foc.max_active_gap, 0.0, 1e-7);

  IcReport ic = ic_audit(menu, tm, law, static_cast<int>(opt.threads));
  add("ic_max_gain", std::max(ic.max_gain, 0.0), 0.0, 1e-6);
  add("ir_top_slack", ic.ir_slack_top, 0.0, 1e-8);

  bool all_pass = true;
  std::vector<JsonBuilder> items;
  for (const Target& t : targets) {
    all_pass = all_pass && t.pass;
    std::cout << (t.pass ? "[ok]   " : "[FAIL] ") << t.name << ": value="
              << fmt17(t.value) << " target=" << fmt17(t.target) << " tol="
              << fmt17(t.tol) << "\n";
    JsonBuilder item;
    item.put("name", t.name)
        .put("value", t.value)
        .put("target", t.target)
        .put("tol", t.tol)
        .put("pass", t.pass);
    items.push_back(item);
  }
  JsonBuilder report;
  report.put("example", opt.example).put_array("targets", items).put("all_pass", all_pass);
  std::string text = report.str() + "\n";
  std::cout << text;
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw validation_error("cannot open output file: " + opt.out);
    out << text;
  }
  if (!all_pass) throw certificate_error("reproduction targets failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{
      "token-screen: greedy exploration, stopping laws, token-cap menus and the\n"
      "optimality certificates behind them. Exit codes: 0 success, 1 validation\n"
      "failure, 2 numerical-certificate failure, 3 config error."};
  app.require_subcommand(1);

  auto add_config = [&](CLI::App* sc) {
    sc->add_option("--config", opt.config_path, "run config JSON (see configs/)")
        ->required();
    sc->add_option("--out", opt.out, "output path (default: output.dir of the config)");
  };

  auto* sc_skel = app.add_subcommand(
      "skeleton", "integrate the greedy belief path; CSV columns: t, k, mu_i..., "
                  "beta_i..., zeta");
  add_config(sc_skel);

  auto* sc_law = app.add_subcommand(
      "law", "derive the stopping-time law; CSV columns: t, F_i..., f, slack");
  add_config(sc_law);

  auto* sc_sim = app.add_subcommand(
      "simulate", "Monte Carlo paths of the greedy model; CSV columns: path, theta, tau");
  add_config(sc_sim);
  sc_sim->add_option("--paths", opt.paths, "number of paths (default 100000)");
  sc_sim->add_option("--seed", opt.seed, "RNG seed (default: config seed)")
      ->each([&](const std::string&) { opt.seed_set = true; });
  sc_sim->add_option("--threads", opt.threads,
                     "worker threads; output is byte-identical for any count");

  auto* sc_menu = app.add_subcommand(
      "menu", "revenue-optimal token menu; CSV columns: r, T, cap_tokens, price, "
              "marginal_price, utility, net_utility");
  add_config(sc_menu);

  auto* sc_rev = app.add_subcommand(
      "revenue", "JSON report {revenue, baseline_constant_delay, baseline_diffusion, "
                 "ratios} on stdout");
  add_config(sc_rev);

  auto* sc_base = app.add_subcommand(
      "baselines", "JSON report {constant_delay: {t_min, revenue}, diffusion: "
                   "{sigma_cap, revenue}} on stdout");
  add_config(sc_base);

  auto* sc_ver = app.add_subcommand(
      "verify", "optimality certificates; JSON {foc, oracle_gap, ic_max_gain, "
                "ir_min_slack}; with --law, audit a stored law CSV instead");
  add_config(sc_ver);
  sc_ver->add_option("--law", opt.law_path, "law CSV to audit against the capacity bound");
  sc_ver->add_option("--threads", opt.threads, "worker threads for the IC audit");

  auto* sc_qual = app.add_subcommand(
      "quality", "endogenous reasoning-quality boundaries; CSV columns: t, kappa, "
                 "upper, lower");
  add_config(sc_qual);
  sc_qual->add_option("--r", opt.r, "type whose curve to emit")->required();
  sc_qual->add_option("--alpha", opt.alpha, "entropy exponent (default: config alpha)");

  auto* sc_ext = app.add_subcommand(
      "extended-menu", "menu under a heterogeneous valuation profile; CSV columns as "
                       "in menu");
  add_config(sc_ext);
  sc_ext->add_option("--valuation", opt.valuation,
                     "q(r): one of 1, exp(r), exp(-r), exp(<num>*r)");

  auto* sc_rep = app.add_subcommand(
      "reproduce", "regenerate the worked example's numbers against stored targets");
  sc_rep->add_option("--example", opt.example, "example name (leading)");
  sc_rep->add_option("--out", opt.out, "also write the summary JSON here");
  sc_rep->add_option("--threads", opt.threads, "worker threads for the IC audit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    if (sc_skel->parsed()) return cmd_skeleton(opt);
    if (sc_law->parsed()) return cmd_law(opt);
    if (sc_sim->parsed()) return cmd_simulate(opt);
    if (sc_menu->parsed()) return cmd_menu(opt);
    if (sc_rev->parsed()) return cmd_revenue(opt);
    if (sc_base->parsed()) return cmd_baselines(opt);
    if (sc_ver->parsed()) return cmd_verify(opt);
    if (sc_qual->parsed()) return cmd_quality(opt);
    if (sc_ext->parsed()) return cmd_extended_menu(opt);
    if (sc_rep->parsed()) return cmd_reproduce(opt);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const certificate_error& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return 2;
  } catch (const validation_error& e) {
    std::cerr << "validation failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
