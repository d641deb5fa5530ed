#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rieszstop/amput.hpp"
#include "rieszstop/config.hpp"
#include "rieszstop/error.hpp"
#include "rieszstop/invest2d.hpp"
#include "rieszstop/model.hpp"
#include "rieszstop/perpetual.hpp"
#include "rieszstop/riesz.hpp"
#include "rieszstop/verify.hpp"

namespace rieszstop::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kSolver = 3, kGate = 4 };

struct RunConfig {
  std::string subcommand;
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::optional<int> steps;
  std::optional<int> paths;
  std::optional<double> tol;
  bool force = false;
  int dump_paths = 0;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Output files of one run. Every target is checked before any work starts,
/// so a refused overwrite leaves the directory untouched.
class Outputs {
public:
  Outputs(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

  void plan(const std::string& name) {
    const fs::path p = dir_ / name;
    if (fs::exists(p) && !force_)
      throw config_error("output " + p.string() + " exists; pass --force to overwrite");
  }

  void write(const std::string& name, const std::string& text) const {
    fs::create_directories(dir_);
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot write " + (dir_ / name).string());
    out << text;
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

private:
  fs::path dir_;
  bool force_;
};

struct Result {
  json body;
  bool gate_ok = true;
  std::string gate_message;
};

inline rieszstop::Quad2DConfig quad_from(json& sec, const RunConfig& rc) {
  rieszstop::Quad2DConfig q;
  const auto method = config::take<std::string>(sec, "quad_method", "polar");
  if (method == "polar") q.method = Quad2DConfig::Method::Polar;
  else if (method == "slices") q.method = Quad2DConfig::Method::Slices;
  else throw config_error("config: quad_method must be polar or slices");
  const auto limit = config::take<std::string>(sec, "outer_limit", "intercept");
  if (limit == "intercept") q.outer_limit = Quad2DConfig::OuterLimit::Intercept;
  else if (limit == "one_dim_optimum") q.outer_limit = Quad2DConfig::OuterLimit::OneDimOptimum;
  else throw config_error("config: outer_limit must be intercept or one_dim_optimum");
  if (rc.tol) sec["rel_tol"] = *rc.tol;
  q.rel_tol = config::take<double>(sec, "rel_tol", 1e-7);
  return q;
}

inline json report_json(const verify::IdentityReport& r) {
  return {{"lhs", r.lhs},     {"rhs", r.rhs},   {"lhs_se", r.lhs_se},         {"rhs_se", r.rhs_se},
          {"diff", r.diff()}, {"k_se", r.k_se}, {"combined_se", r.combined_se()}, {"pass", r.pass},
          {"seed", r.seed},   {"paths", r.paths}};
}

inline Result run_perpetual(json& root, const RunConfig& rc, Outputs& out) {
  const GbmParams p = config::params_from(root);
  if (p.dim() != 1) throw config_error("perpetual: d must be 1");
  json& sec = config::section(root, "perpetual");
  if (rc.tol) sec["agree_tol"] = *rc.tol;
  const double agree = config::take<double>(sec, "agree_tol", 1e-10);
  const int samples = config::take<int>(sec, "samples", 200);
  const double x_max = config::take<double>(sec, "x_max", 2.0 * p.K);
  const auto fracs = config::take<std::vector<double>>(sec, "candidate_thresholds", {0.25, 0.5, 0.9});
  if (samples < 2 || !(x_max > 0.0)) throw config_error("perpetual: need samples >= 2 and x_max > 0");
  for (double f : fracs)
    if (!(f > 0.0 && f < 1.0)) throw config_error("perpetual: candidate thresholds are fractions of K in (0, 1)");
  out.plan("perpetual.json");
  out.plan("perpetual.csv");

  const auto sol = perpetual::solve_perpetual(p, agree);
  Result res;
  res.body["x_star"] = sol.x_star;
  res.body["root_check"] = sol.root_check;
  res.body["theta"] = sol.theta;
  res.body["gamma"] = sol.gamma;
  res.body["value_at_x_star"] = sol.value(sol.x_star);
  json plateaus = json::array();
  for (double f : fracs) {
    const double xb = f * p.K;
    plateaus.push_back({{"threshold", xb},
                        {"candidate_at_threshold", candidate_value_1d(xb, xb, p)},
                        {"value_matching_defect", perpetual::value_matching_defect(xb, p)}});
  }
  res.body["candidates"] = plateaus;

  std::ostringstream csv;
  csv << "x,g,V";
  for (double f : fracs) csv << ",candidate_" << num(f);
  csv << '\n';
  for (int i = 1; i <= samples; ++i) {
    const double x = x_max * i / samples;
    csv << num(x) << ',' << num(std::max(p.K - x, 0.0)) << ',' << num(sol.value(x));
    for (double f : fracs) csv << ',' << num(candidate_value_1d(f * p.K, x, p));
    csv << '\n';
  }
  out.write("perpetual.csv", csv.str());
  return res;
}

inline Result run_invest2d(json& root, const RunConfig& rc, Outputs& out) {
  const GbmParams p = config::params_from(root);
  if (p.dim() != 2) throw config_error("invest2d: d must be 2");
  json& sec = config::section(root, "invest2d");
  invest2d::FitConfig cfg;
  cfg.collocation = config::take<int>(sec, "collocation", cfg.collocation);
  cfg.q_starts = config::take<std::vector<double>>(sec, "q_starts", cfg.q_starts);
  cfg.kappa_start = config::take<double>(sec, "kappa_start", cfg.kappa_start);
  cfg.restarts = config::take<int>(sec, "restarts", cfg.restarts);
  cfg.fix_q = config::take<bool>(sec, "fix_q", cfg.fix_q);
  cfg.fit_kappa = config::take<bool>(sec, "fit_kappa", cfg.fit_kappa);
  cfg.optimizer.max_evals = config::take<int>(sec, "max_evals", cfg.optimizer.max_evals);
  const auto sym = config::take<std::string>(sec, "symmetry", "auto");
  if (sym == "auto") cfg.symmetry = invest2d::FitConfig::Symmetry::Auto;
  else if (sym == "force") cfg.symmetry = invest2d::FitConfig::Symmetry::Force;
  else if (sym == "off") cfg.symmetry = invest2d::FitConfig::Symmetry::Off;
  else throw config_error("invest2d: symmetry must be auto, force or off");
  cfg.quad = quad_from(sec, rc);
  const auto factors = config::take<std::vector<double>>(sec, "gate_factors", {0.9, 1.1});
  const int samples = config::take<int>(sec, "boundary_samples", 101);
  const bool sensitivity = config::take<bool>(sec, "outer_limit_sensitivity", false);
  if (samples < 2) throw config_error("invest2d: boundary_samples must be >= 2");
  out.plan("invest2d.json");
  out.plan("invest2d_boundary.csv");
  out.plan("invest2d_residuals.csv");

  const auto fit = invest2d::fit_boundary(p, cfg);
  const auto& b = fit.boundary;
  const auto gate = invest2d::uniqueness_gate(b, factors, p, cfg.quad, cfg.collocation);
  Result res;
  res.body["boundary"] = {{"p1", b.p1}, {"p2", b.p2}, {"q", b.q}, {"kappa", b.kappa}};
  res.body["one_dim_thresholds"] = {invest2d::one_dim_threshold(p, 0), invest2d::one_dim_threshold(p, 1)};
  res.body["residual"] = {{"sup", fit.report.sup}, {"l2", fit.report.l2}};
  res.body["converged"] = fit.converged;
  res.body["symmetric"] = fit.symmetric;
  res.body["evaluations"] = fit.evaluations;
  json norms = json::array();
  for (double n : gate.norms) norms.push_back(std::isfinite(n) ? json(n) : json("inadmissible"));
  res.body["gate"] = {{"fitted_norm", gate.fitted_norm}, {"factors", gate.factors}, {"norms", norms},
                      {"pass", gate.pass}};
  if (sensitivity) {
    auto other = cfg.quad;
    other.outer_limit = other.outer_limit == Quad2DConfig::OuterLimit::Intercept
                            ? Quad2DConfig::OuterLimit::OneDimOptimum
                            : Quad2DConfig::OuterLimit::Intercept;
    const auto rep = invest2d::residual_report(b, p, cfg.collocation, invest2d::resolve_quad(p, other));
    res.body["outer_limit_sensitivity"] = {{"other_sup", rep.sup}, {"other_l2", rep.l2}};
  }

  std::ostringstream bcsv;
  bcsv << "x1,x2\n";
  for (int i = 0; i < samples; ++i) {
    const double x1 = b.p1 * i / (samples - 1);
    bcsv << num(x1) << ',' << num(b.gamma(x1)) << '\n';
  }
  std::ostringstream rcsv;
  rcsv << "x1,x2,residual,quad_error\n";
  for (const auto& pt : fit.report.points)
    rcsv << num(pt.x1) << ',' << num(pt.x2) << ',' << num(pt.residual) << ',' << num(pt.quad_error) << '\n';
  out.write("invest2d_boundary.csv", bcsv.str());
  out.write("invest2d_residuals.csv", rcsv.str());
  res.gate_ok = gate.pass;
  res.gate_message = "invest2d: uniqueness gate failed";
  return res;
}

inline PutParams put_from(json& root) {
  const GbmParams g = config::params_from(root);
  if (g.dim() != 1) throw config_error("amput: d must be 1");
  if (g.mu[0] != g.r) throw config_error("amput: the put is priced with drift r; set mu = [r]");
  json& sec = config::section(root, "amput");
  PutParams p{g.K, g.r, std::abs(g.a[0]), config::take<double>(sec, "T", 1.0)};
  try {
    p.validate();
  } catch (const domain_error& e) {
    throw config_error(std::string("amput: ") + e.what());
  }
  return p;
}

inline amput::GridConfig grid_from(json& root, const RunConfig& rc) {
  json& sec = config::section(root, "amput");
  amput::GridConfig g;
  if (rc.steps) sec["steps"] = *rc.steps;
  if (rc.tol) sec["tol"] = *rc.tol;
  g.steps = config::take<int>(sec, "steps", g.steps);
  g.tol = config::take<double>(sec, "tol", g.tol);
  const auto cl = config::take<std::string>(sec, "clustering", "uniform");
  if (cl == "uniform") g.clustering = amput::Clustering::Uniform;
  else if (cl == "sqrt") g.clustering = amput::Clustering::Sqrt;
  else throw config_error("amput: clustering must be uniform or sqrt");
  const auto rule = config::take<std::string>(sec, "rule", "trapezoid");
  if (rule == "trapezoid") g.rule = amput::TimeRule::Trapezoid;
  else if (rule == "gauss_sqrt") g.rule = amput::TimeRule::GaussSqrt;
  else throw config_error("amput: rule must be trapezoid or gauss_sqrt");
  if (g.steps < 50) throw config_error("amput: steps must be >= 50");
  return g;
}

inline Result run_amput(json& root, const RunConfig& rc, Outputs& out) {
  const PutParams p = put_from(root);
  const auto g = grid_from(root, rc);
  json& sec = config::section(root, "amput");
  const auto points = config::take<std::vector<std::vector<double>>>(sec, "value_at", {{0.0, p.K}});
  const int oracle_steps = config::take<int>(sec, "oracle_steps", 5000);
  const auto shifts = config::take<std::vector<double>>(sec, "gate_shifts", {-0.02, 0.02});
  const int gate_points = config::take<int>(sec, "gate_points", 10);
  const double gate_factor = config::take<double>(sec, "gate_factor", 5.0);
  for (const auto& pt : points)
    if (pt.size() != 2 || !(pt[0] >= 0.0 && pt[0] < p.T) || !(pt[1] > 0.0))
      throw config_error("amput: value_at entries are [s, x] with 0 <= s < T and x > 0");
  if (oracle_steps != 0 && oracle_steps < 100) throw config_error("amput: oracle_steps must be 0 or >= 100");
  out.plan("amput.json");
  out.plan("amput_boundary.csv");

  const auto b = amput::solve_boundary(p, g);
  Result res;
  res.body["b0"] = b.b.front();
  json values = json::array();
  for (const auto& pt : points) {
    const auto e = amput::eep_value(pt[0], pt[1], b, p, g.rule);
    values.push_back({{"s", pt[0]}, {"x", pt[1]}, {"total", e.total}, {"premium", e.premium}, {"european", e.european}});
  }
  res.body["value_at"] = values;
  if (oracle_steps > 0 && points.front()[0] == 0.0) {
    const auto orc = amput::binomial_oracle(p, oracle_steps, points.front()[1]);
    const double total = values.front()["total"].get<double>();
    res.body["oracle_value"] = orc.value;
    res.body["oracle_steps"] = oracle_steps;
    res.body["rel_err"] = std::abs(total - orc.value) / orc.value;
  }
  const auto shape = amput::check_boundary_shape(b, p.K);
  res.body["shape"] = {{"terminal_at_strike", shape.terminal_at_strike},
                       {"nondecreasing", shape.nondecreasing},
                       {"below_strike", shape.below_strike},
                       {"min_second_difference", shape.min_second_difference},
                       {"convex", shape.convex}};
  const auto gate = amput::boundary_uniqueness_gate(b, p, shifts, gate_points, gate_factor, g.rule);
  res.body["gate"] = {{"solved_max", gate.solved_max}, {"shifts", gate.shifts},
                      {"shifted_max", gate.shifted_max}, {"min_factor", gate.min_factor}, {"pass", gate.pass}};

  std::ostringstream csv;
  csv << "t,b\n";
  for (std::size_t i = 0; i < b.t.size(); ++i) csv << num(b.t[i]) << ',' << num(b.b[i]) << '\n';
  out.write("amput_boundary.csv", csv.str());
  res.gate_ok = gate.pass && shape.terminal_at_strike && shape.nondecreasing && shape.below_strike;
  res.gate_message = "amput: boundary gate or shape check failed";
  return res;
}

inline Result run_verify(json& root, const RunConfig& rc, Outputs& out) {
  json& sec = config::section(root, "verify");
  verify::McConfig mc;
  if (rc.paths) sec["paths"] = *rc.paths;
  mc.paths = config::take<int>(sec, "paths", 100000);
  mc.dt = config::take<double>(sec, "dt", mc.dt);
  mc.k_se = config::take<double>(sec, "k_se", mc.k_se);
  mc.blocks = config::take<int>(sec, "blocks", mc.blocks);
  mc.seed = rc.seed;
  if (mc.paths < 1 || !(mc.dt > 0.0) || mc.blocks < 1) throw config_error("verify: need paths >= 1, dt > 0, blocks >= 1");
  const auto identity = config::take<std::string>(sec, "identity", "duality");
  out.plan("verify.json");

  Result res;
  res.body["identity"] = identity;
  if (identity == "duality") {
    const GbmParams p = config::params_from(root);
    const auto r = verify::check_duality(p, config::box_from(config::child(sec, "box_a")), config::box_from(config::child(sec, "box_b")), mc);
    res.body["report"] = report_json(r);
    res.gate_ok = r.pass;
  } else if (identity == "dynkin") {
    const GbmParams p = config::params_from(root);
    verify::DynkinOptions opt;
    opt.grid = config::take<int>(sec, "grid", opt.grid);
    const auto set = config::candidate_from(config::child(sec, "set"));
    const auto x = config::need<std::vector<double>>(sec, "start");
    const auto r = verify::check_dynkin(set, x, config::box_from(config::child(sec, "box")), p, mc, opt);
    res.body["report"] = report_json(r);
    res.gate_ok = r.pass;
  } else if (identity == "policy") {
    const GbmParams p = config::params_from(root);
    const auto x = config::need<std::vector<double>>(sec, "start");
    const double target_se = config::take<double>(sec, "target_se", 1e-3 * p.K);
    if (x.size() != static_cast<std::size_t>(p.dim())) throw config_error("verify: start has wrong dimension");
    const auto rule_kind = config::take<std::string>(sec, "rule", "set");
    verify::Estimate est;
    double reference = 0.0;
    if (rule_kind == "amput") {
      const PutParams pp = put_from(root);
      const auto b = amput::solve_boundary(pp, grid_from(root, rc));
      est = verify::policy_value_mc(b, x, p, mc, target_se);
      reference = amput::eep_value(0.0, x[0], b, pp).total;
    } else if (rule_kind == "set") {
      const auto set = config::candidate_from(config::child(sec, "set"));
      est = verify::policy_value_mc(set, x, p, mc, target_se);
      if (set.kind == CandidateSet::Kind::Threshold) reference = candidate_value_1d(set.threshold, x[0], p);
      else reference = candidate_value_2d(set, x, p).value;
      if (set.contains(x)) reference = std::max(p.K - x[0] - (x.size() > 1 ? x[1] : 0.0), 0.0);
    } else {
      throw config_error("verify: rule must be set or amput");
    }
    const bool agrees = std::abs(est.value - reference) <= mc.k_se * est.se + 1e-12 * p.K;
    res.body["estimate"] = {{"value", est.value}, {"se", est.se}, {"seed", est.seed}, {"paths", est.paths}};
    res.body["riesz_candidate"] = reference;
    res.body["agrees"] = agrees;
  } else if (identity == "spacetime_dynkin") {
    const PutParams pp = put_from(root);
    const auto b = amput::solve_boundary(pp, grid_from(root, rc));
    const double u = config::take<double>(sec, "u", 0.0);
    const double x = config::take<double>(sec, "x", pp.K);
    const double level = config::take<double>(sec, "level", 0.85 * pp.K);
    const auto r = verify::check_spacetime_dynkin(b, u, x, level, pp, mc);
    res.body["report"] = report_json(r);
    res.gate_ok = r.pass;
  } else {
    throw config_error("verify: identity must be duality, dynkin, policy or spacetime_dynkin");
  }
  res.gate_message = "verify: identity not confirmed within the SE band";
  return res;
}

inline void dump_paths(json& root, const RunConfig& rc, Outputs& out) {
  const GbmParams p = config::params_from(root);
  json& sec = config::section(root, "paths");
  const auto x0 = config::need<std::vector<double>>(sec, "x0");
  const double horizon = config::take<double>(sec, "horizon", 1.0);
  const int points = config::take<int>(sec, "points", 101);
  sec["n"] = rc.dump_paths;
  if (static_cast<int>(x0.size()) != p.dim() || !(horizon > 0.0) || points < 2)
    throw config_error("paths: need x0 of length d, horizon > 0, points >= 2");
  std::vector<double> grid(points);
  for (int k = 0; k < points; ++k) grid[k] = horizon * k / (points - 1);
  const auto arr = sample_paths(p, x0, grid, rc.dump_paths, rc.seed);
  std::ostringstream os;
  arr.write_csv(os);
  out.write("paths.csv", os.str());
}

inline void emit_error(std::ostream& err, const char* type, const std::string& msg, int code) {
  json j;
  j["error"] = {{"type", type}, {"message", msg}, {"exit_code", code}};
  err << j.dump() << '\n';
}

}  // namespace detail

/// Runs one subcommand; returns the process exit code. Results go to files in
/// --out; errors are reported as one JSON object on `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Optimal stopping boundaries for geometric Brownian motion"};
  app.require_subcommand(1, 1);
  RunConfig rc;
  std::uint64_t seed = rc.seed;
  int steps = 0, paths = 0;
  double tol = 0.0;
  const std::vector<std::pair<const char*, const char*>> subs{
      {"perpetual", "one-dimensional perpetual threshold and candidate family"},
      {"invest2d", "two-dimensional investment boundary fit"},
      {"amput", "American put exercise boundary and value"},
      {"verify", "Monte Carlo checks of duality, Dynkin and policy identities"}};
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", rc.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    s->add_option("--out", rc.out_dir, "output directory");
    s->add_option("--seed", seed, "random seed");
    s->add_option("--steps", steps, "time steps (amput)");
    s->add_option("--paths", paths, "Monte Carlo paths (verify)");
    s->add_option("--tol", tol, "solver / quadrature tolerance");
    s->add_flag("--force", rc.force, "overwrite existing outputs");
    s->add_option("--dump-paths", rc.dump_paths, "also write N simulated paths to paths.csv");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    detail::emit_error(err, "usage", e.what(), kConfig);
    return kConfig;
  }
  for (auto* s : app.get_subcommands()) rc.subcommand = s->get_name();
  rc.seed = seed;
  for (auto* s : app.get_subcommands()) {
    if (s->count("--steps")) rc.steps = steps;
    if (s->count("--paths")) rc.paths = paths;
    if (s->count("--tol")) rc.tol = tol;
  }

  try {
    json root = config::load_file(rc.config_path);
    if (!root.is_object()) throw config_error("config: top level must be an object");
    detail::Outputs outputs(rc.out_dir, rc.force);
    if (rc.dump_paths < 0) throw config_error("--dump-paths must be >= 0");
    if (rc.dump_paths > 0) outputs.plan("paths.csv");

    detail::Result res;
    if (rc.subcommand == "perpetual") res = detail::run_perpetual(root, rc, outputs);
    else if (rc.subcommand == "invest2d") res = detail::run_invest2d(root, rc, outputs);
    else if (rc.subcommand == "amput") res = detail::run_amput(root, rc, outputs);
    else res = detail::run_verify(root, rc, outputs);
    if (rc.dump_paths > 0) detail::dump_paths(root, rc, outputs);

    json doc;
    doc["subcommand"] = rc.subcommand;
    doc["seed"] = rc.seed;
    doc["config"] = root;
    doc["flags"] = {{"steps", rc.steps ? json(*rc.steps) : json()},
                    {"paths", rc.paths ? json(*rc.paths) : json()},
                    {"tol", rc.tol ? json(*rc.tol) : json()},
                    {"dump_paths", rc.dump_paths}};
    doc["result"] = res.body;
    doc["gate_pass"] = res.gate_ok;
    outputs.write(rc.subcommand + ".json", doc.dump(2) + "\n");
    out << outputs.path(rc.subcommand + ".json").string() << '\n';
    if (!res.gate_ok) {
      detail::emit_error(err, "gate_failure", res.gate_message, kGate);
      return kGate;
    }
    return kOk;
  } catch (const config_error& e) {
    detail::emit_error(err, "config_error", e.what(), kConfig);
    return kConfig;
  } catch (const domain_error& e) {
    detail::emit_error(err, "domain_error", e.what(), kConfig);
    return kConfig;
  } catch (const solver_error& e) {
    detail::emit_error(err, "solver_error", e.what(), kSolver);
    return kSolver;
  } catch (const gate_failure& e) {
    detail::emit_error(err, "gate_failure", e.what(), kGate);
    return kGate;
  } catch (const std::exception& e) {
    detail::emit_error(err, "internal_error", e.what(), kInternal);
    return kInternal;
  }
}

}  // namespace rieszstop::cli
