// pidsteer: configure a contrastive plant and a steering controller, run
// closed-loop simulations or ensembles, and emit trace/certificate files.
//
// Exit codes: 0 ok, 2 config error, 3 divergence, 4 certificate failed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pidsteer/analysis.hpp"
#include "pidsteer/experiments.hpp"
#include "pidsteer/oracle.hpp"
#include "pidsteer/plant.hpp"
#include "pidsteer/serialize.hpp"
#include "pidsteer/steering.hpp"

namespace fs = std::filesystem;
using namespace pidsteer;

namespace {

constexpr const char* kCsvSchemaComment = "# pidsteer-csv v1";

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct RunConfig {
  ContrastivePlant plant;
  Gains gains;
  SteerFn steer;
  long steps = 0;  // 0: use plant layer count
  std::uint64_t seed = 0;
  long ensemble = 1;
  json raw;  // full document for mode-specific sections
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

ContrastivePlant plant_from_config(const json& jp, std::uint64_t seed) {
  if (jp.contains("file"))
    return plant_from_json(load_json(jp.at("file").get<std::string>()));
  if (jp.contains("random")) {
    const json& r = jp.at("random");
    RandomPlantConfig cfg;
    cfg.dim = r.value("dim", 4);
    cfg.pairs = r.value("pairs", 4);
    cfg.layers = r.value("layers", 32);
    cfg.kind = layer_kind_from_name(r.value("kind", std::string("linear")));
    cfg.jacobian_norm_cap = r.value("jacobian_norm_cap", 0.9);
    cfg.heterogeneity = r.value("heterogeneity", 0.1);
    cfg.seed = r.value("seed", seed);
    cfg.time_invariant = r.value("time_invariant", false);
    cfg.initial_separation = r.value("initial_separation", 1.0);
    return make_random_plant(cfg);
  }
  return plant_from_json(jp);
}

RunConfig parse_config(const std::string& path,
                       std::optional<std::uint64_t> seed_override,
                       std::optional<long> steps_override) {
  json doc = load_json(path);
  RunConfig cfg;
  cfg.raw = doc;
  const json run = doc.value("run", json::object());
  cfg.seed = run.value("seed", 0ull);
  if (seed_override) cfg.seed = *seed_override;
  cfg.steps = run.value("steps", 0l);
  if (steps_override) cfg.steps = *steps_override;
  cfg.ensemble = run.value("ensemble", 1l);
  if (cfg.ensemble < 1) throw InvalidInputError("run.ensemble must be >= 1");
  if (!doc.contains("plant")) throw InvalidInputError("config: missing plant");
  cfg.plant = plant_from_config(doc.at("plant"), cfg.seed);
  cfg.gains = gains_from_json(doc.value("gains", json::object()));
  cfg.steer = steer_from_json(doc.value("steer", json::object()));
  if (cfg.steps <= 0) cfg.steps = cfg.plant.layer_count();
  if (cfg.steps > cfg.plant.layer_count())
    throw InvalidInputError("run.steps exceeds plant layer count");
  return cfg;
}

void write_file(const fs::path& path, const std::string& body) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".")
                                                    : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot write: " + path.string());
  out << body;
}

std::string trace_csv(const Trace& trace, const ScalarTrace& sc) {
  std::ostringstream os;
  os << kCsvSchemaComment << "\n"
     << "k,e_bar_norm,e_v,s_v,u_norm,w_norm,inner_e0\n";
  const Vec e0 = trace.steps.front().e_bar;
  for (size_t k = 0; k < trace.steps.size(); ++k) {
    const TraceStep& st = trace.steps[k];
    os << st.k << ',' << fmt(st.e_bar.norm()) << ',' << fmt(sc.e_v[k]) << ','
       << fmt(sc.s_v[k]) << ',' << fmt(st.u.norm()) << ','
       << fmt(st.w.norm()) << ',' << fmt(e0.dot(st.e_bar)) << '\n';
  }
  return os.str();
}

/// Closed-loop run on the exact plant, truncated to cfg.steps layers.
Trace run_closed_loop(const RunConfig& cfg) {
  ContrastivePlant plant = cfg.plant;
  plant.layers.resize(cfg.steps);
  return steering_vectors_sequential(plant,
                                     ControllerState(cfg.gains, plant.dim),
                                     cfg.steer)
      .second;
}

json summarize(const RunConfig& cfg, const Trace& trace,
               const ScalarTrace& sc) {
  experiments::MeasuredBounds mb = experiments::measure_bounds(trace);
  StabilityCertificate cert =
      analysis::certify_pi(mb.m_bound, mb.q, cfg.gains.ki);
  OvershootReport rep = analysis::detect_overshoots(sc);
  json j;
  j["steady_state"] = trace.final_error.norm();
  j["overshoot"] = to_json(rep);
  j["certificate"] = to_json(cert);
  j["measured"] = {{"m_bound", mb.m_bound},
                   {"q", mb.q},
                   {"w_inf", mb.w_inf},
                   {"min_jacobian_projection", sc.min_jacobian_projection}};
  return j;
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir) {
  std::vector<std::string> csvs(cfg.ensemble);
  std::vector<json> summaries(cfg.ensemble);
  std::exception_ptr first_error;
  std::mutex err_mu;
  experiments::parallel_for(cfg.ensemble, [&](long i) {
    try {
      RunConfig member = cfg;
      if (cfg.ensemble > 1) {
        member.seed = cfg.seed + static_cast<std::uint64_t>(i);
        member.plant = plant_from_config(cfg.raw.at("plant"), member.seed);
      }
      Trace trace = run_closed_loop(member);
      ScalarTrace sc = analysis::scalarize(trace);
      csvs[i] = trace_csv(trace, sc);
      summaries[i] = summarize(member, trace, sc);
      summaries[i]["seed"] = member.seed;
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);
  if (cfg.ensemble == 1) {
    write_file(out_dir / "trace.csv", csvs[0]);
    write_file(out_dir / "summary.json", summaries[0].dump(2) + "\n");
  } else {
    json all = json::array();
    for (long i = 0; i < cfg.ensemble; ++i) {
      write_file(out_dir / ("trace_" + std::to_string(cfg.seed + i) + ".csv"),
                 csvs[i]);
      all.push_back(summaries[i]);
    }
    write_file(out_dir / "summary.json", all.dump(2) + "\n");
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg, const fs::path& out_dir) {
  const json grid = cfg.raw.value("run", json::object())
                        .value("grid", json::object());
  auto axis = [&](const char* key, double fallback) {
    std::vector<double> vals;
    if (grid.contains(key))
      for (const auto& v : grid.at(key)) vals.push_back(v.get<double>());
    if (vals.empty()) vals.push_back(fallback);
    return vals;
  };
  const auto kps = axis("kp", cfg.gains.kp);
  const auto kis = axis("ki", cfg.gains.ki);
  const auto kds = axis("kd", cfg.gains.kd);

  struct Row {
    Gains g;
    long conv_step = -1;
    double a0 = 0;
    double q = 0, rho = 1;
    bool iss = false;
  };
  std::vector<Row> rows;
  for (double kp : kps)
    for (double ki : kis)
      for (double kd : kds) rows.push_back({Gains(kp, ki, kd)});

  std::exception_ptr first_error;
  std::mutex err_mu;
  experiments::parallel_for(static_cast<long>(rows.size()), [&](long i) {
    try {
      RunConfig member = cfg;
      member.gains = rows[i].g;
      Trace trace = run_closed_loop(member);
      ScalarTrace sc = analysis::scalarize(trace);
      experiments::MeasuredBounds mb = experiments::measure_bounds(trace);
      StabilityCertificate cert =
          analysis::certify_pi(mb.m_bound, mb.q, member.gains.ki);
      for (size_t k = 0; k < trace.steps.size(); ++k)
        if (trace.steps[k].e_bar.norm() < 1e-6) {
          rows[i].conv_step = static_cast<long>(k);
          break;
        }
      if (rows[i].conv_step < 0 && trace.final_error.norm() < 1e-6)
        rows[i].conv_step = static_cast<long>(trace.steps.size());
      OvershootReport rep = analysis::detect_overshoots(sc);
      rows[i].a0 = rep.first ? rep.first->a0 : 0.0;
      rows[i].q = cert.q;
      rows[i].rho = cert.iss ? cert.rho : 1.0;
      rows[i].iss = cert.iss;
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  std::ostringstream os;
  os << kCsvSchemaComment << "\n"
     << "kp,ki,kd,conv_step,a0,q,rho,iss\n";
  for (const Row& r : rows)
    os << fmt(r.g.kp) << ',' << fmt(r.g.ki) << ',' << fmt(r.g.kd) << ','
       << r.conv_step << ',' << fmt(r.a0) << ',' << fmt(r.q) << ','
       << fmt(r.rho) << ',' << (r.iss ? 1 : 0) << '\n';
  write_file(out_dir / "sweep.csv", os.str());
  return 0;
}

int cmd_certify(const RunConfig& cfg, const fs::path& out_dir) {
  Trace trace = run_closed_loop(cfg);
  experiments::MeasuredBounds mb = experiments::measure_bounds(trace);
  StabilityCertificate cert =
      analysis::certify_pi(mb.m_bound, mb.q, cfg.gains.ki);
  cert.ell = cfg.gains.kd;
  json out;
  out["stability"] = to_json(cert);
  bool pid_ok = true;
  if (cfg.gains.kd > 0 || cfg.raw.value("run", json::object())
                              .value("lyapunov", false)) {
    // Lyapunov route needs one frozen linear model; use the first step's
    // mean Jacobian (exact for time-invariant plants).
    try {
      LyapunovCertificate lc =
          analysis::certify_pid_lti(trace.steps.front().a_bar, cfg.gains);
      lc.valid = lc.valid &&
                 cfg.gains.kd * cfg.gains.kd < lc.admissible_ell_sq;
      out["lyapunov"] = to_json(lc);
      pid_ok = lc.valid;
    } catch (const Error& e) {
      out["lyapunov"] = {{"valid", false}, {"error", e.what()}};
      pid_ok = false;
    }
  }
  const std::string body = out.dump(2) + "\n";
  write_file(out_dir / "certificate.json", body);
  std::cout << body;
  return (cert.iss && pid_ok) ? 0 : 4;
}

int cmd_overshoot_report(const RunConfig& cfg, const fs::path& out_dir) {
  Trace trace = run_closed_loop(cfg);
  ScalarTrace sc = analysis::scalarize(trace);
  OvershootReport rep = analysis::detect_overshoots(sc);
  experiments::MeasuredBounds mb = experiments::measure_bounds(trace);
  StabilityCertificate cert =
      analysis::certify_pi(mb.m_bound, mb.q, cfg.gains.ki);
  json out = to_json(rep);
  out["min_jacobian_projection"] = sc.min_jacobian_projection;
  if (rep.first && cert.iss && !sc.e_v.empty() && sc.e_v[0] >= 0) {
    double d_inf = 0, w_inf = 0;
    for (double d : sc.d_v) d_inf = std::max(d_inf, std::abs(d));
    for (double w : sc.w_v_perp) w_inf = std::max(w_inf, std::abs(w));
    out["a0_bound"] = analysis::first_overshoot_bound(
        cert, sc.e_v[0], rep.first->t0, d_inf, w_inf);
  }
  const std::string body = out.dump(2) + "\n";
  write_file(out_dir / "overshoot.json", body);
  std::cout << body;
  return 0;
}

int cmd_figure(const RunConfig& cfg, const fs::path& out_dir) {
  const json fig = cfg.raw.value("run", json::object())
                       .value("figure", json::object());
  const Gains gp =
      gains_from_json(fig.value("p", json{{"kp", 0.5}}));
  const Gains gpi =
      gains_from_json(fig.value("pi", json{{"kp", 0.5}, {"ki", 0.05}}));
  const Gains gpid = gains_from_json(
      fig.value("pid", json{{"kp", 0.5}, {"ki", 0.05}, {"kd", 0.1}}));
  ContrastivePlant plant = cfg.plant;
  plant.layers.resize(cfg.steps);
  experiments::FigureData data =
      experiments::run_figure(plant, gp, gpi, gpid, cfg.steer);
  std::ostringstream os;
  os << kCsvSchemaComment << "\n"
     << "k,energy_p,energy_pi,energy_pid\n";
  for (size_t k = 0; k < data.energy_p.size(); ++k)
    os << k << ',' << fmt(data.energy_p[k]) << ',' << fmt(data.energy_pi[k])
       << ',' << fmt(data.energy_pid[k]) << '\n';
  write_file(out_dir / "figure.csv", os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"controller-based activation steering: simulate and certify"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  for (const char* name :
       {"simulate", "sweep", "certify", "overshoot-report", "figure"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--steps", steps, "step-count override");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string mode = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg = parse_config(config_path, seed, steps);
    const fs::path out(out_dir);
    if (mode == "simulate") return cmd_simulate(cfg, out);
    if (mode == "sweep") return cmd_sweep(cfg, out);
    if (mode == "certify") return cmd_certify(cfg, out);
    if (mode == "overshoot-report") return cmd_overshoot_report(cfg, out);
    if (mode == "figure") return cmd_figure(cfg, out);
    std::cerr << "unknown mode: " << mode << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
}
