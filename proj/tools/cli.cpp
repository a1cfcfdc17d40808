#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hubfield/hubfield.hpp"

namespace hubfield::cli {
namespace {

using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : detail::split(s, ',')) {
    double v = 0;
    if (!detail::parse_double(part, v)) throw UsageError("--" + what + ": bad number '" + part + "'");
    out.push_back(v);
  }
  return out;
}

/// "start:stop:step" inclusive of stop (within half a step).
std::vector<double> parse_range(const std::string& s, const std::string& what) {
  const auto parts = detail::split(s, ':');
  double a = 0, b = 0, step = 0;
  if (parts.size() != 3 || !detail::parse_double(parts[0], a) || !detail::parse_double(parts[1], b) ||
      !detail::parse_double(parts[2], step) || !(step > 0) || !(b >= a))
    throw UsageError("--" + what + " expects start:stop:step with step > 0");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((b - a) / step + 0.5));
  for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

/// Options of one subcommand. Values resolve as: explicit flag, then the
/// --config JSON, then the built-in default. Every resolved value is
/// recorded for the run manifest.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config; explicit flags override it");
  }

  void num(const std::string& name, const std::string& help) {
    opts_[name] = app_->add_option("--" + name, nums_[name], help);
  }
  void str(const std::string& name, const std::string& help) {
    opts_[name] = app_->add_option("--" + name, strs_[name], help);
  }

  void load() {
    if (config_path_.empty()) return;
    auto j = detail::read_json_file(config_path_);
    if (j.is_object() && j.contains("config") && j["config"].is_object()) j = j["config"];
    if (!j.is_object()) throw ParseError(config_path_ + ": config must be a JSON object");
    config_ = std::move(j);
  }

  bool given(const std::string& name) const {
    const auto it = opts_.find(name);
    return (it != opts_.end() && it->second->count() > 0) || config_.contains(name);
  }

  double number(const std::string& name, std::optional<double> fallback = std::nullopt) {
    double v = 0;
    if (opts_.at(name)->count() > 0) {
      v = nums_.at(name);
    } else if (config_.contains(name)) {
      if (!config_[name].is_number()) throw ParseError(config_path_ + ": '" + name + "' must be a number");
      v = config_[name].get<double>();
    } else if (fallback) {
      v = *fallback;
    } else {
      throw UsageError("missing required option --" + name);
    }
    resolved[name] = v;
    return v;
  }

  int integer(const std::string& name, std::optional<int> fallback = std::nullopt) {
    const double v = number(name, fallback ? std::optional<double>(*fallback) : std::nullopt);
    if (v != std::floor(v)) throw UsageError("--" + name + " must be an integer");
    resolved[name] = static_cast<long>(v);
    return static_cast<int>(v);
  }

  std::string string(const std::string& name, std::optional<std::string> fallback = std::nullopt) {
    std::string v;
    if (opts_.at(name)->count() > 0) {
      v = strs_.at(name);
    } else if (config_.contains(name)) {
      if (!config_[name].is_string()) throw ParseError(config_path_ + ": '" + name + "' must be a string");
      v = config_[name].get<std::string>();
    } else if (fallback) {
      v = *fallback;
    } else {
      throw UsageError("missing required option --" + name);
    }
    resolved[name] = v;
    return v;
  }

  json resolved = json::object();

 private:
  CLI::App* app_;
  std::string config_path_;
  json config_ = json::object();
  std::map<std::string, double> nums_;
  std::map<std::string, std::string> strs_;
  std::map<std::string, CLI::Option*> opts_;
};

class Manifest {
 public:
  explicit Manifest(std::string subcommand)
      : subcommand_(std::move(subcommand)), start_(std::chrono::steady_clock::now()) {}

  void output(const std::string& path) { outputs_.push_back(path); }
  json convergence = json::object();

  /// Writes <primary>.manifest.json next to the primary output.
  void write(const std::string& primary, const Flags& flags) const {
    json j;
    j["subcommand"] = subcommand_;
    j["config"] = flags.resolved;
    j["outputs"] = outputs_;
    j["convergence"] = convergence;
    j["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string path = primary + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    out << j.dump(2) << '\n';
  }

 private:
  std::string subcommand_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> outputs_;
};

void add_grid_flags(Flags& f) {
  f.str("bounds", "grid bounds a1,b1[,a2,b2] (peak-model or demand inputs)");
  f.str("n", "cells per axis n1[,n2]");
  f.str("polygon", "polygon mask JSON for 2D grids");
}

Grid grid_from_flags(Flags& f) {
  const auto b = parse_list(f.string("bounds"), "bounds");
  const auto nn = parse_list(f.string("n"), "n");
  std::vector<std::size_t> n;
  for (double v : nn) {
    if (!(v >= 2) || v != std::floor(v)) throw UsageError("--n entries must be integers >= 2");
    n.push_back(static_cast<std::size_t>(v));
  }
  Grid g;
  if (b.size() == 2 && n.size() == 1) {
    g = Grid::line(b[0], b[1], n[0]);
  } else if (b.size() == 4 && n.size() == 2) {
    g = Grid::rect(b[0], b[1], n[0], b[2], b[3], n[1]);
  } else {
    throw UsageError("--bounds/--n must describe a 1D or 2D grid");
  }
  if (f.given("polygon")) {
    const auto poly = read_polygon_json(f.string("polygon"));
    g = g.with_polygon_mask(poly);
  }
  return g;
}

/// --rho accepts a density CSV or a peak-model JSON sampled on --bounds/--n.
DensityField load_rho(Flags& f) {
  const std::string path = f.string("rho");
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    const auto peaks = read_peaks_json(path);
    return gaussian_sum_density(peaks, grid_from_flags(f));
  }
  return read_density_csv(path);
}

RoutingKernel kernel_from_flags(Flags& f) {
  return RoutingKernel(f.number("K", 1.0), f.number("q", 2.0));
}

void add_solver_flags(Flags& f) {
  f.str("rho", "density CSV or peak-model JSON");
  add_grid_flags(f);
  f.num("eps", "coupling eps > 0");
  f.num("p", "location exponent");
  f.num("d", "dimension (defaults to the grid's)");
  f.num("q", "routing exponent");
  f.num("K", "routing coefficient");
  f.str("mode", "iteration: derived | paper");
  f.str("mult", "multiplier: renorm | bisect");
  f.num("tol", "relative sup-norm stop threshold");
  f.num("max-iter", "iteration cap");
  f.num("damping", "relaxation in (0,1]");
}

SolverConfig solver_config(Flags& f, const DensityField& rho, const std::string& default_mult) {
  SolverConfig cfg;
  cfg.eps = f.number("eps", 1e-2);
  cfg.p = f.number("p", 1.0);
  cfg.d = f.integer("d", rho.grid().dim());
  cfg.kernel = kernel_from_flags(f);
  const auto mode = f.string("mode", "derived");
  if (mode == "derived") cfg.iteration = IterationMode::derived;
  else if (mode == "paper") cfg.iteration = IterationMode::paper_literal;
  else throw UsageError("--mode must be derived or paper");
  const auto mult = f.string("mult", default_mult);
  if (mult == "renorm") cfg.multiplier = MultiplierMode::renormalize;
  else if (mult == "bisect") cfg.multiplier = MultiplierMode::bisect;
  else throw UsageError("--mult must be renorm or bisect");
  cfg.tol = f.number("tol", 0.02);
  cfg.max_iter = f.integer("max-iter", 200);
  cfg.damping = f.number("damping", 1.0);
  cfg.validate();
  if (cfg.d != rho.grid().dim()) throw UsageError("--d does not match the density's grid");
  return cfg;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  return out;
}

// Subcommands -----------------------------------------------------------------

int cmd_solve(Flags& f, std::ostream& out, std::ostream& err) {
  Manifest man("solve");
  const auto rho = normalize(load_rho(f));
  const auto cfg = solver_config(f, rho, "renorm");
  const auto out_path = f.string("out");
  const auto log_path = f.string("log", "");
  const auto res = fixed_point_solve(rho, cfg);
  for (const auto& w : res.warnings) err << "warning: " << w << '\n';
  if (!res.converged) err << "warning: no convergence after " << res.iterations << " iterations\n";

  write_density_csv(res.mu, out_path);
  man.output(out_path);
  if (!log_path.empty()) {
    auto log = open_output(log_path);
    write_iteration_log(res, log);
    man.output(log_path);
  }
  const Point peak = res.mu.grid().center(res.mu.argmax());
  man.convergence = {{"converged", res.converged},  {"iterations", res.iterations},
                     {"final_change", res.final_change}, {"F", res.total_cost()},
                     {"location", res.cost_location}, {"routing", res.cost_routing},
                     {"multiplier", res.multiplier},  {"argmax", {peak[0], peak[1]}}};
  man.write(out_path, f);
  out << "iterations " << res.iterations << (res.converged ? " (converged)" : " (not converged)")
      << "\nF " << fmt(res.total_cost(), "%.10g") << "\nargmax " << fmt(peak[0], "%.6g");
  if (rho.grid().dim() == 2) out << ' ' << fmt(peak[1], "%.6g");
  out << '\n';
  return 0;
}

int cmd_hub(Flags& f, std::ostream& out, std::ostream&) {
  Manifest man("hub");
  const auto rho = load_rho(f);
  const double p = f.number("p", 1.0);
  const int d = f.integer("d", rho.grid().dim());
  const double q = f.number("q", 2.0);
  if (d != rho.grid().dim()) throw UsageError("--d does not match the density's grid");
  const auto out_path = f.string("out");
  const auto json_path = f.string("json", out_path + ".hub.json");
  const auto res = find_main_hub(rho, p, d, q);
  write_density_csv(res.scan, out_path);
  json hub;
  hub["x0"] = d == 1 ? json::array({res.x0[0]}) : json::array({res.x0[0], res.x0[1]});
  hub["value"] = res.value;
  hub["A"] = hub_constant_A(p, d);
  hub["refined"] = res.refined;
  open_output(json_path) << hub.dump(2) << '\n';
  man.output(out_path);
  man.output(json_path);
  man.convergence = hub;
  man.write(out_path, f);
  out << "x0 " << fmt(res.x0[0], "%.8g");
  if (d == 2) out << ' ' << fmt(res.x0[1], "%.8g");
  out << "\nvalue " << fmt(res.value, "%.8g") << '\n';
  return 0;
}

int cmd_masscoupled(Flags& f, std::ostream& out, std::ostream& err) {
  Manifest man("masscoupled1d");
  const auto rho = load_rho(f);
  MassCoupledConfig cfg;
  cfg.A = f.number("A", 1.0);
  cfg.B = f.number("B", 0.25);
  cfg.p = f.number("p", 2.0);
  cfg.kernel = kernel_from_flags(f);
  cfg.tol = f.number("tol", 0.02);
  cfg.max_iter = f.integer("max-iter", 200);
  cfg.damping = f.number("damping", 1.0);
  cfg.validate();
  const auto out_path = f.string("out");
  const auto nu_path = f.string("nu-out", "");
  const auto res = mass_coupled_solve(rho, cfg);
  if (!res.converged) err << "warning: no convergence after " << res.iterations << " iterations\n";

  // Rows follow nu's grid, which contains rho's cells; T is blank outside
  // the original domain.
  auto csv = open_output(out_path);
  csv << "x,T,nu\n";
  const Grid& ng = res.nu.grid();
  const Grid& rg = rho.grid();
  for (std::size_t k = 0; k < ng.size(); ++k) {
    const double x = ng.center(k)[0];
    csv << fmt(x) << ',';
    if (x > rg.lo(0) && x < rg.hi(0)) csv << fmt(res.T.T[rg.locate({x, 0.0})]);
    csv << ',' << fmt(res.nu[k]) << '\n';
  }
  csv.close();
  man.output(out_path);
  if (!nu_path.empty()) {
    write_density_csv(res.nu, nu_path);
    man.output(nu_path);
  }
  const double cost = total_cost_mass(rho, res.nu, cfg);
  const double residual = optimality_residual(res.nu, res.T, cfg);
  man.convergence = {{"converged", res.converged}, {"iterations", res.iterations},
                     {"final_change", res.final_change}, {"total_cost", cost},
                     {"mass_rho", integrate(rho)}, {"mass_nu", integrate(res.nu)},
                     {"optimality_residual", residual}};
  man.write(out_path, f);
  out << "iterations " << res.iterations << (res.converged ? " (converged)" : " (not converged)")
      << "\ncost " << fmt(cost, "%.10g") << "\nresidual " << fmt(residual, "%.3g") << '\n';
  return 0;
}

int cmd_hexconst(Flags& f, std::ostream& out, std::ostream&) {
  const bool sweep = f.given("sweep");
  const bool single = f.given("p");
  if (sweep == single) throw UsageError("hexconst needs exactly one of --p or --sweep");
  if (single) {
    out << fmt(hexagon_constant(f.number("p")), "%.10g") << '\n';
    return 0;
  }
  const auto ps = parse_range(f.string("sweep"), "sweep");
  std::ostringstream csv;
  csv << "p,C\n";
  for (double p : ps) csv << fmt(p, "%.10g") << ',' << fmt(hexagon_constant(p)) << '\n';
  if (f.given("out")) {
    Manifest man("hexconst");
    const auto path = f.string("out");
    open_output(path) << csv.str();
    man.output(path);
    man.write(path, f);
  } else {
    out << csv.str();
  }
  return 0;
}

int cmd_scaling(Flags& f, std::ostream& out, std::ostream&) {
  Manifest man("scaling");
  const auto rho = normalize(load_rho(f));
  const auto cfg = solver_config(f, rho, "bisect");
  std::vector<double> eps;
  if (f.given("eps-list")) {
    eps = parse_list(f.string("eps-list"), "eps-list");
  } else {
    std::string joined;
    for (int i = 0; i < 5; ++i) {
      eps.push_back(std::pow(10.0, -1.0 - 0.5 * i));
      joined += (i ? "," : "") + fmt(eps.back());
    }
    f.resolved["eps-list"] = joined;
  }
  const auto res = scaling_probe(rho, cfg, eps);
  const auto out_path = f.string("out", "");
  if (!out_path.empty()) {
    auto csv = open_output(out_path);
    csv << "eps,F,iterations\n";
    for (std::size_t i = 0; i < res.eps.size(); ++i)
      csv << fmt(res.eps[i]) << ',' << fmt(res.min_F[i]) << ',' << res.iterations[i] << '\n';
    csv.close();
    man.output(out_path);
    man.convergence = {{"slope", res.slope}, {"expected", cfg.beta()}};
    man.write(out_path, f);
  }
  out << "slope " << fmt(res.slope, "%.6g") << "\nexpected " << fmt(cfg.beta(), "%.6g") << '\n';
  return 0;
}

int cmd_demand(Flags& f, std::ostream& out, std::ostream&) {
  Manifest man("demand");
  const auto records = read_centroids_csv(f.string("centroids"));
  const auto coeffs = read_coefficients_json(f.string("coeffs"));
  const Grid grid = grid_from_flags(f);
  const double bw = f.number("bandwidth");
  const auto field = demand_field(records, coeffs, grid, bw);
  const auto out_path = f.string("out");
  write_density_csv(field, out_path);
  man.output(out_path);
  man.convergence = {{"records", records.size()}, {"total_demand", integrate(field)}};
  man.write(out_path, f);
  out << "total demand " << fmt(integrate(field), "%.10g") << '\n';
  return 0;
}

int cmd_cost_curve(Flags& f, std::ostream& out, std::ostream&) {
  Manifest man("cost-curve");
  const auto aircraft = read_aircraft_json(f.string("aircraft"));
  const auto ranges = parse_range(f.string("ranges", "500:5000:100"), "ranges");
  const double scale = f.number("fuel-scale", 1.0);
  const auto curve = cost_per_ton_km_curve(ranges, aircraft, scale);
  const auto totals = integrate_per_km(curve);
  const double q = fit_cost_exponent(curve, CurveKind::per_km);
  const auto out_path = f.string("out", "");
  if (!out_path.empty()) {
    auto csv = open_output(out_path);
    csv << "R,cost_per_ton_km,cost_per_ton\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
      csv << fmt(curve[i].R) << ',' << fmt(curve[i].cost) << ',' << fmt(totals[i]) << '\n';
    csv.close();
    man.output(out_path);
    man.convergence = {{"q", q}};
    man.write(out_path, f);
  }
  out << "q " << fmt(q, "%.6g") << '\n';
  return 0;
}

int cmd_pureloc(Flags& f, std::ostream& out, std::ostream&) {
  Manifest man("pureloc");
  const auto rho = load_rho(f);
  const double p = f.number("p", 1.0);
  const int d = f.integer("d", rho.grid().dim());
  if (d != rho.grid().dim()) throw UsageError("--d does not match the density's grid");
  const auto mu = optimal_pure_location_density(rho, p, d);
  const auto out_path = f.string("out");
  write_density_csv(mu, out_path);
  man.output(out_path);
  man.convergence = {{"location_term", location_term(rho, mu, p, d)}};
  man.write(out_path, f);
  out << "location term " << fmt(location_term(rho, mu, p, d), "%.10g") << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous location-routing solver: facility densities, main hub, airfreight inputs",
               args.empty() ? "hubfield" : args[0]};
  app.require_subcommand(1);

  struct Entry {
    CLI::App* app;
    std::unique_ptr<Flags> flags;
    int (*fn)(Flags&, std::ostream&, std::ostream&);
  };
  std::vector<Entry> entries;
  auto add = [&](const char* name, const char* help, int (*fn)(Flags&, std::ostream&, std::ostream&)) -> Flags& {
    auto* sub = app.add_subcommand(name, help);
    entries.push_back({sub, std::make_unique<Flags>(sub), fn});
    return *entries.back().flags;
  };

  {
    auto& f = add("solve", "optimal facility density for F_eps by fixed-point iteration", cmd_solve);
    add_solver_flags(f);
    f.str("out", "output density CSV");
    f.str("log", "per-iteration CSV log");
  }
  {
    auto& f = add("hub", "main hub: minimizer of the limit functional", cmd_hub);
    f.str("rho", "density CSV or peak-model JSON");
    add_grid_flags(f);
    f.num("p", "location exponent");
    f.num("d", "dimension");
    f.num("q", "routing exponent");
    f.str("out", "scan output (density CSV)");
    f.str("json", "hub JSON {x0, value}");
  }
  {
    auto& f = add("masscoupled1d", "1D mass-dependent routing: transport map iteration", cmd_masscoupled);
    f.str("rho", "density CSV or peak-model JSON");
    add_grid_flags(f);
    f.num("A", "location cost coefficient");
    f.num("B", "routing cost coefficient");
    f.num("p", "Wasserstein exponent");
    f.num("q", "routing exponent (> 1)");
    f.num("K", "routing coefficient");
    f.num("tol", "relative sup-norm stop threshold");
    f.num("max-iter", "iteration cap");
    f.num("damping", "relaxation of the transport map");
    f.str("out", "CSV with columns x,T,nu");
    f.str("nu-out", "nu as density CSV");
  }
  {
    auto& f = add("hexconst", "quantization constant C_{p,2} of the unit-area hexagon", cmd_hexconst);
    f.num("p", "exponent");
    f.str("sweep", "start:stop:step sweep emitted as CSV");
    f.str("out", "CSV path for --sweep");
  }
  {
    auto& f = add("scaling", "slope of log min F_eps against log eps", cmd_scaling);
    add_solver_flags(f);
    f.str("eps-list", "comma-separated decreasing eps values");
    f.str("out", "CSV eps,F,iterations");
  }
  {
    auto& f = add("demand", "airfreight demand field from centroid records", cmd_demand);
    f.str("centroids", "centroid CSV x,y,PC,TSL,MD,HT[,TSE]");
    f.str("coeffs", "coefficients JSON C0..C5");
    add_grid_flags(f);
    f.num("bandwidth", "Gaussian spreading bandwidth");
    f.str("out", "output density CSV");
  }
  {
    auto& f = add("cost-curve", "Breguet cost per ton-km and the fitted routing exponent", cmd_cost_curve);
    f.str("aircraft", "aircraft JSON {E, k_c, eta_p}");
    f.str("ranges", "start:stop:step ranges");
    f.num("fuel-scale", "fuel price scale");
    f.str("out", "CSV R,cost_per_ton_km,cost_per_ton");
  }
  {
    auto& f = add("pureloc", "optimal density for the location cost alone", cmd_pureloc);
    f.str("rho", "density CSV or peak-model JSON");
    add_grid_flags(f);
    f.num("p", "location exponent");
    f.num("d", "dimension");
    f.str("out", "output density CSV");
  }

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  for (auto& e : entries) {
    if (!e.app->parsed()) continue;
    try {
      e.flags->load();
      return e.fn(*e.flags, out, err);
    } catch (const UsageError& ex) {
      err << "error: " << ex.what() << "\n\n" << e.app->help();
      return 2;
    } catch (const ParseError& ex) {
      err << "input error: " << ex.what() << '\n';
      return 2;
    } catch (const std::invalid_argument& ex) {
      err << "invalid argument: " << ex.what() << '\n';
      return 2;
    } catch (const DomainError& ex) {
      err << "error: " << ex.what() << '\n';
      return 1;
    } catch (const std::exception& ex) {
      err << "error: " << ex.what() << '\n';
      return 1;
    }
  }
  return 2;
}

}  // namespace hubfield::cli
