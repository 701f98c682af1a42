#include "cavityqfi/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cavityqfi/parallel.hpp"
#include "cavityqfi/version.hpp"

namespace cavityqfi {

namespace {

using nlohmann::json;

json config_to_json(const SweepConfig& c) {
  json j;
  j["probes"] = c.probes;
  j["n_values"] = c.n_values;
  json regimes = json::array();
  for (const auto& r : c.regimes) {
    regimes.push_back({{"kappa_over_g", r.kappa_over_g}, {"gamma_over_g", r.gamma_over_g}});
  }
  j["regimes"] = regimes;
  j["target"] = c.target;
  j["detuning_over_g"] = c.detuning_over_g;
  j["time_grid"] = {{"t_end", c.t_end}, {"n_samples", c.n_samples}};
  j["tolerances"] = {{"rtol", c.rtol},
                     {"atol", c.atol},
                     {"eps_eig_rel", c.eps_eig_rel},
                     {"fd_delta_rel", c.fd_delta_rel}};
  j["n_cav_extra"] = c.n_cav_extra;
  j["threads"] = c.threads;
  j["fit"] = c.fit;
  j["kappa_grid"] = c.kappa_grid;
  j["gamma_grid"] = c.gamma_grid;
  return j;
}

SweepConfig config_from_json(const json& j) {
  SweepConfig c;
  try {
    if (j.contains("probes")) c.probes = j.at("probes").get<std::vector<std::string>>();
    if (j.contains("n_values")) {
      c.n_values = j.at("n_values").get<std::vector<int>>();
    } else if (j.contains("n_range")) {
      const int lo = j.at("n_range").at("min").get<int>();
      const int hi = j.at("n_range").at("max").get<int>();
      for (int n = lo; n <= hi; ++n) c.n_values.push_back(n);
    }
    c.regimes.clear();
    if (j.contains("regimes")) {
      for (const auto& r : j.at("regimes")) {
        c.regimes.push_back(
            {r.at("kappa_over_g").get<double>(), r.at("gamma_over_g").get<double>()});
      }
    }
    if (j.contains("target")) c.target = j.at("target").get<std::string>();
    if (j.contains("detuning_over_g")) c.detuning_over_g = j.at("detuning_over_g").get<double>();
    if (j.contains("time_grid")) {
      const auto& g = j.at("time_grid");
      if (g.contains("t_end")) c.t_end = g.at("t_end").get<double>();
      if (g.contains("n_samples")) c.n_samples = g.at("n_samples").get<int>();
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      if (t.contains("rtol")) c.rtol = t.at("rtol").get<double>();
      if (t.contains("atol")) c.atol = t.at("atol").get<double>();
      if (t.contains("eps_eig_rel")) c.eps_eig_rel = t.at("eps_eig_rel").get<double>();
      if (t.contains("fd_delta_rel")) c.fd_delta_rel = t.at("fd_delta_rel").get<double>();
    }
    if (j.contains("n_cav_extra")) c.n_cav_extra = j.at("n_cav_extra").get<int>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    if (j.contains("fit")) c.fit = j.at("fit").get<bool>();
    if (j.contains("kappa_grid")) c.kappa_grid = j.at("kappa_grid").get<std::vector<double>>();
    if (j.contains("gamma_grid")) c.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  return c;
}

std::string format_long(long v) { return std::to_string(v); }

std::string fit_family_id(const std::string& probe, const RegimePoint& r) {
  return probe + "@k" + format_double(r.kappa_over_g) + "@g" + format_double(r.gamma_over_g);
}

struct PointKey {
  std::string probe;
  int n = 0;
  double kappa = 0.0;
  double gamma = 0.0;

  bool operator<(const PointKey& o) const {
    if (probe != o.probe) return probe < o.probe;
    if (n != o.n) return n < o.n;
    if (kappa != o.kappa) return kappa < o.kappa;
    return gamma < o.gamma;
  }
};

}  // namespace

void SweepConfig::validate(bool for_map) const {
  if (probes.empty()) throw ConfigError("config needs a non-empty probe list");
  std::vector<ProbeSpec> specs;
  for (const auto& p : probes) specs.push_back(ProbeSpec::parse(p));
  if (n_values.empty()) throw ConfigError("config needs at least one N value");
  for (const int n : n_values) {
    if (n < 1 || n > DickeSpace::kDefaultMaxQubits) {
      throw ConfigError("N=" + std::to_string(n) + " outside 1.." +
                        std::to_string(DickeSpace::kDefaultMaxQubits));
    }
    for (const auto& s : specs) {
      if (s.family == ProbeSpec::Family::DickeN && s.excitations > n) {
        throw ConfigError("probe " + s.name() + " needs more excitations than N=" +
                          std::to_string(n) + " allows");
      }
    }
  }
  if (for_map) {
    if (kappa_grid.empty() || gamma_grid.empty()) {
      throw ConfigError("map config needs non-empty kappa_grid and gamma_grid");
    }
  } else {
    if (regimes.empty()) throw ConfigError("config needs at least one regime point");
    for (const auto& r : regimes) {
      if (r.kappa_over_g < 0 || r.gamma_over_g < 0) {
        throw ConfigError("regime decay ratios must be nonnegative");
      }
    }
  }
  if (target != "coupling" && target != "detuning") {
    throw ConfigError("target must be 'coupling' or 'detuning'");
  }
  if (!(t_end > 0) || n_samples < 3) throw ConfigError("bad time grid");
  if (!(rtol > 0) || !(atol > 0)) throw ConfigError("tolerances must be positive");
  if (!(fd_delta_rel > 0)) throw ConfigError("fd_delta_rel must be positive");
  if (n_cav_extra < 0) throw ConfigError("n_cav_extra must be nonnegative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

PipelineSettings SweepConfig::pipeline_settings() const {
  PipelineSettings s;
  s.g = 1.0;
  s.n_cav_extra = n_cav_extra;
  s.detuning_over_g = detuning_over_g;
  s.grid = TimeGrid{t_end, n_samples};
  s.target = estimation_target();
  s.qfi.integrator.rtol = rtol;
  s.qfi.integrator.atol = atol;
  s.qfi.eps_eig_rel = eps_eig_rel;
  s.qfi.collect_observables = false;
  s.threads = threads;
  return s;
}

EstimationTarget SweepConfig::estimation_target() const {
  return EstimationTarget{target == "detuning" ? TargetKind::Detuning : TargetKind::Coupling,
                          fd_delta_rel};
}

std::string SweepConfig::to_json_string(int indent) const {
  return config_to_json(*this).dump(indent);
}

SweepConfig SweepConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

SweepConfig SweepConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_string(buffer.str());
}

std::string config_hash(const SweepConfig& config) {
  // canonical form: nlohmann keeps object keys sorted, dump(-1) is stable
  const std::string canon = config_to_json(config).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ResultRow run_single(const ProbeSpec& probe, int n_qubits, const RegimePoint& regime,
                     const SweepConfig& config) {
  const PipelineSettings settings = config.pipeline_settings();
  const QfiTrace trace =
      run_point(probe, n_qubits, regime.kappa_over_g, regime.gamma_over_g, settings);
  ResultRow row;
  row.probe = probe.name();
  row.n_qubits = n_qubits;
  row.kappa_over_g = regime.kappa_over_g;
  row.gamma_over_g = regime.gamma_over_g;
  row.target = config.target;
  row.max_qfi = trace.max_value;
  row.t_at_max = trace.t_at_max;
  row.steps_accepted = trace.stats.accepted;
  row.steps_rejected = trace.stats.rejected;
  row.version = kVersion;
  row.config_hash = config_hash(config);
  return row;
}

SweepOutcome run_sweep(const SweepConfig& config) {
  config.validate();
  struct Point {
    ProbeSpec probe;
    int n = 0;
    RegimePoint regime;
  };
  std::vector<Point> points;
  for (const auto& name : config.probes) {
    const ProbeSpec spec = ProbeSpec::parse(name);
    for (const int n : config.n_values) {
      for (const auto& r : config.regimes) points.push_back({spec, n, r});
    }
  }

  std::vector<std::optional<ResultRow>> slots(points.size());
  std::vector<std::optional<ErrorRow>> error_slots(points.size());
  parallel_for(points.size(), config.threads, [&](std::size_t i) {
    const Point& pt = points[i];
    try {
      slots[i] = run_single(pt.probe, pt.n, pt.regime, config);
    } catch (const std::exception& e) {
      ErrorRow err;
      err.probe = pt.probe.name();
      err.n_qubits = pt.n;
      err.kappa_over_g = pt.regime.kappa_over_g;
      err.gamma_over_g = pt.regime.gamma_over_g;
      err.message = e.what();
      error_slots[i] = err;
    }
  });

  SweepOutcome out;
  for (auto& s : slots) {
    if (s) out.rows.push_back(std::move(*s));
  }
  for (auto& s : error_slots) {
    if (s) out.errors.push_back(std::move(*s));
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return PointKey{a.probe, a.n_qubits, a.kappa_over_g, a.gamma_over_g} <
           PointKey{b.probe, b.n_qubits, b.kappa_over_g, b.gamma_over_g};
  });
  std::sort(out.errors.begin(), out.errors.end(), [](const ErrorRow& a, const ErrorRow& b) {
    return PointKey{a.probe, a.n_qubits, a.kappa_over_g, a.gamma_over_g} <
           PointKey{b.probe, b.n_qubits, b.kappa_over_g, b.gamma_over_g};
  });

  if (config.fit) {
    // one fit per (probe, regime) family over its N values, when eligible
    for (const auto& name : config.probes) {
      for (const auto& regime : config.regimes) {
        std::vector<double> ns, ys;
        std::vector<ResultRow*> members;
        for (auto& row : out.rows) {
          if (row.probe == ProbeSpec::parse(name).name() &&
              row.kappa_over_g == regime.kappa_over_g &&
              row.gamma_over_g == regime.gamma_over_g) {
            ns.push_back(row.n_qubits);
            ys.push_back(row.max_qfi);
            members.push_back(&row);
          }
        }
        std::set<double> distinct(ns.begin(), ns.end());
        bool positive = !ys.empty() && std::all_of(ys.begin(), ys.end(),
                                                   [](double y) { return y > 0; });
        if (distinct.size() < 4 || !positive) continue;
        FitRow fit_row;
        fit_row.fit_id = fit_family_id(ProbeSpec::parse(name).name(), regime);
        fit_row.probe = ProbeSpec::parse(name).name();
        fit_row.kappa_over_g = regime.kappa_over_g;
        fit_row.gamma_over_g = regime.gamma_over_g;
        fit_row.target = config.target;
        fit_row.fit = fit_power_law(ns, ys);
        fit_row.n_points = static_cast<int>(ns.size());
        for (auto* row : members) row->fit_id = fit_row.fit_id;
        out.fits.push_back(std::move(fit_row));
      }
    }
    std::sort(out.fits.begin(), out.fits.end(),
              [](const FitRow& a, const FitRow& b) { return a.fit_id < b.fit_id; });
  }
  return out;
}

std::vector<MapRow> run_map(const SweepConfig& config) {
  config.validate(/*for_map=*/true);
  const PipelineSettings settings = config.pipeline_settings();
  std::vector<MapRow> rows;
  for (const auto& name : config.probes) {
    const ProbeSpec spec = ProbeSpec::parse(name);
    const ExponentMap map = exponent_map(spec, config.kappa_grid, config.gamma_grid,
                                         config.n_values, settings);
    for (const auto& e : map.entries) {
      MapRow row;
      row.probe = map.probe;
      row.kappa_over_g = e.kappa_over_g;
      row.gamma_over_g = e.gamma_over_g;
      row.target = config.target;
      row.fit = e.fit;
      row.converged = e.ok && e.fit.converged;
      row.n_points = e.n_points;
      row.error = e.error;
      rows.push_back(row);
    }
  }
  std::sort(rows.begin(), rows.end(), [](const MapRow& a, const MapRow& b) {
    return PointKey{a.probe, 0, a.kappa_over_g, a.gamma_over_g} <
           PointKey{b.probe, 0, b.kappa_over_g, b.gamma_over_g};
  });
  return rows;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "probe,n_qubits,kappa_over_g,gamma_over_g,target,max_qfi,t_at_max,fit_id,"
      "steps_accepted,steps_rejected,version,config_hash\n";
  for (const auto& r : rows) {
    out += r.probe + ',' + std::to_string(r.n_qubits) + ',' + format_double(r.kappa_over_g) +
           ',' + format_double(r.gamma_over_g) + ',' + r.target + ',' + format_double(r.max_qfi) +
           ',' + format_double(r.t_at_max) + ',' + r.fit_id + ',' + format_long(r.steps_accepted) +
           ',' + format_long(r.steps_rejected) + ',' + r.version + ',' + r.config_hash + '\n';
  }
  return out;
}

std::string fits_csv(const std::vector<FitRow>& fits) {
  std::string out =
      "fit_id,probe,kappa_over_g,gamma_over_g,target,a,b,c,residual_norm,"
      "stderr_a,stderr_b,stderr_c,converged,n_points\n";
  for (const auto& f : fits) {
    out += f.fit_id + ',' + f.probe + ',' + format_double(f.kappa_over_g) + ',' +
           format_double(f.gamma_over_g) + ',' + f.target + ',';
    if (f.fit.converged) {
      out += format_double(f.fit.a) + ',' + format_double(f.fit.b) + ',' +
             format_double(f.fit.c) + ',' + format_double(f.fit.residual_norm) + ',' +
             format_double(f.fit.stderr_a) + ',' + format_double(f.fit.stderr_b) + ',' +
             format_double(f.fit.stderr_c) + ",1,";
    } else {
      out += ",,,,,,,0,";
    }
    out += std::to_string(f.n_points) + '\n';
  }
  return out;
}

std::string errors_csv(const std::vector<ErrorRow>& errors) {
  std::string out = "probe,n_qubits,kappa_over_g,gamma_over_g,error\n";
  for (const auto& e : errors) {
    std::string msg = e.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += e.probe + ',' + std::to_string(e.n_qubits) + ',' + format_double(e.kappa_over_g) +
           ',' + format_double(e.gamma_over_g) + ',' + msg + '\n';
  }
  return out;
}

std::string map_csv(const std::vector<MapRow>& rows) {
  std::string out = "probe,kappa_over_g,gamma_over_g,target,b,a,c,converged,residual_norm,n_points,error\n";
  for (const auto& r : rows) {
    std::string msg = r.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    out += r.probe + ',' + format_double(r.kappa_over_g) + ',' + format_double(r.gamma_over_g) +
           ',' + r.target + ',';
    if (r.converged) {
      out += format_double(r.fit.b) + ',' + format_double(r.fit.a) + ',' +
             format_double(r.fit.c) + ",1," + format_double(r.fit.residual_norm) + ',';
    } else {
      out += ",,,0,,";
    }
    out += std::to_string(r.n_points) + ',' + msg + '\n';
  }
  return out;
}

std::string trace_csv(const QfiTrace& trace) {
  std::string out = "t,qfi\n";
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    out += format_double(trace.times[k]) + ',' + format_double(trace.values[k]) + '\n';
  }
  return out;
}

std::string metadata_json(const SweepConfig& config, const std::string& command) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = config_hash(config);
  j["config"] = json::parse(config.to_json_string());
  j["units"] = {{"time", "1/g"},
                {"max_qfi", config.target == "detuning" ? "1/delta^2 (delta in units of g)"
                                                        : "1/g^2"}};
  return j.dump(2) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

std::pair<std::vector<double>, std::vector<double>> read_csv_columns(
    const std::string& path, const std::string& x_column, const std::string& y_column) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("CSV column not found: " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = find_col(x_column);
  const std::size_t yi = find_col(y_column);
  std::vector<double> xs, ys;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() <= std::max(xi, yi)) {
      throw ConfigError("short CSV row at line " + std::to_string(line_no));
    }
    try {
      xs.push_back(std::stod(cells[xi]));
      ys.push_back(std::stod(cells[yi]));
    } catch (const std::exception&) {
      throw ConfigError("unparseable number at line " + std::to_string(line_no));
    }
  }
  return {xs, ys};
}

}  // namespace cavityqfi
