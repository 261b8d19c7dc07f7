#include "sdecay/cli.hpp"

#include "sdecay/experiments.hpp"
#include "sdecay/generator.hpp"
#include "sdecay/geometry.hpp"
#include "sdecay/montecarlo.hpp"
#include "sdecay/projection.hpp"
#include "sdecay/spectral.hpp"

#include "CLI11.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace sdecay::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Command-line misuse that the parser itself cannot see (missing inputs, mismatched manifest).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Logger {
 public:
  Logger(std::ostream& err, bool quiet, bool json_lines) : err_(err), quiet_(quiet), json_(json_lines) {}

  void info(const std::string& msg, const json& fields = json::object()) const { emit("info", msg, fields); }
  void error(const std::string& msg) const {
    if (json_) {
      err_ << json{{"level", "error"}, {"msg", msg}}.dump() << '\n';
    } else {
      err_ << "error: " << msg << '\n';
    }
  }

 private:
  void emit(const char* level, const std::string& msg, const json& fields) const {
    if (quiet_) return;
    if (json_) {
      json j = fields;
      j["level"] = level;
      j["msg"] = msg;
      err_ << j.dump() << '\n';
    } else {
      err_ << msg;
      for (const auto& [k, v] : fields.items()) err_ << ' ' << k << '=' << v.dump();
      err_ << '\n';
    }
  }

  std::ostream& err_;
  bool quiet_;
  bool json_;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw InvalidArgument("not a number: '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("empty list");
  return out;
}

std::vector<std::vector<double>> parse_points(const std::string& s) {
  std::vector<std::vector<double>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_list(item));
  return out;
}

Vec to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  Vec x(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) x[static_cast<int>(i)] = v[i];
  return x;
}

json from_vec(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec require_dim(const json& j, int d, const char* what) {
  const Vec v = to_vec(j);
  if (v.size() != d) throw InvalidArgument(std::string(what) + " has the wrong dimension");
  return v;
}

/// Some unit vector orthogonal to u.
Vec perpendicular(const Vec& u) {
  const int d = static_cast<int>(u.size());
  int axis = 0;
  for (int i = 1; i < d; ++i) {
    if (std::abs(u[i]) < std::abs(u[axis])) axis = i;
  }
  Vec p = unit_vector(d, axis);
  p -= p.dot(u) * u;
  return p.normalized();
}

// ---------------------------------------------------------------------------
// Output

class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& bytes) {
    fs::create_directories(dir_);
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw InvalidArgument("cannot write " + (dir_ / name).string());
    f << bytes;
    if (!f) throw InvalidArgument("write failed: " + (dir_ / name).string());
    digests_[name] = sha256_hex(bytes);
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const std::map<std::string, std::string>& digests() const { return digests_; }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
};

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) s_ << (i ? "," : "") << header[i];
    s_ << '\n';
  }
  Csv& cell(double x) { return raw(format_number(x)); }
  Csv& cell(long x) { return raw(std::to_string(x)); }
  Csv& cell(const std::string& x) { return raw(x); }
  Csv& cells(const Vec& v) {
    for (int i = 0; i < v.size(); ++i) cell(v[i]);
    return *this;
  }
  void end_row() {
    s_ << '\n';
    first_ = true;
  }
  std::string str() const { return s_.str(); }

 private:
  Csv& raw(const std::string& x) {
    s_ << (first_ ? "" : ",") << x;
    first_ = false;
    return *this;
  }
  std::ostringstream s_;
  bool first_ = true;
};

std::vector<std::string> coord_names(const char* prefix, int d) {
  std::vector<std::string> out;
  for (int i = 0; i < d; ++i) out.push_back(std::string(prefix) + std::to_string(i + 1));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// ---------------------------------------------------------------------------
// Flags and config resolution

struct Flags {
  std::string config, spec, domain, out;
  std::optional<std::string> z, x0, u, points, rays, deltas, radii, fractions;
  std::optional<long> n;
  std::optional<int> dirs;
  std::optional<std::uint64_t> seed;
  std::optional<double> exponent, tol, dt, eps_jump;
  std::optional<int> n_rays;
  std::optional<int> threads;
  bool csv = false, quiet = false, json_logs = false;
};

/// JSON objects may be given inline or as a path relative to the file that mentions them.
json load_object(const json& j, const fs::path& base) {
  if (j.is_string()) {
    fs::path p = j.get<std::string>();
    if (p.is_relative()) p = base / p;
    return read_json_file(p.string());
  }
  if (!j.is_object()) throw InvalidArgument("expected an object or a file name");
  return j;
}

json load_config(const Flags& f, const std::string& sub) {
  if (f.config.empty()) return json::object();
  const json raw = read_json_file(f.config);
  const fs::path base = fs::path(f.config).parent_path();
  json cfg = raw;
  if (raw.contains("config") && raw.contains("subcommand")) {
    // A run manifest: replay its resolved configuration.
    if (raw["subcommand"].get<std::string>() != sub) {
      throw UsageError("manifest belongs to '" + raw["subcommand"].get<std::string>() + "', not '" + sub + "'");
    }
    cfg = raw["config"];
  }
  if (!cfg.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const char* key : {"spec", "domain"}) {
    if (cfg.contains(key) && !cfg[key].is_null()) cfg[key] = load_object(cfg[key], base);
  }
  return cfg;
}

void set_vector_flag(json& cfg, const char* key, const std::optional<std::string>& flag) {
  if (flag) cfg[key] = parse_list(*flag);
}

json resolve(const Flags& f, const std::string& sub) {
  json cfg = load_config(f, sub);
  if (!f.spec.empty()) cfg["spec"] = read_json_file(f.spec);
  if (!f.domain.empty()) cfg["domain"] = read_json_file(f.domain);
  if (!cfg.contains("spec")) throw UsageError(sub + ": --spec (or a config with \"spec\") is required");
  // Normalize through the library types so the echoed config is complete.
  cfg["spec"] = StableSpec::from_json(cfg["spec"]).to_json();
  if (cfg.contains("domain") && !cfg["domain"].is_null()) cfg["domain"] = domain_from_json(cfg["domain"])->to_json();

  auto apply_path_flags = [&](PathConfig& p) {
    if (f.seed) p.seed = *f.seed;
    if (f.dt) p.dt = *f.dt;
    if (f.eps_jump) p.eps_jump = *f.eps_jump;
    if (f.n_rays) p.n_rays = *f.n_rays;
  };
  auto path_config = [&](const json& base) {
    PathConfig p = base.is_object() ? PathConfig::from_json(base) : PathConfig{};
    apply_path_flags(p);
    return p.to_json();
  };

  if (sub == "beta-map") {
    cfg["dirs"] = f.dirs ? *f.dirs : cfg.value("dirs", 256);
    cfg["quad"] = QuadConfig::from_json(cfg.value("quad", json::object())).to_json();
  } else if (sub == "generator-check") {
    const bool bounded = f.z.has_value() || (cfg.value("mode", std::string("halfspace")) == "boundedness");
    cfg["mode"] = bounded ? "boundedness" : "halfspace";
    set_vector_flag(cfg, "u", f.u);
    set_vector_flag(cfg, "z", f.z);
    set_vector_flag(cfg, "deltas", f.deltas);
    if (f.points) cfg["points"] = parse_points(*f.points);
    if (f.exponent) cfg["exponent"] = *f.exponent;
    if (!cfg.contains("exponent")) cfg["exponent"] = nullptr;
    if (bounded && !cfg.contains("deltas")) cfg["deltas"] = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    GeneratorQuad q = GeneratorQuad::from_json(cfg.value("quad", json::object()));
    if (f.tol) q.tol = *f.tol;
    cfg["quad"] = q.to_json();
  } else if (sub == "simulate-exit") {
    set_vector_flag(cfg, "x0", f.x0);
    cfg["n"] = f.n ? *f.n : cfg.value("n", 1000L);
    cfg["path"] = path_config(cfg.value("path", json::object()));
  } else if (sub == "decay-experiment") {
    set_vector_flag(cfg, "z", f.z);
    DecayConfig dc = DecayConfig::from_json(cfg.value("experiment", json::object()));
    if (f.rays) dc.t = parse_list(*f.rays);
    if (f.n) dc.n_samples = *f.n;
    apply_path_flags(dc.path);
    cfg["experiment"] = dc.to_json();
    cfg["csv"] = f.csv || cfg.value("csv", false);
  } else if (sub == "reduction-check") {
    set_vector_flag(cfg, "z", f.z);
    set_vector_flag(cfg, "radii", f.radii);
    if (f.fractions) cfg["fractions"] = parse_points(*f.fractions);
    if (!cfg.contains("radii")) cfg["radii"] = {0.25, 0.125, 0.0625};
    cfg["n"] = f.n ? *f.n : cfg.value("n", 100000L);
    cfg["path"] = path_config(cfg.value("path", json::object()));
  }
  return cfg;
}

std::uint64_t seed_of(const json& cfg) {
  if (cfg.contains("path")) return cfg["path"].value("seed", std::uint64_t{1});
  if (cfg.contains("experiment")) return cfg["experiment"]["path"].value("seed", std::uint64_t{1});
  return 0;
}

DomainPtr require_domain(const json& cfg, const std::string& sub) {
  if (!cfg.contains("domain") || cfg["domain"].is_null()) {
    throw UsageError(sub + ": --domain (or a config with \"domain\") is required");
  }
  return domain_from_json(cfg["domain"]);
}

Vec require_point(const json& cfg, const char* key, int d, const std::string& sub) {
  if (!cfg.contains(key)) throw UsageError(sub + ": --" + key + " is required");
  return require_dim(cfg[key], d, key);
}

void require_valid(const StableSpec& spec) {
  const auto rep = validate_spec(spec);
  if (!rep.ok()) {
    std::string names;
    for (const auto& i : rep.items) {
      if (!i.passed) names += (names.empty() ? "" : ", ") + i.name + " (" + i.detail + ")";
    }
    throw InvalidArgument("spec failed validation: " + names);
  }
}

// ---------------------------------------------------------------------------
// Subcommands

int run_validate(const json& cfg, OutputDir& out, const Logger& log) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  const auto rep = validate_spec(spec);
  json result{{"spec", rep.to_json()}};
  bool ok = rep.ok();
  if (cfg.contains("domain") && !cfg["domain"].is_null()) {
    const DomainPtr dom = domain_from_json(cfg["domain"]);
    json d{{"kind", dom->kind()},
           {"dim_matches_spec", dom->dim() == spec.dim()},
           {"interior_ball_radius", dom->interior_ball_radius()},
           {"exterior_ball_radius", dom->exterior_ball_radius()}};
    ok = ok && dom->dim() == spec.dim();
    result["domain"] = d;
  }
  result["ok"] = ok;
  out.write_json("result.json", result);
  for (const auto& i : rep.items) {
    log.info(i.name, {{"passed", i.passed}, {"detail", i.detail}});
  }
  return ok ? kOk : kValidationFailure;
}

int run_beta_map(const json& cfg, OutputDir& out, const Logger& log) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  require_valid(spec);
  const QuadConfig quad = QuadConfig::from_json(cfg["quad"]);
  const int n = cfg["dirs"].get<int>();
  const int d = spec.dim();
  const auto dirs = direction_grid(d, n);
  const std::string theta_hash = sha256_hex(spec.theta.to_json().dump()).substr(0, 16);
  Csv csv(concat(concat({"theta_param_hash", "alpha"}, coord_names("u", d)), {"c_plus", "c_minus", "beta", "quad_err"}));
  double bmin = std::numeric_limits<double>::infinity(), bmax = -bmin;
  Vec argmin = dirs.front(), argmax = dirs.front();
  for (const auto& u : dirs) {
    const DirectionalLaw law = directional_law(spec, u, quad);
    csv.cell(theta_hash).cell(spec.alpha).cells(u).cell(law.c_plus).cell(law.c_minus).cell(law.beta).cell(law.beta_err);
    csv.end_row();
    if (law.beta < bmin) bmin = law.beta, argmin = u;
    if (law.beta > bmax) bmax = law.beta, argmax = u;
  }
  out.write("beta_map.csv", csv.str());
  out.write_json("result.json", json{{"alpha", spec.alpha},
                                     {"dirs", n},
                                     {"beta_min", bmin},
                                     {"beta_max", bmax},
                                     {"argmin", from_vec(argmin)},
                                     {"argmax", from_vec(argmax)}});
  log.info("beta map written", {{"rows", n}});
  return kOk;
}

int run_generator_check(const json& cfg, OutputDir& out, const Logger& log) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  require_valid(spec);
  const int d = spec.dim();
  const GeneratorQuad quad = GeneratorQuad::from_json(cfg["quad"]);
  const std::optional<double> exponent =
      cfg["exponent"].is_null() ? std::nullopt : std::optional<double>(cfg["exponent"].get<double>());

  if (cfg["mode"] == "boundedness") {
    const DomainPtr dom = require_domain(cfg, "generator-check");
    const Vec z = require_point(cfg, "z", d, "generator-check");
    const auto deltas = cfg["deltas"].get<std::vector<double>>();
    std::shared_ptr<const ExponentField> field;
    if (exponent) field = std::make_shared<ConstantExponent>(d, *exponent);
    const BoundednessScan scan = g_boundedness_scan(spec, dom, z, deltas, quad, field);
    Csv csv({"delta", "value", "err_estimate"});
    json values = json::array();
    for (std::size_t i = 0; i < scan.deltas.size(); ++i) {
      const auto& v = scan.values[i];
      csv.cell(scan.deltas[i]).cell(v.value).cell(v.err_estimate).end_row();
      values.push_back(json{{"delta", scan.deltas[i]}, {"value", v.value}, {"err_estimate", v.err_estimate}});
    }
    const bool bounded = scan.slope >= -0.1;
    out.write("boundedness.csv", csv.str());
    out.write_json("result.json", json{{"mode", "boundedness"},
                                       {"frame", scan.frame.to_json()},
                                       {"values", values},
                                       {"slope", scan.slope},
                                       {"bounded", bounded}});
    log.info("boundedness scan", {{"slope", scan.slope}});
    return bounded ? kOk : kValidationFailure;
  }

  const Vec u = cfg.contains("u") ? require_dim(cfg["u"], d, "u").normalized() : unit_vector(d, d - 1);
  std::vector<Vec> points;
  if (cfg.contains("points")) {
    for (const auto& p : cfg["points"]) points.push_back(require_dim(p, d, "point"));
  } else {
    const Vec side = perpendicular(u);
    for (double a : {0.0, 0.5}) {
      for (double s : {0.01, 0.1, 1.0, 10.0}) points.push_back(s * u + a * side);
    }
  }
  const HarmonicityScan scan = halfspace_harmonicity_scan(spec, u, points, quad, exponent);
  Csv csv(concat(coord_names("x", d), {"value", "err_estimate"}));
  json values = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& v = scan.values[i];
    csv.cells(points[i]).cell(v.value).cell(v.err_estimate).end_row();
    values.push_back(json{{"x", from_vec(points[i])}, {"value", v.value}, {"err_estimate", v.err_estimate}});
  }
  out.write("harmonicity.csv", csv.str());
  out.write_json("result.json", json{{"mode", "halfspace"},
                                     {"u", from_vec(u)},
                                     {"exponent", scan.exponent},
                                     {"values", values},
                                     {"max_abs", scan.max_abs},
                                     {"threshold", scan.threshold},
                                     {"passed", scan.passed()}});
  log.info("half-space harmonicity scan", {{"max_abs", scan.max_abs}, {"threshold", scan.threshold}});
  return scan.passed() ? kOk : kValidationFailure;
}

int run_simulate_exit(const json& cfg, OutputDir& out, const Logger& log, int threads) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  require_valid(spec);
  const int d = spec.dim();
  const DomainPtr dom = require_domain(cfg, "simulate-exit");
  const Vec x0 = require_point(cfg, "x0", d, "simulate-exit");
  const PathConfig pc = PathConfig::from_json(cfg["path"]);
  const long n = cfg["n"].get<long>();
  if (n < 1) throw InvalidArgument("--n must be positive");
  const PathSimulator sim(spec, pc);
  std::vector<ExitSample> samples(static_cast<std::size_t>(n));
  threads = std::max(1, threads);
  const long block = (n + threads - 1) / threads;
  parallel_for(threads, threads, [&](long k) {
    PathSimulator local = sim;
    for (long i = k * block; i < std::min(n, (k + 1) * block); ++i) {
      Rng rng(pc.seed, static_cast<std::uint64_t>(i));
      samples[i] = local.sample_exit(*dom, x0, rng);
    }
  });
  Csv csv(concat(concat({"exit_time"}, coord_names("y", d)), {"exited_by"}));
  double t_sum = 0.0, steps = 0.0;
  long skeleton = 0;
  for (long i = 0; i < n; ++i) {
    const auto& s = samples[i];
    csv.cell(s.exit_time).cells(s.exit_point).cell(to_string(s.exited_by)).end_row();
    t_sum += s.exit_time;
    steps += static_cast<double>(s.path_steps);
    skeleton += s.exited_by == ExitSample::By::SkeletonStep;
  }
  out.write("exits.csv", csv.str());
  out.write_json("result.json", json{{"n", n},
                                     {"mean_exit_time", t_sum / n},
                                     {"mean_steps", steps / n},
                                     {"skeleton_fraction", static_cast<double>(skeleton) / n}});
  log.info("exits simulated", {{"n", n}, {"skeleton_fraction", static_cast<double>(skeleton) / n}});
  return kOk;
}

int run_decay(const json& cfg, OutputDir& out, const Logger& log, int threads) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  require_valid(spec);
  const DomainPtr dom = require_domain(cfg, "decay-experiment");
  const Vec z = require_point(cfg, "z", spec.dim(), "decay-experiment");
  DecayConfig dc = DecayConfig::from_json(cfg["experiment"]);
  dc.threads = threads;
  log.info("decay experiment", {{"n", dc.n_samples}, {"seed", dc.path.seed}});
  const DecayReport rep = run_decay_experiment(spec, dom, z, dc);
  out.write_json("result.json", rep.to_json());
  if (cfg.value("csv", false)) {
    Csv csv({"t", "value", "se"});
    for (const auto& p : rep.rays) csv.cell(p.t).cell(p.value).cell(p.se).end_row();
    out.write("rays.csv", csv.str());
  }
  log.info("decay fit", {{"predicted", rep.beta_predicted}, {"fitted", rep.fit.slope}, {"status", rep.status}});
  return rep.conclusive() ? kOk : kInconclusive;
}

int run_reduction(const json& cfg, OutputDir& out, const Logger& log, int threads) {
  const StableSpec spec = StableSpec::from_json(cfg["spec"]);
  require_valid(spec);
  const int d = spec.dim();
  const DomainPtr dom = require_domain(cfg, "reduction-check");
  const Vec z = require_point(cfg, "z", d, "reduction-check");
  const PathConfig pc = PathConfig::from_json(cfg["path"]);
  const auto radii = cfg["radii"].get<std::vector<double>>();
  std::vector<Vec> fractions;
  if (cfg.contains("fractions")) {
    for (const auto& p : cfg["fractions"]) fractions.push_back(require_dim(p, d, "fraction"));
  } else {
    for (auto [a, b] : {std::pair{0.0, 0.25}, {0.0, 0.5}, {0.0, 0.75}, {0.5, 0.5}, {-0.5, 0.25}}) {
      Vec f = Vec::Zero(d);
      f[0] = a;
      f[d - 1] = b;
      fractions.push_back(f);
    }
  }
  const ReductionSeries s = run_reduction_series(spec, dom, z, pc, radii, fractions, cfg["n"].get<long>(), threads);
  Csv csv(concat(concat({"r"}, coord_names("x", d)), {"g", "g_r", "se", "ratio"}));
  bool conclusive = true;
  for (const auto& rep : s.reports) {
    conclusive = conclusive && rep.status == "ok";
    for (const auto& p : rep.points) csv.cell(rep.r).cells(p.x).cell(p.g).cell(p.g_r).cell(p.se).cell(p.ratio()).end_row();
  }
  json result = s.to_json();
  json ro = json::array();
  for (const auto& rep : s.reports) {
    std::vector<double> ratios;
    for (const auto& p : rep.points) ratios.push_back(p.ratio());
    ro.push_back(relative_oscillation(ratios));
  }
  result["relative_oscillation"] = ro;
  out.write("ratios.csv", csv.str());
  out.write_json("result.json", result);
  log.info("reduction check", {{"factors", s.factors}, {"passed", s.passed()}});
  if (!conclusive) return kInconclusive;
  return s.reports.size() < 2 || s.passed() ? kOk : kValidationFailure;
}

const std::vector<std::pair<std::string, std::string>> kSubcommands = {
    {"validate", "Check a spec (and optionally a domain) for admissibility"},
    {"beta-map", "Positivity exponent on a grid of directions"},
    {"generator-check", "Half-space harmonicity or near-boundary boundedness of the generator"},
    {"simulate-exit", "Exit times and positions from a domain"},
    {"decay-experiment", "Monte Carlo boundary decay exponent along an inward normal"},
    {"reduction-check", "Harmonic reduction ratios on shrinking neighbourhoods"},
};

}  // namespace

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boundary decay of stable processes: exponents, generator checks and Monte Carlo experiments",
               kToolName};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Flags f;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, desc] : kSubcommands) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->add_option("--config", f.config, "JSON config file or run manifest");
    s->add_option("--spec", f.spec, "Process spec (JSON file)");
    s->add_option("--out", f.out, "Output directory");
    s->add_option("--threads", f.threads, "Worker threads (default: logical cores)");
    s->add_flag("--quiet", f.quiet, "No progress output");
    s->add_flag("--json-logs", f.json_logs, "Progress output as JSON lines");
    subs[name] = s;
  }
  subs["validate"]->add_option("--domain", f.domain, "Domain (JSON file)");
  subs["beta-map"]->add_option("--dirs", f.dirs, "Number of directions");
  {
    CLI::App* s = subs["generator-check"];
    s->add_option("--u", f.u, "Half-space normal, comma separated");
    s->add_option("--points", f.points, "Evaluation points 'x1,y1;x2,y2'");
    s->add_option("--exponent", f.exponent, "Override the exponent (negative controls)");
    s->add_option("--domain", f.domain, "Domain (JSON file); with --z selects the boundedness scan");
    s->add_option("--z", f.z, "Boundary point");
    s->add_option("--deltas", f.deltas, "Distances to the boundary");
    s->add_option("--tol", f.tol, "Quadrature error target");
  }
  {
    CLI::App* s = subs["simulate-exit"];
    s->add_option("--domain", f.domain, "Domain (JSON file)");
    s->add_option("--x0", f.x0, "Starting point");
    s->add_option("--n", f.n, "Number of paths");
    s->add_option("--seed", f.seed, "Random seed");
    s->add_option("--dt", f.dt, "Skeleton time step");
    s->add_option("--eps-jump", f.eps_jump, "Small-jump cutoff");
    s->add_option("--n-rays", f.n_rays, "Directions in the spectral discretization");
  }
  {
    CLI::App* s = subs["decay-experiment"];
    s->add_option("--domain", f.domain, "Domain (JSON file)");
    s->add_option("--z", f.z, "Boundary point");
    s->add_option("--rays", f.rays, "Distances along the inward normal, decreasing");
    s->add_option("--n", f.n, "Paths per ray point");
    s->add_option("--seed", f.seed, "Random seed");
    s->add_option("--dt", f.dt, "Skeleton time step");
    s->add_option("--eps-jump", f.eps_jump, "Small-jump cutoff");
    s->add_option("--n-rays", f.n_rays, "Directions in the spectral discretization");
    s->add_flag("--csv", f.csv, "Also write the ray table as rays.csv");
  }
  {
    CLI::App* s = subs["reduction-check"];
    s->add_option("--domain", f.domain, "Domain (JSON file)");
    s->add_option("--z", f.z, "Boundary point");
    s->add_option("--radii", f.radii, "Radii in normalized units, decreasing");
    s->add_option("--fractions", f.fractions, "Evaluation points as fractions of r 'a,b;c,d'");
    s->add_option("--n", f.n, "Paths per evaluation point");
    s->add_option("--seed", f.seed, "Random seed");
    s->add_option("--dt", f.dt, "Skeleton time step");
    s->add_option("--eps-jump", f.eps_jump, "Small-jump cutoff");
    s->add_option("--n-rays", f.n_rays, "Directions in the spectral discretization");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  std::string sub;
  for (const auto& [name, s] : subs) {
    if (s->parsed()) sub = name;
  }
  const Logger log(err, f.quiet, f.json_logs);
  const int threads = f.threads ? std::max(1, *f.threads) : default_threads();
  OutputDir dir(f.out.empty() ? fs::path("sdecay-" + sub) : fs::path(f.out));
  const std::string started = utc_now();
  int code = kOk;
  json cfg;
  try {
    cfg = resolve(f, sub);
    if (sub == "validate") {
      code = run_validate(cfg, dir, log);
    } else if (sub == "beta-map") {
      code = run_beta_map(cfg, dir, log);
    } else if (sub == "generator-check") {
      code = run_generator_check(cfg, dir, log);
    } else if (sub == "simulate-exit") {
      code = run_simulate_exit(cfg, dir, log, threads);
    } else if (sub == "decay-experiment") {
      code = run_decay(cfg, dir, log, threads);
    } else {
      code = run_reduction(cfg, dir, log, threads);
    }
  } catch (const UsageError& e) {
    err << e.what() << "\n\n" << subs[sub]->help();
    return kUsage;
  } catch (const Inconclusive& e) {
    log.error(e.what());
    code = kInconclusive;
  } catch (const NumericFailure& e) {
    log.error(e.what());
    code = kNumericFailure;
  } catch (const BudgetExceeded& e) {
    log.error(e.what());
    code = kNumericFailure;
  } catch (const InvalidArgument& e) {
    log.error(e.what());
    code = kValidationFailure;
  } catch (const DomainError& e) {
    log.error(e.what());
    code = kValidationFailure;
  } catch (const json::exception& e) {
    log.error(std::string("malformed input: ") + e.what());
    code = kValidationFailure;
  } catch (const fs::filesystem_error& e) {
    log.error(e.what());
    code = kValidationFailure;
  }

  json manifest{{"tool", kToolName},
                {"version", kToolVersion},
                {"subcommand", sub},
                {"config", cfg},
                {"seed", cfg.is_object() ? json(seed_of(cfg)) : json(nullptr)},
                {"threads", threads},
                {"rng", Rng::kAlgorithm},
                {"started_at", started},
                {"finished_at", utc_now()},
                {"exit_code", code},
                {"outputs", dir.digests()}};
  try {
    dir.write_json("manifest.json", manifest);
  } catch (const std::exception& e) {
    log.error(e.what());
    return code == kOk ? kValidationFailure : code;
  }
  out << (dir.path() / "result.json").string() << '\n';
  return code;
}

}  // namespace sdecay::cli
