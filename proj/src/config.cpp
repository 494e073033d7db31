#include "rfp/config.hpp"

#include "rfp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace rfp::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a number, got '" + v + "'");
  return x;
}

int to_int(const std::string& v) {
  int x = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}
std::string fmt(int x) { return std::to_string(x); }
std::string fmt(bool x) { return x ? "true" : "false"; }

// Two-way mapping between an enum and its spelling.
template <class E>
struct Names {
  std::vector<std::pair<E, std::string>> entries;

  E parse(const std::string& v, const std::string& key) const {
    for (const auto& [e, s] : entries)
      if (s == v) return e;
    std::string options;
    for (const auto& [e, s] : entries) options += (options.empty() ? "" : ", ") + s;
    throw ConfigError(key + ": unknown value '" + v + "' (expected " + options + ")");
  }
  std::string name(E e) const {
    for (const auto& [x, s] : entries)
      if (x == e) return s;
    throw InternalError("unnamed enum value");
  }
};

const Names<disc::AdvectionScheme> kAdvection{
    {{disc::AdvectionScheme::MUSCL, "muscl"}, {disc::AdvectionScheme::QUICK, "quick"}}};
const Names<disc::Limiter> kLimiter{
    {{disc::Limiter::Minmod, "minmod"}, {disc::Limiter::VanLeer, "vanleer"}}};
const Names<BoundaryMode> kBoundary{{{BoundaryMode::Physical, "physical"},
                                     {BoundaryMode::Mms, "mms"},
                                     {BoundaryMode::ZeroFlux, "zero_flux"}}};
const Names<disc::CollisionModel> kCollisions{{{disc::CollisionModel::Physical, "physical"},
                                               {disc::CollisionModel::Constant, "constant"},
                                               {disc::CollisionModel::Off, "off"}}};
const Names<InitialKind> kInitial{{{InitialKind::Maxwellian, "maxwellian"},
                                   {InitialKind::MaxwellianTail, "maxwellian_tail"},
                                   {InitialKind::Bump, "bump"},
                                   {InitialKind::Mms, "mms"}}};
const Names<MmsSolution> kMms{{{MmsSolution::SinExp, "sin_exp"},
                               {MmsSolution::Sin, "sin"},
                               {MmsSolution::Cos2, "cos2"},
                               {MmsSolution::Exponential, "exponential"}}};
const Names<IntegratorKind> kIntegrator{
    {{IntegratorKind::SspRk3, "ssp-rk3"}, {IntegratorKind::Esdirk2, "esdirk2"}}};
const Names<PreconditionerKind> kPrecond{{{PreconditionerKind::None, "none"},
                                          {PreconditionerKind::Jacobi, "jacobi"},
                                          {PreconditionerKind::LowOrderLu, "low_order_lu"}}};
const Names<OutputFormat> kFormat{{{OutputFormat::None, "none"},
                                   {OutputFormat::Csv, "csv"},
                                   {OutputFormat::Vtk, "vtk"},
                                   {OutputFormat::Both, "both"}}};
const Names<amr::IndicatorVariant> kVariant{{{amr::IndicatorVariant::GS, "gs"},
                                             {amr::IndicatorVariant::LGS, "lgs"},
                                             {amr::IndicatorVariant::LDR, "ldr"}}};

struct KeyDef {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RFP_NUM(KEY, member)                                                         \
  KeyDef {                                                                            \
    KEY, [](RunConfig& c, const std::string& v) { c.member = to_double(v); },        \
        [](const RunConfig& c) { return fmt(c.member); }                              \
  }
#define RFP_INT(KEY, member)                                                         \
  KeyDef {                                                                            \
    KEY, [](RunConfig& c, const std::string& v) { c.member = to_int(v); },           \
        [](const RunConfig& c) { return fmt(c.member); }                              \
  }
#define RFP_BOOL(KEY, member)                                                        \
  KeyDef {                                                                            \
    KEY, [](RunConfig& c, const std::string& v) { c.member = to_bool(v); },          \
        [](const RunConfig& c) { return fmt(c.member); }                              \
  }
#define RFP_ENUM(KEY, member, table)                                                 \
  KeyDef {                                                                            \
    KEY, [](RunConfig& c, const std::string& v) { c.member = table.parse(v, KEY); }, \
        [](const RunConfig& c) { return table.name(c.member); }                       \
  }

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      RFP_NUM("domain.p_min", box.p_min),
      RFP_NUM("domain.p_max", box.p_max),
      RFP_INT("mesh.n_p", n_p),
      RFP_INT("mesh.n_xi", n_xi),
      RFP_INT("mesh.min_level", levels.min_level),
      RFP_INT("mesh.max_level", levels.max_level),
      RFP_ENUM("scheme.advection", scheme.advection, kAdvection),
      RFP_ENUM("scheme.limiter", scheme.limiter, kLimiter),
      RFP_BOOL("scheme.positivity", scheme.positivity),
      RFP_ENUM("boundary.mode", boundary, kBoundary),
      RFP_NUM("physics.E", params.E),
      RFP_NUM("physics.alpha", params.alpha),
      RFP_NUM("physics.vt_hat", params.vt_hat),
      RFP_NUM("physics.Z", params.Z),
      RFP_NUM("physics.lnLambda", params.lnLambda),
      RFP_BOOL("physics.knock_on", params.knock_on_enabled),
      RFP_ENUM("physics.collisions", collisions, kCollisions),
      RFP_NUM("physics.collision_eps", collision_eps),
      RFP_ENUM("initial.kind", initial, kInitial),
      RFP_NUM("initial.tail_amplitude", tail.amplitude),
      RFP_NUM("initial.tail_p0", tail.p0),
      RFP_NUM("initial.tail_p_width2", tail.p_width2),
      RFP_NUM("initial.tail_xi0", tail.xi0),
      RFP_NUM("initial.tail_xi_width2", tail.xi_width2),
      RFP_ENUM("mms.solution", mms_solution, kMms),
      KeyDef{"mms.setups",
             [](RunConfig& c, const std::string& v) {
               c.mms_setups.clear();
               if (v.empty()) return;
               for (const auto& item : split(v, ',')) {
                 const auto parts = split(item, ':');
                 if (parts.size() != 3)
                   throw ConfigError("mms.setups: expected min:max:dt items, got '" + item + "'");
                 c.mms_setups.push_back({to_int(parts[0]), to_int(parts[1]), to_double(parts[2])});
               }
             },
             [](const RunConfig& c) {
               std::string s;
               for (const auto& m : c.mms_setups)
                 s += (s.empty() ? "" : ", ") + fmt(m.min_level) + ":" + fmt(m.max_level) + ":" +
                      fmt(m.dt);
               return s;
             }},
      RFP_NUM("mms.adapt_interval", mms_adapt_interval),
      RFP_NUM("mms.threshold_scale", mms_threshold_scale),
      RFP_ENUM("integrator.method", integrator, kIntegrator),
      RFP_NUM("time.t_final", t_final),
      RFP_NUM("time.dt_init", dt_init),
      RFP_BOOL("time.adaptive", adaptive_dt),
      RFP_NUM("solver.newton_rtol", solver.newton_rtol),
      RFP_NUM("solver.newton_atol", solver.newton_atol),
      RFP_INT("solver.newton_max_iters", solver.newton_max_iters),
      RFP_NUM("solver.gmres_rtol", solver.gmres_rtol),
      RFP_INT("solver.gmres_restart", solver.gmres_restart),
      RFP_INT("solver.gmres_max_iters", solver.gmres_max_iters),
      RFP_NUM("solver.jfnk_perturbation_scale", solver.jfnk_perturbation_scale),
      RFP_NUM("solver.step_tol", solver.step_tol),
      RFP_NUM("solver.step_atol", solver.step_atol),
      RFP_NUM("solver.step_safety", solver.step_safety),
      RFP_NUM("solver.dt_min", solver.dt_min),
      RFP_NUM("solver.dt_max", solver.dt_max),
      RFP_ENUM("solver.preconditioner", preconditioner, kPrecond),
      RFP_BOOL("solver.clamp_after_step", clamp_after_step),
      RFP_BOOL("amr.enabled", amr_enabled),
      RFP_ENUM("amr.indicator", amr.variant, kVariant),
      RFP_NUM("amr.chi_min", amr.chi_min),
      RFP_NUM("amr.chi_max", amr.chi_max),
      RFP_INT("amr.n_adapt", amr.n_adapt),
      RFP_INT("amr.n_pred", amr.n_pred),
      RFP_NUM("amr.epsilon", amr.epsilon),
      RFP_NUM("amr.cfl", amr.cfl),
      RFP_INT("amr.initial_passes", initial_passes),
      KeyDef{"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
             [](const RunConfig& c) { return c.output_dir; }},
      RFP_INT("output.snapshot_every", snapshot_every),
      RFP_ENUM("output.format", output_format, kFormat),
      RFP_BOOL("output.logs", write_logs),
      KeyDef{"study.frequencies",
             [](RunConfig& c, const std::string& v) {
               c.study_frequencies.clear();
               if (v.empty()) return;
               for (const auto& item : split(v, ',')) c.study_frequencies.push_back(to_int(item));
             },
             [](const RunConfig& c) {
               std::string s;
               for (int f : c.study_frequencies) s += (s.empty() ? "" : ", ") + fmt(f);
               return s;
             }},
      RFP_NUM("study.average_from", study_average_from),
      RFP_INT("run.threads", threads),
  };
  return table;
}

#undef RFP_NUM
#undef RFP_INT
#undef RFP_BOOL
#undef RFP_ENUM

const KeyDef* lookup(const std::string& key) {
  for (const auto& k : key_table())
    if (k.key == key) return &k;
  return nullptr;
}

const std::vector<std::string> kRequired = {"domain.p_min", "domain.p_max", "time.t_final"};

std::pair<std::string, std::string> split_assignment(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("expected 'key = value'");
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key");
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    value = value.substr(1, value.size() - 2);
  return {key, value};
}

}  // namespace

void validate(const RunConfig& c) {
  c.box.validate();
  if (c.n_p < 1 || c.n_xi < 1) throw ConfigError("mesh.n_p and mesh.n_xi must be >= 1");
  if (c.n_p > mesh::kMaxRootTrees || c.n_xi > mesh::kMaxRootTrees)
    throw ConfigError("root grid exceeds the supported tree count");
  c.levels.validate();
  c.params.validate();
  c.solver.validate();
  c.amr.validate();
  if (!(c.collision_eps >= 0.0)) throw ConfigError("physics.collision_eps must be >= 0");
  if (!(c.t_final >= 0.0)) throw ConfigError("time.t_final must be >= 0");
  if (!(c.dt_init > 0.0)) throw ConfigError("time.dt_init must be > 0");
  if (c.snapshot_every < 0) throw ConfigError("output.snapshot_every must be >= 0");
  if (c.threads < 0) throw ConfigError("run.threads must be >= 0");
  if (c.initial_passes < -1) throw ConfigError("amr.initial_passes must be >= -1");
  if (!(c.tail.p_width2 > 0.0 && c.tail.xi_width2 > 0.0))
    throw ConfigError("initial tail widths must be > 0");
  if (!(c.mms_adapt_interval > 0.0)) throw ConfigError("mms.adapt_interval must be > 0");
  if (!(c.mms_threshold_scale > 0.0 && c.mms_threshold_scale <= 1.0))
    throw ConfigError("mms.threshold_scale must lie in (0, 1]");
  for (const auto& s : c.mms_setups) {
    mesh::LevelBounds{s.min_level, s.max_level}.validate();
    if (!(s.dt > 0.0)) throw ConfigError("mms.setups: dt must be > 0");
  }
  for (int f : c.study_frequencies)
    if (f < 1) throw ConfigError("study.frequencies must be >= 1");

  const bool mms = c.boundary == BoundaryMode::Mms;
  if (mms != (c.initial == InitialKind::Mms))
    throw ConfigError("boundary.mode = mms and initial.kind = mms must be used together");
  if (mms) {
    if (c.params.knock_on_enabled) throw ConfigError("mms mode forbids physics.knock_on");
    if (c.params.alpha != 0.0) throw ConfigError("mms mode requires physics.alpha = 0");
    const bool with_decay = c.mms_solution == MmsSolution::SinExp;
    if (with_decay && c.collisions != disc::CollisionModel::Constant)
      throw ConfigError("mms.solution = sin_exp requires physics.collisions = constant");
    if (!with_decay && c.collisions != disc::CollisionModel::Off)
      throw ConfigError("pure advection manufactured solutions require physics.collisions = off");
    if (c.scheme.positivity)
      throw ConfigError("mms mode requires scheme.positivity = false (signed solutions)");
    if (c.params.E != 0.0 && c.box.xi_min != -1.0)
      throw ConfigError("mms mode requires the full pitch range");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    try {
      const auto [key, value] = split_assignment(line);
      const KeyDef* def = lookup(key);
      if (!def) throw ConfigError("unknown key '" + key + "'");
      if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
      def->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (const auto& k : kRequired)
    if (!seen.count(k)) throw ConfigError("missing required key '" + k + "'");
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto [key, value] = split_assignment(assignment);
  const KeyDef* def = lookup(key);
  if (!def) throw ConfigError("override: unknown key '" + key + "'");
  def->set(cfg, value);
  validate(cfg);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& k : key_table()) {
    const std::string sec = k.key.substr(0, k.key.find('.'));
    if (sec != section) {
      if (!section.empty()) out += "\n";
      section = sec;
    }
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& k : key_table()) keys.push_back(k.key);
  return keys;
}

std::string to_string(BoundaryMode m) { return kBoundary.name(m); }
std::string to_string(IntegratorKind k) { return kIntegrator.name(k); }
std::string to_string(MmsSolution s) { return kMms.name(s); }

}  // namespace rfp::cli
