#include "parahom/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "parahom/error.hpp"

namespace parahom {

using json = nlohmann::json;

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

[[noreturn]] void invalid(const std::string& key, const std::string& reason) {
  throw Error(ErrorCode::ValidationError, key + ": " + reason);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Number (optionally a fraction a/b), boolean, quoted or bare string.
json parse_scalar(const std::string& s, int line) {
  if (s.empty()) parse_error(line, "empty value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') parse_error(line, "unterminated string");
    return s.substr(1, s.size() - 2);
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const auto num = parse_double(trim(std::string_view(s).substr(0, slash)));
    const auto den = parse_double(trim(std::string_view(s).substr(slash + 1)));
    if (num && den) {
      if (*den == 0.0) parse_error(line, "zero denominator in '" + s + "'");
      return *num / *den;
    }
    return s;
  }
  if (const auto v = parse_double(s)) return *v;
  return s;
}

json parse_value(const std::string& s, int line) {
  if (s.empty() || s.front() != '[') return parse_scalar(s, line);
  if (s.back() != ']') parse_error(line, "list is missing ']'");
  json list = json::array();
  const std::string body = trim(std::string_view(s).substr(1, s.size() - 2));
  if (body.empty()) return list;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) list.push_back(parse_scalar(trim(item), line));
  return list;
}

json parse_text(std::string_view text) {
  json tree = json::object();
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    // Comments start at '#' or ';' outside quotes.
    bool quoted = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') quoted = !quoted;
      if (!quoted && (raw[i] == '#' || raw[i] == ';')) {
        cut = i;
        break;
      }
    }
    const std::string s = trim(std::string_view(raw).substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') parse_error(line, "section header is missing ']'");
      section = trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty()) parse_error(line, "empty section name");
      if (!tree.contains(section)) tree[section] = json::object();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) parse_error(line, "expected 'key = value'");
    std::string key = trim(std::string_view(s).substr(0, eq));
    std::string sec = section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      if (!section.empty()) parse_error(line, "qualified key '" + key + "' inside section [" + section + "]");
      sec = key.substr(0, dot);
      key = key.substr(dot + 1);
    }
    if (sec.empty()) parse_error(line, "key '" + key + "' outside any section");
    if (key.empty()) parse_error(line, "empty key");
    json& node = tree[sec];
    if (node.contains(key)) parse_error(line, "duplicate key " + sec + "." + key);
    node[key] = parse_value(trim(std::string_view(s).substr(eq + 1)), line);
  }
  return tree;
}

// Typed readers over one section; every key read is ticked off so leftovers
// can be reported.
class SectionReader {
 public:
  SectionReader(const json& tree, std::string name) : name_(std::move(name)) {
    if (tree.contains(name_)) {
      node_ = tree.at(name_);
      if (!node_.is_object()) invalid(name_, "must be a section");
    } else {
      node_ = json::object();
    }
  }

  void number(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) invalid(path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, int& out) {
    double v = out;
    number(key, v);
    if (v != std::floor(v) || std::abs(v) > 1e9) invalid(path(key), "expected an integer");
    out = int(v);
  }
  void unsigned64(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
      else if (v->is_number() && v->get<double>() >= 0 && v->get<double>() == std::floor(v->get<double>()))
        out = std::uint64_t(v->get<double>());
      else invalid(path(key), "expected a non-negative integer");
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) invalid(path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) invalid(path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void numbers(const char* key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      out.clear();
      if (v->is_number()) {
        out.push_back(v->get<double>());
        return;
      }
      if (!v->is_array()) invalid(path(key), "expected a number or a list of numbers");
      for (const auto& x : *v) {
        if (!x.is_number()) invalid(path(key), "expected a list of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void strings(const char* key, std::vector<std::string>& out) {
    if (const json* v = find(key)) {
      out.clear();
      if (v->is_string()) {
        out.push_back(v->get<std::string>());
        return;
      }
      if (!v->is_array()) invalid(path(key), "expected a list of strings");
      for (const auto& x : *v) {
        if (!x.is_string()) invalid(path(key), "expected a list of strings");
        out.push_back(x.get<std::string>());
      }
    }
  }
  void optional_number(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_string() && v->get<std::string>() == "auto") out.reset();
      else if (v->is_number()) out = v->get<double>();
      else invalid(path(key), "expected a number or 'auto'");
    }
  }

  void finish() const {
    for (const auto& [k, v] : node_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) invalid(path(k.c_str()), "unknown key");
  }

 private:
  const json* find(const char* key) {
    seen_.push_back(key);
    return node_.contains(key) ? &node_.at(key) : nullptr;
  }
  std::string path(const char* key) const { return name_ + "." + key; }

  std::string name_;
  json node_;
  std::vector<std::string> seen_;
};

bool geometric(const std::vector<double>& v) {
  if (v.size() < 3) return true;
  const double q = v[1] / v[0];
  for (std::size_t i = 2; i < v.size(); ++i)
    if (std::abs(v[i] / v[i - 1] / q - 1.0) > 1e-6) return false;
  return true;
}

void validate(ExperimentConfig& c) {
  auto& p = c.problem;
  if (p.d != 1 && p.d != 2) invalid("problem.d", "must be 1 or 2");
  if (p.k.empty()) invalid("problem.k", "needs at least one value");
  for (double k : p.k)
    if (!(k > 0.0) || !std::isfinite(k)) invalid("problem.k", "values must be positive");
  const auto families = builtin_families();
  if (std::find(families.begin(), families.end(), p.coefficient) == families.end())
    invalid("problem.coefficient", "unknown family '" + p.coefficient + "'");
  if (p.params.empty()) p.params = default_params(p.coefficient);
  try {
    (void)builtin_field(p.coefficient, p.params, p.d);
  } catch (const Error& e) {
    invalid("problem.params", e.what());
  }
  if (!(p.T > 0.0) || !std::isfinite(p.T)) invalid("problem.T", "must be positive");

  if (c.cell.n_y < 4) invalid("cell.n_y", "must be at least 4");
  if (c.cell.n_s_base < 4) invalid("cell.n_s_base", "must be at least 4");
  if (!(c.cell.period_tol > 0.0)) invalid("cell.period_tol", "must be positive");
  if (!(c.cell.cg_tol > 0.0)) invalid("cell.cg_tol", "must be positive");
  if (c.cell.max_periods < 1) invalid("cell.max_periods", "must be at least 1");

  if (c.ivp.scheme != "crank-nicolson" && c.ivp.scheme != "implicit-euler")
    invalid("ivp.scheme", "must be crank-nicolson or implicit-euler");
  if (!(c.ivp.points_per_eps > 0.0)) invalid("ivp.points_per_eps", "must be positive");
  if (!(c.ivp.steps_per_scale > 0.0)) invalid("ivp.steps_per_scale", "must be positive");

  const auto& eps = c.ladders.eps;
  if (eps.empty()) invalid("ladders.eps", "needs at least one value");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0 && eps[i] < 1.0)) invalid("ladders.eps", "values must lie in (0, 1)");
    if (i > 0 && !(eps[i] < eps[i - 1])) invalid("ladders.eps", "must be sorted from largest to smallest");
  }
  if (!geometric(eps)) invalid("ladders.eps", "must be geometric");
  const auto& lam = c.ladders.lambda;
  if (lam.empty()) invalid("ladders.lambda", "needs at least one value");
  for (std::size_t i = 0; i < lam.size(); ++i) {
    if (!(lam[i] > 0.0) || !std::isfinite(lam[i])) invalid("ladders.lambda", "values must be positive");
    if (i > 0 && !(lam[i] > lam[i - 1])) invalid("ladders.lambda", "must be sorted from smallest to largest");
  }
  if (!geometric(lam)) invalid("ladders.lambda", "must be geometric");

  auto& h = c.harness;
  if (h.slope_tol && !(*h.slope_tol >= 0.0)) invalid("harness.slope_tol", "must be non-negative or auto");
  if (!(h.floor_tol > 0.0)) invalid("harness.floor_tol", "must be positive");
  if (h.threads < 1) invalid("harness.threads", "must be at least 1");
  if (h.tensor_mode != "lambda" && h.tensor_mode != "infinity" && h.tensor_mode != "zero")
    invalid("harness.tensor_mode", "must be lambda, infinity or zero");
  if (!(h.lambda > 0.0) || !std::isfinite(h.lambda)) invalid("harness.lambda", "must be positive");
  if (h.anchor.size() != 3) invalid("harness.anchor", "expected [x1, x2, t]");
  if (!(h.anchor[0] > 0.0 && h.anchor[0] < 1.0 && h.anchor[1] > 0.0 && h.anchor[1] < 1.0))
    invalid("harness.anchor", "spatial anchor must lie inside (0,1)^2");
  if (!(h.R > 0.0)) invalid("harness.R", "must be positive");
  if (!(h.p > p.d + 2)) invalid("harness.p", "must exceed d + 2");
  if (h.n_radii < 2) invalid("harness.n_radii", "must be at least 2");
  if (h.order != 1 && h.order != 2) invalid("harness.order", "must be 1 or 2");
  for (double v : {h.sweep_high_max, h.sweep_low_min, h.lipschitz_variation, h.flatness_tol, h.alpha_floor})
    if (!std::isfinite(v)) invalid("harness", "thresholds must be finite");

  if (c.output.directory.empty()) invalid("output.directory", "must not be empty");
  for (const auto& f : c.output.formats)
    if (f != "json" && f != "csv") invalid("output.formats", "supported formats are json and csv");
}

ExperimentConfig from_tree(const json& tree) {
  if (!tree.is_object()) invalid("config", "top level must be a set of sections");
  for (const auto& [k, v] : tree.items())
    if (k != "problem" && k != "cell" && k != "ivp" && k != "ladders" && k != "harness" && k != "output")
      invalid(k, "unknown section");
  ExperimentConfig c;
  {
    SectionReader r(tree, "problem");
    r.integer("d", c.problem.d);
    r.numbers("k", c.problem.k);
    r.text("coefficient", c.problem.coefficient);
    r.numbers("params", c.problem.params);
    r.number("T", c.problem.T);
    r.finish();
  }
  {
    SectionReader r(tree, "cell");
    r.integer("n_y", c.cell.n_y);
    r.integer("n_s_base", c.cell.n_s_base);
    r.number("period_tol", c.cell.period_tol);
    r.number("cg_tol", c.cell.cg_tol);
    r.integer("max_periods", c.cell.max_periods);
    r.finish();
  }
  {
    SectionReader r(tree, "ivp");
    r.text("scheme", c.ivp.scheme);
    r.number("points_per_eps", c.ivp.points_per_eps);
    r.number("steps_per_scale", c.ivp.steps_per_scale);
    r.finish();
  }
  {
    SectionReader r(tree, "ladders");
    r.numbers("eps", c.ladders.eps);
    r.numbers("lambda", c.ladders.lambda);
    r.finish();
  }
  {
    SectionReader r(tree, "harness");
    auto& h = c.harness;
    r.optional_number("slope_tol", h.slope_tol);
    r.number("floor_tol", h.floor_tol);
    r.integer("threads", h.threads);
    r.unsigned64("seed", h.seed);
    r.text("tensor_mode", h.tensor_mode);
    r.number("lambda", h.lambda);
    r.numbers("anchor", h.anchor);
    r.number("R", h.R);
    r.number("p", h.p);
    r.integer("n_radii", h.n_radii);
    r.integer("order", h.order);
    r.number("sweep_high_max", h.sweep_high_max);
    r.number("sweep_low_min", h.sweep_low_min);
    r.number("lipschitz_variation", h.lipschitz_variation);
    r.number("flatness_tol", h.flatness_tol);
    r.number("alpha_floor", h.alpha_floor);
    r.finish();
  }
  {
    SectionReader r(tree, "output");
    r.text("directory", c.output.directory);
    r.strings("formats", c.output.formats);
    r.boolean("plot", c.output.plot);
    r.finish();
  }
  validate(c);
  return c;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
  return s + "]";
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  const auto start = text.find_first_not_of(" \t\r\n");
  if (start != std::string_view::npos && text[start] == '{') {
    json tree;
    try {
      tree = json::parse(text);
    } catch (const json::parse_error& e) {
      // byte offset -> line
      const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
      const int line = 1 + int(std::count(text.begin(), text.begin() + std::ptrdiff_t(upto), '\n'));
      parse_error(line, e.what());
    }
    return from_tree(tree);
  }
  return from_tree(parse_text(text));
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& h = c.harness;
  os << "[problem]\n"
     << "d = " << c.problem.d << "\n"
     << "k = " << list(c.problem.k) << "\n"
     << "coefficient = " << quoted(c.problem.coefficient) << "\n"
     << "params = " << list(c.problem.params) << "\n"
     << "T = " << num(c.problem.T) << "\n\n"
     << "[cell]\n"
     << "n_y = " << c.cell.n_y << "\n"
     << "n_s_base = " << c.cell.n_s_base << "\n"
     << "period_tol = " << num(c.cell.period_tol) << "\n"
     << "cg_tol = " << num(c.cell.cg_tol) << "\n"
     << "max_periods = " << c.cell.max_periods << "\n\n"
     << "[ivp]\n"
     << "scheme = " << quoted(c.ivp.scheme) << "\n"
     << "points_per_eps = " << num(c.ivp.points_per_eps) << "\n"
     << "steps_per_scale = " << num(c.ivp.steps_per_scale) << "\n\n"
     << "[ladders]\n"
     << "eps = " << list(c.ladders.eps) << "\n"
     << "lambda = " << list(c.ladders.lambda) << "\n\n"
     << "[harness]\n"
     << "slope_tol = " << (h.slope_tol ? num(*h.slope_tol) : std::string("auto")) << "\n"
     << "floor_tol = " << num(h.floor_tol) << "\n"
     << "threads = " << h.threads << "\n"
     << "seed = " << h.seed << "\n"
     << "tensor_mode = " << quoted(h.tensor_mode) << "\n"
     << "lambda = " << num(h.lambda) << "\n"
     << "anchor = " << list(h.anchor) << "\n"
     << "R = " << num(h.R) << "\n"
     << "p = " << num(h.p) << "\n"
     << "n_radii = " << h.n_radii << "\n"
     << "order = " << h.order << "\n"
     << "sweep_high_max = " << num(h.sweep_high_max) << "\n"
     << "sweep_low_min = " << num(h.sweep_low_min) << "\n"
     << "lipschitz_variation = " << num(h.lipschitz_variation) << "\n"
     << "flatness_tol = " << num(h.flatness_tol) << "\n"
     << "alpha_floor = " << num(h.alpha_floor) << "\n\n"
     << "[output]\n"
     << "directory = " << quoted(c.output.directory) << "\n"
     << "formats = [";
  for (std::size_t i = 0; i < c.output.formats.size(); ++i) os << (i ? ", " : "") << quoted(c.output.formats[i]);
  os << "]\n"
     << "plot = " << (c.output.plot ? "true" : "false") << "\n";
  return os.str();
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& c, bool execution) {
  using oj = nlohmann::ordered_json;
  const auto& h = c.harness;
  oj j;
  j["problem"] = {{"d", c.problem.d},
                  {"k", c.problem.k},
                  {"coefficient", c.problem.coefficient},
                  {"params", c.problem.params},
                  {"T", c.problem.T}};
  j["cell"] = {{"n_y", c.cell.n_y},
               {"n_s_base", c.cell.n_s_base},
               {"period_tol", c.cell.period_tol},
               {"cg_tol", c.cell.cg_tol},
               {"max_periods", c.cell.max_periods}};
  j["ivp"] = {{"scheme", c.ivp.scheme},
              {"points_per_eps", c.ivp.points_per_eps},
              {"steps_per_scale", c.ivp.steps_per_scale}};
  j["ladders"] = {{"eps", c.ladders.eps}, {"lambda", c.ladders.lambda}};
  oj harness;
  if (h.slope_tol) harness["slope_tol"] = *h.slope_tol;
  else harness["slope_tol"] = "auto";
  harness["floor_tol"] = h.floor_tol;
  if (execution) harness["threads"] = h.threads;
  harness["seed"] = h.seed;
  harness["tensor_mode"] = h.tensor_mode;
  harness["lambda"] = h.lambda;
  harness["anchor"] = h.anchor;
  harness["R"] = h.R;
  harness["p"] = h.p;
  harness["n_radii"] = h.n_radii;
  harness["order"] = h.order;
  harness["sweep_high_max"] = h.sweep_high_max;
  harness["sweep_low_min"] = h.sweep_low_min;
  harness["lipschitz_variation"] = h.lipschitz_variation;
  harness["flatness_tol"] = h.flatness_tol;
  harness["alpha_floor"] = h.alpha_floor;
  j["harness"] = harness;
  oj output;
  if (execution) output["directory"] = c.output.directory;
  output["formats"] = c.output.formats;
  output["plot"] = c.output.plot;
  j["output"] = output;
  return j;
}

std::uint64_t config_digest(const ExperimentConfig& c) {
  // Canonical form: the emitted text without execution settings.
  ExperimentConfig canon = c;
  canon.harness.threads = 1;
  canon.output.directory = "out";
  return fnv1a(emit_config(canon));
}

// ---------------------------------------------------------------------------

CoefficientField ExperimentConfig::coefficient() const {
  return builtin_field(problem.coefficient, problem.params, problem.d);
}

Scheme ExperimentConfig::scheme() const {
  return ivp.scheme == "implicit-euler" ? Scheme::ImplicitEuler : Scheme::CrankNicolson;
}

ResolutionPolicy ExperimentConfig::policy() const { return {ivp.points_per_eps, ivp.steps_per_scale}; }

GridPolicy ExperimentConfig::grid_policy() const { return {problem.d, cell.n_y, cell.n_s_base}; }

SolverTolerances ExperimentConfig::tolerances() const {
  SolverTolerances t;
  t.period_tol = cell.period_tol;
  t.cg_tol = cell.cg_tol;
  t.max_periods = cell.max_periods;
  return t;
}

double ExperimentConfig::slope_tol_for(double k) const {
  return harness.slope_tol ? *harness.slope_tol : default_slope_tol(k);
}

RateOptions ExperimentConfig::rate_options() const {
  RateOptions o;
  o.d = problem.d;
  o.T = problem.T;
  o.scheme = scheme();
  o.policy = policy();
  o.cell = grid_policy();
  o.tol = tolerances();
  o.slope_tol = harness.slope_tol ? *harness.slope_tol : -1.0;
  o.floor_tol = harness.floor_tol;
  o.threads = harness.threads;
  return o;
}

ProfileOptions ExperimentConfig::profile_options() const {
  ProfileOptions o;
  o.d = problem.d;
  o.T = problem.T;
  o.scheme = scheme();
  o.policy = policy();
  o.cell = grid_policy();
  o.tol = tolerances();
  o.anchor.x = {harness.anchor[0], harness.anchor[1]};
  o.anchor.t = harness.anchor[2];
  o.R = harness.R;
  o.p = harness.p;
  o.n_radii = harness.n_radii;
  return o;
}

}  // namespace parahom
