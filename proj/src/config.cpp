#include "blendsa/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "blendsa/error.hpp"

namespace blendsa {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ParseError(path + ": " + message);
}

const json& require(const json& j, const char* key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing required key '") + key + "'");
  return *it;
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    fail(path, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(j.get<long long>());
}

std::vector<std::string> as_string_list(const json& j,
                                        const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(as_string(j[i], path + "/" + std::to_string(i)));
  }
  return out;
}

Sensitivity parse_sensitivity(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  Sensitivity s;
  const std::string kind = as_string(require(j, "kind", path), path + "/kind");
  if (kind == "none") {
    s.kind = SensitivityKind::None;
    return s;
  }
  if (kind == "ipw_linear") {
    s.kind = SensitivityKind::IpwLinear;
  } else if (kind == "mi_shift") {
    s.kind = SensitivityKind::MiShift;
  } else {
    fail(path + "/kind",
         "unknown kind '" + kind + "' (expected none, ipw_linear, mi_shift)");
  }
  s.target = as_string(require(j, "target", path), path + "/target");
  if (j.contains("scale")) {
    s.scale = as_number(j["scale"], path + "/scale");
  }
  return s;
}

SubMechanism parse_mechanism(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  SubMechanism m;
  m.name = as_string(require(j, "name", path), path + "/name");
  const std::string method =
      as_string(require(j, "method", path), path + "/method");
  if (method == "ipw") {
    m.method = Method::Ipw;
  } else if (method == "mi") {
    m.method = Method::Mi;
  } else if (method == "cox") {
    m.method = Method::CoxIpw;
  } else {
    fail(path + "/method",
         "unknown method '" + method + "' (expected ipw, mi, cox)");
  }
  m.indicator = as_string(require(j, "indicator", path), path + "/indicator");
  if (j.contains("variables")) {
    m.variables = as_string_list(j["variables"], path + "/variables");
  }
  if (j.contains("selection_model")) {
    m.selection_model =
        as_string(j["selection_model"], path + "/selection_model");
  }
  if (j.contains("imputation")) {
    const json& models = j["imputation"];
    if (!models.is_array()) fail(path + "/imputation", "expected an array");
    for (std::size_t i = 0; i < models.size(); ++i) {
      const std::string ipath = path + "/imputation/" + std::to_string(i);
      const json& mj = models[i];
      if (!mj.is_object()) fail(ipath, "expected an object");
      ImputationModel im;
      im.variable =
          as_string(require(mj, "variable", ipath), ipath + "/variable");
      im.formulas =
          as_string_list(require(mj, "formulas", ipath), ipath + "/formulas");
      m.imputation.push_back(std::move(im));
    }
  }
  if (j.contains("sensitivity")) {
    m.sensitivity = parse_sensitivity(j["sensitivity"], path + "/sensitivity");
  }
  if (j.contains("time")) m.time = as_string(j["time"], path + "/time");
  if (j.contains("event")) m.event = as_string(j["event"], path + "/event");
  if (j.contains("hazard_model")) {
    m.hazard_model = as_string(j["hazard_model"], path + "/hazard_model");
  }
  if (j.contains("horizon")) {
    m.horizon = as_number(j["horizon"], path + "/horizon");
  }
  return m;
}

AnalysisPlan parse_plan(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  AnalysisPlan plan;
  const json& mechs = require(j, "mechanisms", path);
  if (!mechs.is_array() || mechs.empty()) {
    fail(path + "/mechanisms", "expected a nonempty array");
  }
  for (std::size_t i = 0; i < mechs.size(); ++i) {
    plan.mechanisms.push_back(
        parse_mechanism(mechs[i], path + "/mechanisms/" + std::to_string(i)));
  }
  plan.analysis_model = as_string(require(j, "analysis_model", path),
                                  path + "/analysis_model");
  return plan;
}

std::vector<double> parse_axis_grid(const json& j, const std::string& path) {
  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (!g.is_array() || g.empty()) {
      fail(path + "/grid", "expected a nonempty array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < g.size(); ++i) {
      out.push_back(as_number(g[i], path + "/grid/" + std::to_string(i)));
    }
    return out;
  }
  if (j.contains("from") || j.contains("to") || j.contains("step")) {
    const double from = as_number(require(j, "from", path), path + "/from");
    const double to = as_number(require(j, "to", path), path + "/to");
    const double step = as_number(require(j, "step", path), path + "/step");
    try {
      return expand_grid(from, to, step);
    } catch (const ParseError& e) {
      fail(path, e.what());
    }
  }
  return {};  // default grid chosen later from the mechanism's method
}

json config_json_from_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("config: not valid JSON");
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  return j;
}

}  // namespace

std::vector<double> expand_grid(double from, double to, double step) {
  if (!std::isfinite(from) || !std::isfinite(to) || !std::isfinite(step)) {
    throw ParseError("grid bounds and step must be finite");
  }
  if (!(step > 0.0)) throw ParseError("grid step must be positive");
  if (to < from) throw ParseError("grid upper bound is below the lower bound");
  const double span = (to - from) / step;
  if (span > 1e6) throw ParseError("grid has over a million points");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    double v = from + static_cast<double>(k) * step;
    if (std::abs(v) < step * 1e-6) v = 0.0;  // snap the reference point
    out.push_back(v);
  }
  return out;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string cur;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const char c = spec[i];
    // ':' splits, except a leading '-' sign binds to the number after it.
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) {
    throw ParseError("grid spec must be lo:hi:step, got '" + spec + "'");
  }
  double v[3];
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      v[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("grid spec must be lo:hi:step, got '" + spec + "'");
    }
  }
  return expand_grid(v[0], v[1], v[2]);
}

std::vector<double> default_grid(Method method) {
  if (method == Method::Mi) return expand_grid(-6.0, 6.0, 0.3);
  return expand_grid(-2.0, 2.0, 0.1);
}

AnalysisPlan plan_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("/plan: not valid JSON");
  return parse_plan(j, "/plan");
}

std::string plan_to_json(const AnalysisPlan& plan) {
  json mechs = json::array();
  for (const SubMechanism& m : plan.mechanisms) {
    json mj;
    mj["name"] = m.name;
    mj["method"] = m.method == Method::Ipw
                       ? "ipw"
                       : (m.method == Method::Mi ? "mi" : "cox");
    mj["indicator"] = m.indicator;
    if (!m.variables.empty()) mj["variables"] = m.variables;
    if (!m.selection_model.empty()) mj["selection_model"] = m.selection_model;
    if (!m.imputation.empty()) {
      json models = json::array();
      for (const ImputationModel& im : m.imputation) {
        json imj;
        imj["variable"] = im.variable;
        imj["formulas"] = im.formulas;
        models.push_back(std::move(imj));
      }
      mj["imputation"] = std::move(models);
    }
    if (m.sensitivity.kind != SensitivityKind::None) {
      json sj;
      sj["kind"] = m.sensitivity.kind == SensitivityKind::IpwLinear
                       ? "ipw_linear"
                       : "mi_shift";
      sj["target"] = m.sensitivity.target;
      sj["scale"] = m.sensitivity.scale;
      mj["sensitivity"] = std::move(sj);
    }
    if (!m.time.empty()) mj["time"] = m.time;
    if (!m.event.empty()) mj["event"] = m.event;
    if (!m.hazard_model.empty()) mj["hazard_model"] = m.hazard_model;
    if (m.method == Method::CoxIpw) mj["horizon"] = m.horizon;
    mechs.push_back(std::move(mj));
  }
  json j;
  j["mechanisms"] = std::move(mechs);
  j["analysis_model"] = plan.analysis_model;
  return j.dump(2);
}

RunConfig parse_config_text(const std::string& text) {
  const json j = config_json_from_text(text);
  RunConfig c;
  c.dataset = as_string(require(j, "dataset", ""), "/dataset");
  c.schema = as_string(require(j, "schema", ""), "/schema");
  c.plan = parse_plan(require(j, "plan", ""), "/plan");
  if (j.contains("delta")) {
    const json& d = j["delta"];
    if (!d.is_object()) fail("/delta", "expected an object of name: value");
    for (const auto& [key, val] : d.items()) {
      c.delta[key] = as_number(val, "/delta/" + key);
    }
  }
  if (j.contains("axes")) {
    const json& axes = j["axes"];
    if (!axes.is_array()) fail("/axes", "expected an array");
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const std::string path = "/axes/" + std::to_string(i);
      const json& aj = axes[i];
      if (!aj.is_object()) fail(path, "expected an object");
      DeltaAxis ax;
      ax.mechanism =
          as_string(require(aj, "mechanism", path), path + "/mechanism");
      ax.grid = parse_axis_grid(aj, path);
      c.axes.push_back(std::move(ax));
    }
  }
  if (j.contains("M")) c.M = as_count(j["M"], "/M");
  if (j.contains("B")) c.B = as_count(j["B"], "/B");
  if (j.contains("alpha")) c.alpha = as_number(j["alpha"], "/alpha");
  if (!j.contains("seed")) {
    fail("/seed", "missing required key 'seed' (runs must be reproducible)");
  }
  if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) {
    fail("/seed", "expected a non-negative integer");
  }
  c.seed = static_cast<std::uint64_t>(j["seed"].get<long long>());
  c.seed_set = true;
  if (j.contains("out")) c.out = as_string(j["out"], "/out");
  if (j.contains("threads")) {
    c.threads = static_cast<int>(as_count(j["threads"], "/threads"));
  }
  if (j.contains("weight_cap")) {
    c.weight_cap = as_number(j["weight_cap"], "/weight_cap");
  }
  if (j.contains("per_cell_ci")) {
    c.per_cell_ci = as_bool(j["per_cell_ci"], "/per_cell_ci");
  }
  if (j.contains("full_grid")) {
    c.full_grid = as_bool(j["full_grid"], "/full_grid");
  }
  if (j.contains("coefficient")) {
    c.coefficient = as_string(j["coefficient"], "/coefficient");
  }
  if (j.contains("search_interval")) {
    const json& s = j["search_interval"];
    if (!s.is_array() || s.size() != 2) {
      fail("/search_interval", "expected [lo, hi]");
    }
    c.search_interval = {as_number(s[0], "/search_interval/0"),
                         as_number(s[1], "/search_interval/1")};
  }
  if (c.M == 0) fail("/M", "must be at least 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("/alpha", "must be in (0, 1)");
  if (c.weight_cap < 0.0) fail("/weight_cap", "must be non-negative");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace blendsa
