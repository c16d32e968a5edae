#include "gne/config.hpp"

#include <toml.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace gne {

namespace {

std::string join_problems(const std::vector<std::string>& p) {
  std::string s = "invalid configuration:";
  for (const auto& x : p) s += "\n  " + x;
  return s;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : ValidationError(join_problems(problems)), problems_(std::move(problems)) {}

std::string code_version() { return GNE_ESC_VERSION; }

// ---------------------------------------------------------------- toml <-> json

namespace {

Json from_toml(const toml::node& node, const std::string& where) {
  if (auto t = node.as_table()) {
    Json j = Json::object();
    for (auto&& [k, v] : *t) j[std::string(k.str())] = from_toml(v, where);
    return j;
  }
  if (auto a = node.as_array()) {
    Json j = Json::array();
    for (auto&& v : *a) j.push_back(from_toml(v, where));
    return j;
  }
  if (auto v = node.as_integer()) return Json(v->get());
  if (auto v = node.as_floating_point()) return Json(v->get());
  if (auto v = node.as_boolean()) return Json(v->get());
  if (auto v = node.as_string()) return Json(v->get());
  throw ConfigError({where + ": date/time values are not supported"});
}

void insert_toml(toml::table& t, const std::string& key, const Json& v);

toml::array to_toml_array(const Json& arr) {
  toml::array a;
  for (const auto& v : arr) {
    if (v.is_object()) {
      toml::table sub;
      for (auto it = v.begin(); it != v.end(); ++it) insert_toml(sub, it.key(), it.value());
      a.push_back(std::move(sub));
    } else if (v.is_array()) {
      a.push_back(to_toml_array(v));
    } else if (v.is_boolean()) {
      a.push_back(v.get<bool>());
    } else if (v.is_number_integer()) {
      a.push_back(v.get<std::int64_t>());
    } else if (v.is_number()) {
      a.push_back(v.get<double>());
    } else if (v.is_string()) {
      a.push_back(v.get<std::string>());
    }
  }
  return a;
}

void insert_toml(toml::table& t, const std::string& key, const Json& v) {
  if (v.is_null()) return;
  if (v.is_object()) {
    toml::table sub;
    for (auto it = v.begin(); it != v.end(); ++it) insert_toml(sub, it.key(), it.value());
    t.insert_or_assign(key, std::move(sub));
  } else if (v.is_array()) {
    t.insert_or_assign(key, to_toml_array(v));
  } else if (v.is_boolean()) {
    t.insert_or_assign(key, v.get<bool>());
  } else if (v.is_number_integer()) {
    t.insert_or_assign(key, v.get<std::int64_t>());
  } else if (v.is_number()) {
    t.insert_or_assign(key, v.get<double>());
  } else if (v.is_string()) {
    t.insert_or_assign(key, v.get<std::string>());
  }
}

}  // namespace

Json parse_toml(const std::string& text, const std::string& source) {
  try {
    const toml::table tbl = toml::parse(text, source);
    return from_toml(tbl, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
       << e.description();
    throw ConfigError({os.str()});
  }
}

Json load_toml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open file"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str(), path);
}

std::string to_toml(const Json& doc) {
  toml::table t;
  for (auto it = doc.begin(); it != doc.end(); ++it) insert_toml(t, it.key(), it.value());
  std::ostringstream os;
  os << toml::toml_formatter(t, toml::toml_formatter::default_flags &
                                    ~toml::format_flags::allow_literal_strings)
     << '\n';
  return os.str();
}

// ---------------------------------------------------------------- resolution

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const std::set<std::string> kSections = {"scenario", "run",     "steps",   "estimator", "dither",
                                         "initial",  "game",    "unicycle", "windfarm", "provenance"};

class Resolver {
 public:
  Resolver(const Json& raw, std::string base) : raw_(raw), base_(std::move(base)) {}

  std::vector<std::string> errs;
  Json out = Json::object();

  void err(const std::string& sec, const std::string& key, const std::string& msg) {
    errs.push_back(sec + "." + key + ": " + msg);
  }

  const Json* get(const std::string& sec, const std::string& key) const {
    if (!raw_.contains(sec) || !raw_[sec].is_object()) return nullptr;
    const Json& s = raw_[sec];
    return s.contains(key) ? &s[key] : nullptr;
  }

  bool has(const std::string& sec, const std::string& key) const { return get(sec, key) != nullptr; }

  void check_keys(const std::string& sec, const std::set<std::string>& allowed) {
    if (!raw_.contains(sec)) return;
    if (!raw_[sec].is_object()) {
      errs.push_back(sec + ": expected a table");
      return;
    }
    for (auto it = raw_[sec].begin(); it != raw_[sec].end(); ++it)
      if (!allowed.count(it.key())) err(sec, it.key(), "unknown field");
  }

  std::optional<double> number(const std::string& sec, const std::string& key,
                               std::optional<double> def, double lo = -kInf, bool strict = false,
                               double hi = kInf) {
    const Json* v = get(sec, key);
    double x;
    if (!v) {
      if (!def) {
        err(sec, key, "missing required field");
        return std::nullopt;
      }
      x = *def;
    } else if (!v->is_number()) {
      err(sec, key, "expected a number");
      return std::nullopt;
    } else {
      x = v->get<double>();
    }
    if (!std::isfinite(x) || (strict ? !(x > lo) : !(x >= lo)) || !(x <= hi)) {
      std::ostringstream os;
      os << "value " << x << " outside " << (strict ? "(" : "[") << lo << ", " << hi << "]";
      err(sec, key, os.str());
      return std::nullopt;
    }
    out[sec][key] = x;
    return x;
  }

  std::optional<long> integer(const std::string& sec, const std::string& key, std::optional<long> def,
                              long lo) {
    const Json* v = get(sec, key);
    long x;
    if (!v) {
      if (!def) {
        err(sec, key, "missing required field");
        return std::nullopt;
      }
      x = *def;
    } else if (!v->is_number_integer()) {
      err(sec, key, "expected an integer");
      return std::nullopt;
    } else {
      x = v->get<long>();
    }
    if (x < lo) {
      err(sec, key, "must be >= " + std::to_string(lo));
      return std::nullopt;
    }
    out[sec][key] = x;
    return x;
  }

  std::optional<std::string> string(const std::string& sec, const std::string& key,
                                    std::optional<std::string> def) {
    const Json* v = get(sec, key);
    if (!v) {
      if (!def) {
        err(sec, key, "missing required field");
        return std::nullopt;
      }
      out[sec][key] = *def;
      return def;
    }
    if (!v->is_string()) {
      err(sec, key, "expected a string");
      return std::nullopt;
    }
    out[sec][key] = v->get<std::string>();
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const std::string& sec, const std::string& key, bool def) {
    const Json* v = get(sec, key);
    if (!v) {
      out[sec][key] = def;
      return def;
    }
    if (!v->is_boolean()) {
      err(sec, key, "expected true or false");
      return std::nullopt;
    }
    out[sec][key] = v->get<bool>();
    return v->get<bool>();
  }

  static std::optional<std::vector<double>> as_vector(const Json& v) {
    if (!v.is_array()) return std::nullopt;
    std::vector<double> x;
    for (const auto& e : v) {
      if (!e.is_number()) return std::nullopt;
      x.push_back(e.get<double>());
    }
    return x;
  }

  // size < 0: any length.
  std::optional<std::vector<double>> vector(const std::string& sec, const std::string& key, long size,
                                            std::optional<std::vector<double>> def) {
    const Json* v = get(sec, key);
    std::vector<double> x;
    if (!v) {
      if (!def) {
        err(sec, key, "missing required field");
        return std::nullopt;
      }
      x = *def;
    } else {
      auto got = as_vector(*v);
      if (!got) {
        err(sec, key, "expected a list of numbers");
        return std::nullopt;
      }
      x = *got;
    }
    if (size >= 0 && static_cast<long>(x.size()) != size) {
      err(sec, key, "expected " + std::to_string(size) + " entries, got " + std::to_string(x.size()));
      return std::nullopt;
    }
    for (double e : x)
      if (!std::isfinite(e)) {
        err(sec, key, "non-finite entry");
        return std::nullopt;
      }
    out[sec][key] = x;
    return x;
  }

  // Scalar broadcast to n entries, or a list of n.
  std::optional<std::vector<double>> per_agent(const std::string& sec, const std::string& key, long n,
                                               std::optional<double> def, double lo, bool strict) {
    const Json* v = get(sec, key);
    std::vector<double> x;
    if (!v) {
      if (!def) {
        err(sec, key, "missing required field");
        return std::nullopt;
      }
      x.assign(static_cast<size_t>(n), *def);
    } else if (v->is_number()) {
      x.assign(static_cast<size_t>(n), v->get<double>());
    } else if (auto got = as_vector(*v)) {
      x = *got;
    } else {
      err(sec, key, "expected a number or a list of numbers");
      return std::nullopt;
    }
    if (static_cast<long>(x.size()) != n) {
      err(sec, key, "expected one entry per agent (" + std::to_string(n) + ")");
      return std::nullopt;
    }
    for (double e : x)
      if (!std::isfinite(e) || (strict ? !(e > lo) : !(e >= lo))) {
        err(sec, key, std::string("entries must be ") + (strict ? "> " : ">= ") + std::to_string(lo));
        return std::nullopt;
      }
    out[sec][key] = x;
    return x;
  }

  std::optional<std::vector<std::vector<double>>> matrix(const std::string& sec, const std::string& key,
                                                         long cols, bool required) {
    const Json* v = get(sec, key);
    if (!v) {
      if (required) err(sec, key, "missing required field");
      return std::nullopt;
    }
    if (!v->is_array()) {
      err(sec, key, "expected a list of rows");
      return std::nullopt;
    }
    std::vector<std::vector<double>> rows;
    for (const auto& r : *v) {
      auto row = as_vector(r);
      if (!row || (cols >= 0 && static_cast<long>(row->size()) != cols)) {
        err(sec, key, cols >= 0 ? "every row needs " + std::to_string(cols) + " numbers"
                                : "rows must be lists of numbers");
        return std::nullopt;
      }
      rows.push_back(*row);
    }
    out[sec][key] = rows;
    return rows;
  }

  const Json& raw() const { return raw_; }
  const std::string& base() const { return base_; }

 private:
  const Json& raw_;
  std::string base_;
};

Mat to_mat(const std::vector<std::vector<double>>& rows, Index cols) {
  Mat M(static_cast<Index>(rows.size()), cols);
  for (size_t r = 0; r < rows.size(); ++r)
    for (Index c = 0; c < cols; ++c) M(static_cast<Index>(r), c) = rows[r][static_cast<size_t>(c)];
  return M;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())); }

std::vector<double> from_json_vec(const Json& j) { return j.get<std::vector<double>>(); }

struct GameShape {
  std::vector<Index> dims;
  Index q = 0;
  Vec lower, upper;
  bool ok = false;
};

const std::vector<std::vector<double>> kTable1Sources = {{-4, -8}, {-12, -3}, {1, 7}, {16, 8}};

GameShape resolve_quadratic(Resolver& R) {
  R.check_keys("game", {"dims", "M", "q", "constant", "lower", "upper", "coupling_A", "coupling_b"});
  GameShape g;
  const Json* d = R.get("game", "dims");
  if (!d) {
    R.err("game", "dims", "missing required field");
  } else if (!d->is_array() || d->empty()) {
    R.err("game", "dims", "expected a nonempty list of positive integers");
  } else {
    for (const auto& e : *d) {
      if (!e.is_number_integer() || e.get<long>() < 1) {
        R.err("game", "dims", "expected a nonempty list of positive integers");
        g.dims.clear();
        break;
      }
      g.dims.push_back(e.get<long>());
    }
    if (!g.dims.empty()) R.out["game"]["dims"] = g.dims;
  }
  long m = 0;
  for (Index x : g.dims) m += x;
  const long n = static_cast<long>(g.dims.size());
  const long mm = g.dims.empty() ? -1 : m;
  auto M = R.matrix("game", "M", mm, true);
  if (M && mm >= 0 && static_cast<long>(M->size()) != m) R.err("game", "M", "expected " + std::to_string(m) + " rows");
  R.vector("game", "q", mm, mm >= 0 ? std::optional(std::vector<double>(static_cast<size_t>(m), 0.0)) : std::nullopt);
  R.vector("game", "constant", g.dims.empty() ? -1 : n,
           g.dims.empty() ? std::nullopt : std::optional(std::vector<double>(static_cast<size_t>(n), 0.0)));
  auto lo = R.vector("game", "lower", mm, std::nullopt);
  auto up = R.vector("game", "upper", mm, std::nullopt);
  if (lo && up)
    for (size_t k = 0; k < lo->size(); ++k)
      if ((*lo)[k] > (*up)[k]) {
        R.err("game", "upper", "must be >= lower componentwise");
        break;
      }
  auto A = R.matrix("game", "coupling_A", mm, true);
  auto b = R.vector("game", "coupling_b", -1, std::nullopt);
  if (A && b && A->size() != b->size())
    R.err("game", "coupling_b", "needs one entry per row of coupling_A (" + std::to_string(A->size()) + ")");
  if (!g.dims.empty() && M && lo && up && A && b) {
    g.q = static_cast<Index>(b->size());
    g.lower = to_vec(*lo);
    g.upper = to_vec(*up);
    g.ok = true;
  }
  return g;
}

GameShape resolve_unicycle(Resolver& R) {
  R.check_keys("unicycle", {"sources", "K1", "K2", "c", "coupling_bound", "rectangle", "epsilon",
                            "state_margin"});
  GameShape g;
  auto src = R.matrix("unicycle", "sources", 2, false);
  if (!src) {
    if (!R.has("unicycle", "sources")) {
      R.out["unicycle"]["sources"] = kTable1Sources;
      src = kTable1Sources;
    } else {
      return g;
    }
  }
  const long n = static_cast<long>(src->size());
  if (n < 1) {
    R.err("unicycle", "sources", "at least one agent required");
    return g;
  }
  R.per_agent("unicycle", "K1", n, 3.0, 0.0, true);
  R.per_agent("unicycle", "K2", n, 6.0, 0.0, true);
  R.number("unicycle", "c", 0.04, 0.0, true);
  R.number("unicycle", "coupling_bound", 14.0, 0.0, true);
  auto rect = R.vector("unicycle", "rectangle", 4, std::vector<double>{-16, 16, -6, 6});
  R.number("unicycle", "epsilon", 0.1, 0.0, true);
  R.number("unicycle", "state_margin", 20.0, 0.0, false);
  if (!rect) return g;
  if (!((*rect)[0] < (*rect)[1] && (*rect)[2] < (*rect)[3])) {
    R.err("unicycle", "rectangle", "expected [x_min, x_max, y_min, y_max] with min < max");
    return g;
  }
  g.dims.assign(static_cast<size_t>(n), 2);
  g.q = 2 * 2 * n * (n - 1) / 2;
  g.lower.resize(2 * n);
  g.upper.resize(2 * n);
  for (long i = 0; i < n; ++i) {
    g.lower.segment<2>(2 * i) << (*rect)[0], (*rect)[2];
    g.upper.segment<2>(2 * i) << (*rect)[1], (*rect)[3];
  }
  g.ok = true;
  return g;
}

GameShape resolve_windfarm(Resolver& R) {
  R.check_keys("windfarm", {"rows", "cols", "spacing_x", "spacing_y", "rotor_radius", "wake_decay",
                            "tau", "rho_air", "U_inf", "power_scale", "a_min", "a_max",
                            "coupling_bound", "epsilon", "interval"});
  GameShape g;
  auto rows = R.integer("windfarm", "rows", 3, 1);
  auto cols = R.integer("windfarm", "cols", 3, 1);
  R.number("windfarm", "spacing_x", 400.0, 0.0, true);
  R.number("windfarm", "spacing_y", 400.0, 0.0, true);
  R.number("windfarm", "rotor_radius", 40.0, 0.0, true);
  R.number("windfarm", "wake_decay", 0.075, 0.0, false);
  R.number("windfarm", "tau", 10.0, 0.0, true);
  R.number("windfarm", "rho_air", 1.225, 0.0, true);
  R.number("windfarm", "U_inf", 8.0, 0.0, true);
  R.number("windfarm", "power_scale", 1e-6, 0.0, true);
  auto amin = R.number("windfarm", "a_min", 0.1, 0.0, true);
  auto amax = R.number("windfarm", "a_max", 1.0 / 3.0, 0.0, true, 1.0 / 3.0 + 1e-9);
  R.number("windfarm", "coupling_bound", 0.03, 0.0, true);
  R.number("windfarm", "epsilon", 0.005, 0.0, true);
  if (amin && amax && !(*amin < *amax)) R.err("windfarm", "a_max", "must exceed a_min");

  Json intervals = Json::array();
  const Json* iv = R.get("windfarm", "interval");
  if (!iv) {
    intervals = Json::array({Json{{"t_begin", 0.0}, {"direction", {2.0, -1.0}}},
                             Json{{"t_begin", 50000.0}, {"direction", {0.0, -1.0}}},
                             Json{{"t_begin", 100000.0}, {"direction", {-1.0, -1.0}}}});
  } else if (!iv->is_array() || iv->empty()) {
    R.err("windfarm", "interval", "expected a nonempty array of tables");
  } else {
    double last = -kInf;
    for (size_t k = 0; k < iv->size(); ++k) {
      const Json& e = (*iv)[k];
      const std::string key = "interval[" + std::to_string(k) + "]";
      if (!e.is_object()) {
        R.err("windfarm", key, "expected a table");
        continue;
      }
      Json o;
      if (!e.contains("t_begin") || !e["t_begin"].is_number()) {
        R.err("windfarm", key + ".t_begin", "missing or not a number");
      } else {
        o["t_begin"] = e["t_begin"].get<double>();
        if (!(o["t_begin"].get<double>() > last)) R.err("windfarm", key + ".t_begin", "must increase");
        last = o["t_begin"].get<double>();
      }
      auto dir = e.contains("direction") ? Resolver::as_vector(e["direction"]) : std::nullopt;
      if (!dir || dir->size() != 2 || std::hypot((*dir)[0], (*dir)[1]) == 0.0)
        R.err("windfarm", key + ".direction", "expected a nonzero 2-vector");
      else
        o["direction"] = *dir;
      if (e.contains("wake_csv")) {
        if (!e["wake_csv"].is_string()) {
          R.err("windfarm", key + ".wake_csv", "expected a path");
        } else {
          fs::path p(e["wake_csv"].get<std::string>());
          if (p.is_relative()) p = fs::path(R.base()) / p;
          p = fs::weakly_canonical(p);
          if (!fs::exists(p)) R.err("windfarm", key + ".wake_csv", "file not found: " + p.string());
          o["wake_csv"] = p.string();
        }
      }
      for (auto it = e.begin(); it != e.end(); ++it)
        if (it.key() != "t_begin" && it.key() != "direction" && it.key() != "wake_csv")
          R.err("windfarm", key + "." + it.key(), "unknown field");
      intervals.push_back(o);
    }
    if (!intervals.empty() && intervals[0].contains("t_begin") && intervals[0]["t_begin"].get<double>() != 0.0)
      R.err("windfarm", "interval[0].t_begin", "first interval must start at 0");
  }
  R.out["windfarm"]["interval"] = intervals;
  if (!rows || !cols || !amin || !amax) return g;
  const long n = *rows * *cols;
  g.dims.assign(static_cast<size_t>(n), 1);
  g.q = 2 * (*rows - 1) * *cols * *cols;
  g.lower = Vec::Constant(n, *amin);
  g.upper = Vec::Constant(n, *amax);
  g.ok = true;
  return g;
}

}  // namespace

Json resolve_config(const Json& raw, const std::string& base_dir) {
  if (!raw.is_object()) throw ConfigError({"configuration root must be a table"});
  Resolver R(raw, base_dir);
  for (auto it = raw.begin(); it != raw.end(); ++it)
    if (!kSections.count(it.key())) R.errs.push_back(it.key() + ": unknown section");

  R.check_keys("scenario", {"name", "kind"});
  R.string("scenario", "name", std::string("scenario"));
  const auto kind = R.string("scenario", "kind", std::nullopt);
  GameShape shape;
  if (kind) {
    if (*kind == "quadratic") shape = resolve_quadratic(R);
    else if (*kind == "connectivity") shape = resolve_unicycle(R);
    else if (*kind == "windfarm") shape = resolve_windfarm(R);
    else R.err("scenario", "kind", "expected quadratic, connectivity or windfarm");
  }
  for (const char* sec : {"game", "unicycle", "windfarm"}) {
    const bool own = kind && ((*kind == "quadratic" && std::string(sec) == "game") ||
                              (*kind == "connectivity" && std::string(sec) == "unicycle") ||
                              (*kind == "windfarm" && std::string(sec) == "windfarm"));
    if (!own && raw.contains(sec)) R.errs.push_back(std::string(sec) + ": section does not apply to this kind");
  }

  const std::string k = kind.value_or("");
  const double def_gamma = k == "connectivity" ? 0.002 : k == "windfarm" ? 0.05 : 0.1;
  const double def_amp = k == "connectivity" ? 0.49 : k == "windfarm" ? 0.01 : 0.1;

  R.check_keys("run", {"mode", "step", "horizon", "sample_stride", "seed", "tail_fraction", "eps_ball"});
  const auto mode = R.string("run", "mode", std::string(k == "quadratic" ? "full_info" : "dynamic_zero_order"));
  if (mode) {
    try {
      const Mode md = parse_mode(*mode);
      if (md == Mode::DynamicZeroOrder && k == "quadratic")
        R.err("run", "mode", "quadratic scenarios have no plant; use full_info or static_zero_order");
    } catch (const ValidationError& e) {
      R.err("run", "mode", e.what());
    }
  }
  auto step = R.number("run", "step", 0.01, 0.0, true);
  auto horizon = R.number("run", "horizon", 100.0, 0.0, true);
  if (step && horizon && *horizon < *step) R.err("run", "horizon", "must be at least one step");
  R.integer("run", "sample_stride", 10, 1);
  auto seed = R.integer("run", "seed", 0, 0);
  R.number("run", "tail_fraction", 0.1, 0.0, true, 1.0);
  R.number("run", "eps_ball", 1.0, 0.0, true);

  const long n = static_cast<long>(shape.dims.size());
  R.check_keys("steps", {"gamma", "gamma0"});
  R.check_keys("estimator", {"K", "rho", "sigma", "Sigma0", "theta_bound"});
  R.check_keys("dither", {"amplitude", "frequencies", "frequency_range", "frequency_seed",
                          "frequency_factor", "phases"});
  R.check_keys("initial", {"u0", "lambda0", "x0", "random_u0"});
  R.number("estimator", "K", 100.0, 0.0, true);
  R.number("estimator", "rho", 100.0, 0.0, true);
  R.number("estimator", "sigma", 1e-6, 0.0, true);
  R.number("estimator", "Sigma0", 0.1, 0.0, true);
  R.number("estimator", "theta_bound", 100.0, 0.0, true);
  R.number("steps", "gamma0", def_gamma, 0.0, true);
  R.number("dither", "frequency_factor", 1.0, 0.0, true);
  const auto frange = R.vector("dither", "frequency_range", 2, std::vector<double>{3.0, 11.0});
  const auto fseed = R.integer("dither", "frequency_seed", 1, 0);
  if (frange && !((*frange)[0] > 0.0 && (*frange)[0] < (*frange)[1]))
    R.err("dither", "frequency_range", "expected 0 < low < high");
  R.boolean("initial", "random_u0", false);

  if (shape.ok) {
    R.per_agent("steps", "gamma", n, def_gamma, 0.0, true);
    R.per_agent("dither", "amplitude", n, def_amp, 0.0, false);

    // Frequencies: explicit per-agent lists, else drawn from the range.
    const Json* fr = R.get("dither", "frequencies");
    std::vector<std::vector<double>> freqs;
    if (fr) {
      bool good = fr->is_array() && static_cast<long>(fr->size()) == n;
      for (size_t i = 0; good && i < fr->size(); ++i) {
        auto f = Resolver::as_vector((*fr)[i]);
        good = f && static_cast<Index>(f->size()) == shape.dims[i];
        if (good)
          for (double w : *f) good = good && w > 0.0 && std::isfinite(w);
        if (good) freqs.push_back(*f);
      }
      if (!good) R.err("dither", "frequencies", "expected one list of positive frequencies per agent, one per decision channel");
    } else if (frange && fseed) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(*fseed));
      std::uniform_real_distribution<double> U((*frange)[0], (*frange)[1]);
      for (long i = 0; i < n; ++i) {
        std::vector<double> f;
        for (Index j = 0; j < shape.dims[static_cast<size_t>(i)]; ++j) f.push_back(std::round(U(rng) * 1e4) / 1e4);
        freqs.push_back(f);
      }
    }
    if (!freqs.empty()) R.out["dither"]["frequencies"] = freqs;
    if (const Json* ph = R.get("dither", "phases")) {
      bool good = ph->is_array() && static_cast<long>(ph->size()) == n;
      for (size_t i = 0; good && i < ph->size(); ++i) {
        auto f = Resolver::as_vector((*ph)[i]);
        good = f && static_cast<Index>(f->size()) == shape.dims[i];
      }
      if (good) R.out["dither"]["phases"] = *ph;
      else R.err("dither", "phases", "expected one list per agent, one phase per decision channel");
    }

    const long m = shape.lower.size();
    if (R.has("initial", "u0")) {
      auto u0 = R.vector("initial", "u0", m, std::nullopt);
      if (u0)
        for (long j = 0; j < m; ++j)
          if ((*u0)[static_cast<size_t>(j)] < shape.lower[j] - 1e-12 || (*u0)[static_cast<size_t>(j)] > shape.upper[j] + 1e-12) {
            R.err("initial", "u0", "must lie in the local constraint sets");
            break;
          }
    } else {
      Vec u0;
      if (R.out["initial"]["random_u0"].get<bool>() && seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(*seed));
        u0.resize(m);
        for (long j = 0; j < m; ++j)
          u0[j] = std::uniform_real_distribution<double>(shape.lower[j], shape.upper[j])(rng);
      } else if (k == "windfarm") {
        u0 = shape.upper;
      } else {
        u0 = Vec::Zero(m).cwiseMax(shape.lower).cwiseMin(shape.upper);
      }
      R.out["initial"]["u0"] = std::vector<double>(u0.data(), u0.data() + u0.size());
    }
    R.vector("initial", "lambda0", shape.q, std::vector<double>(static_cast<size_t>(shape.q), 0.0));
    if (R.has("initial", "x0")) R.vector("initial", "x0", -1, std::nullopt);
  }

  if (!R.errs.empty()) throw ConfigError(R.errs);
  return R.out;
}

Json load_config(const std::string& path) {
  const Json raw = load_toml_file(path);
  fs::path base = fs::path(path).parent_path();
  if (base.empty()) base = ".";
  return resolve_config(raw, base.string());
}

bool Overrides::empty() const {
  return !mode && !step && !horizon && !amplitude && !k_omega && !epsilon && !seed;
}

Json apply_overrides(const Json& resolved, const Overrides& o) {
  Json j = resolved;
  if (o.mode) j["run"]["mode"] = *o.mode;
  if (o.step) j["run"]["step"] = *o.step;
  if (o.horizon) j["run"]["horizon"] = *o.horizon;
  if (o.amplitude) j["dither"]["amplitude"] = *o.amplitude;
  if (o.k_omega) j["dither"]["frequency_factor"] = *o.k_omega;
  if (o.seed) j["run"]["seed"] = static_cast<long>(*o.seed);
  if (o.epsilon) {
    const std::string kind = j["scenario"]["kind"].get<std::string>();
    if (kind == "connectivity") j["unicycle"]["epsilon"] = *o.epsilon;
    else if (kind == "windfarm") j["windfarm"]["epsilon"] = *o.epsilon;
    else throw ConfigError({"--epsilon: quadratic scenarios have no plant"});
  }
  if (o.seed && j["initial"]["random_u0"].get<bool>()) j["initial"].erase("u0");
  return resolve_config(j);
}

Json apply_axis(const Json& resolved, const std::string& axis, double value) {
  Overrides o;
  if (axis == "amplitude") o.amplitude = value;
  else if (axis == "k_omega") o.k_omega = value;
  else if (axis == "epsilon") o.epsilon = value;
  else if (axis == "step") o.step = value;
  else if (axis == "horizon") o.horizon = value;
  else if (axis == "K") {
    Json j = resolved;
    j["estimator"]["K"] = value;
    return resolve_config(j);
  } else if (axis == "gamma") {
    Json j = resolved;
    j["steps"]["gamma"] = value;
    j["steps"]["gamma0"] = value;
    return resolve_config(j);
  } else {
    throw ConfigError({"grid axis '" + axis +
                       "': unknown (expected amplitude, k_omega, epsilon, step, horizon, K or gamma)"});
  }
  return apply_overrides(resolved, o);
}

// ---------------------------------------------------------------- building

namespace {

Mat load_wake_csv(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw ValidationError("wake_csv: cannot open " + path);
  Mat W(n, n);
  std::string line;
  Index r = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (r >= n) throw ValidationError("wake_csv: more than " + std::to_string(n) + " rows in " + path);
    std::stringstream ss(line);
    std::string cell;
    Index c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= n) throw ValidationError("wake_csv: row " + std::to_string(r + 1) + " too long in " + path);
      try {
        W(r, c++) = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("wake_csv: bad number '" + cell + "' in " + path);
      }
    }
    if (c != n) throw ValidationError("wake_csv: row " + std::to_string(r + 1) + " too short in " + path);
    ++r;
  }
  if (r != n) throw ValidationError("wake_csv: expected " + std::to_string(n) + " rows in " + path);
  return W;
}

WindFarmParams windfarm_params(const Json& w) {
  WindFarmParams p;
  p.rows = w["rows"].get<long>();
  p.cols = w["cols"].get<long>();
  p.positions = grid_layout(p.rows, p.cols, w["spacing_x"].get<double>(), w["spacing_y"].get<double>());
  p.tau = w["tau"].get<double>();
  p.rho_air = w["rho_air"].get<double>();
  p.rotor_radius = w["rotor_radius"].get<double>();
  p.U_inf = w["U_inf"].get<double>();
  p.power_scale = w["power_scale"].get<double>();
  p.a_min = w["a_min"].get<double>();
  p.a_max = w["a_max"].get<double>();
  p.b = w["coupling_bound"].get<double>();
  p.epsilon = w["epsilon"].get<double>();
  for (const auto& iv : w["interval"]) {
    WindInterval wi;
    wi.t_begin = iv["t_begin"].get<double>();
    const auto d = iv["direction"].get<std::vector<double>>();
    wi.direction = Eigen::Vector2d(d[0], d[1]);
    wi.wake = iv.contains("wake_csv")
                  ? load_wake_csv(iv["wake_csv"].get<std::string>(), p.n_agents())
                  : jensen_wake_matrix(p.positions, wi.direction, p.rotor_radius,
                                       w["wake_decay"].get<double>());
    p.intervals.push_back(wi);
  }
  return p;
}

}  // namespace

Scenario build_scenario(const Json& j) {
  Scenario sc;
  sc.name = j["scenario"]["name"].get<std::string>();
  sc.kind = j["scenario"]["kind"].get<std::string>();
  const Json& run = j["run"];
  sc.run.mode = parse_mode(run["mode"].get<std::string>());
  sc.run.h = run["step"].get<double>();
  sc.run.T = run["horizon"].get<double>();
  sc.run.sample_stride = run["sample_stride"].get<long>();
  sc.run.seed = run["seed"].get<std::uint64_t>();
  sc.tail_fraction = run["tail_fraction"].get<double>();
  sc.eps_ball = run["eps_ball"].get<double>();

  if (sc.kind == "quadratic") {
    const Json& g = j["game"];
    QuadraticGame qg;
    qg.dims = g["dims"].get<std::vector<Index>>();
    Index m = 0;
    for (Index d : qg.dims) m += d;
    qg.M = to_mat(g["M"].get<std::vector<std::vector<double>>>(), m);
    qg.q = to_vec(from_json_vec(g["q"]));
    qg.constant = to_vec(from_json_vec(g["constant"]));
    qg.lower = to_vec(from_json_vec(g["lower"]));
    qg.upper = to_vec(from_json_vec(g["upper"]));
    qg.A = to_mat(g["coupling_A"].get<std::vector<std::vector<double>>>(), m);
    qg.b = to_vec(from_json_vec(g["coupling_b"]));
    qg.validate();
    sc.phases.push_back({0.0, qg.to_game()});
    sc.quadratic = qg;
  } else if (sc.kind == "connectivity") {
    const Json& u = j["unicycle"];
    UnicycleParams p;
    p.K1 = to_vec(from_json_vec(u["K1"]));
    p.K2 = to_vec(from_json_vec(u["K2"]));
    for (const auto& s : u["sources"]) p.sources.emplace_back(s[0].get<double>(), s[1].get<double>());
    p.c = u["c"].get<double>();
    p.b = u["coupling_bound"].get<double>();
    const auto r = from_json_vec(u["rectangle"]);
    p.x_min = r[0];
    p.x_max = r[1];
    p.y_min = r[2];
    p.y_max = r[3];
    p.epsilon = u["epsilon"].get<double>();
    p.state_margin = u["state_margin"].get<double>();
    sc.phases.push_back({0.0, connectivity_game(p)});
    sc.plant = std::make_shared<UnicyclePlant>(p);
  } else {
    const WindFarmParams p = windfarm_params(j["windfarm"]);
    for (const auto& iv : p.intervals) sc.phases.push_back({iv.t_begin, windfarm_game(p, iv.wake)});
    sc.plant = std::make_shared<WindFarmPlant>(p);
  }

  const GameSpec& g = sc.game();
  const Index n = g.n_agents();
  sc.steps.gamma = to_vec(from_json_vec(j["steps"]["gamma"]));
  sc.steps.gamma0 = j["steps"]["gamma0"].get<double>();

  const Json& e = j["estimator"];
  for (Index i = 0; i < n; ++i)
    sc.tuning.push_back(EstimatorTuning::standard(g.dims[static_cast<size_t>(i)], e["K"].get<double>(),
                                                  e["rho"].get<double>(), e["sigma"].get<double>(),
                                                  e["Sigma0"].get<double>(),
                                                  e["theta_bound"].get<double>()));
  const Json& d = j["dither"];
  sc.dither.amplitudes = to_vec(from_json_vec(d["amplitude"]));
  for (const auto& f : d["frequencies"]) sc.dither.base_frequencies.push_back(to_vec(from_json_vec(f)));
  sc.dither.frequency_factor = d["frequency_factor"].get<double>();
  if (d.contains("phases"))
    for (const auto& f : d["phases"]) sc.dither.phases.push_back(to_vec(from_json_vec(f)));

  const Json& init = j["initial"];
  sc.u0 = to_vec(from_json_vec(init["u0"]));
  sc.lambda0 = to_vec(from_json_vec(init["lambda0"]));
  if (init.contains("x0")) sc.x0 = to_vec(from_json_vec(init["x0"]));
  sc.validate();
  return sc;
}

std::string manifest_toml(const Json& resolved, const std::string& command) {
  Json m = resolved;
  m["provenance"] = Json{{"version", code_version()}, {"command", command}};
  return to_toml(m);
}

SweepGrid load_grid(const std::string& path) {
  const Json raw = load_toml_file(path);
  if (!raw.contains("grid") || !raw["grid"].is_object() || raw["grid"].empty())
    throw ConfigError({"grid: missing [grid] table with at least one axis"});
  std::vector<std::string> errs;
  SweepGrid grid;
  // Axis order is the order of appearance in the file.
  std::ifstream in(path);
  std::vector<std::string> order;
  {
    const toml::table tbl = toml::parse_file(path);
    if (auto g = tbl["grid"].as_table())
      for (auto&& [k, v] : *g) order.emplace_back(k.str());
    std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
      return (*tbl["grid"].as_table())[a].node()->source().begin <
             (*tbl["grid"].as_table())[b].node()->source().begin;
    });
  }
  for (const auto& name : order) {
    const Json& v = raw["grid"][name];
    SweepAxis ax{name, {}};
    if (v.is_number()) {
      ax.values.push_back(v.get<double>());
    } else if (v.is_array() && !v.empty()) {
      for (const auto& x : v) {
        if (!x.is_number()) {
          errs.push_back("grid." + name + ": expected numbers");
          break;
        }
        ax.values.push_back(x.get<double>());
      }
    } else {
      errs.push_back("grid." + name + ": expected a nonempty list of numbers");
    }
    grid.axes.push_back(ax);
  }
  for (auto it = raw.begin(); it != raw.end(); ++it)
    if (it.key() != "grid") errs.push_back(it.key() + ": unknown section in grid file");
  if (!errs.empty()) throw ConfigError(errs);
  grid.validate();
  return grid;
}

// ---------------------------------------------------------------- oracle cache

std::string game_hash(const Json& resolved) {
  Json key;
  const std::string kind = resolved["scenario"]["kind"].get<std::string>();
  key["kind"] = kind;
  const char* sec = kind == "quadratic" ? "game" : kind == "connectivity" ? "unicycle" : "windfarm";
  key["game"] = resolved[sec];
  for (const char* k : {"epsilon", "tau", "K1", "K2", "state_margin"}) key["game"].erase(k);
  const std::string s = key.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

std::mutex& cache_mutex() {
  static std::mutex m;
  return m;
}

Json solution_json(const OracleSolution& s) {
  return Json{{"u", std::vector<double>(s.u.data(), s.u.data() + s.u.size())},
              {"lambda", std::vector<double>(s.lambda.data(), s.lambda.data() + s.lambda.size())},
              {"residual", s.residual},
              {"method", s.method},
              {"iterations", s.iterations}};
}

OracleSolution solution_from(const Json& j) {
  OracleSolution s;
  s.u = to_vec(from_json_vec(j["u"]));
  s.lambda = to_vec(from_json_vec(j["lambda"]));
  s.residual = j["residual"].get<double>();
  s.method = j["method"].get<std::string>();
  s.iterations = j["iterations"].get<long>();
  return s;
}

}  // namespace

std::vector<OracleSolution> oracle_for(const Scenario& sc, const Json& resolved, const std::string& cache_path) {
  const std::string key = game_hash(resolved);
  std::lock_guard<std::mutex> lock(cache_mutex());
  Json cache = Json::object();
  if (!cache_path.empty() && fs::exists(cache_path)) {
    try {
      std::ifstream in(cache_path);
      cache = Json::parse(in);
    } catch (const std::exception&) {
      cache = Json::object();
    }
    if (cache.contains(key) && cache[key].is_array() && cache[key].size() == sc.phases.size()) {
      std::vector<OracleSolution> out;
      for (const auto& e : cache[key]) out.push_back(solution_from(e));
      return out;
    }
  }
  std::vector<OracleSolution> out;
  ExtragradientOptions opts;
  opts.tol = 1e-9;
  for (const auto& ph : sc.phases)
    out.push_back(solve_vgne(ph.game, sc.quadratic ? &*sc.quadratic : nullptr, opts));
  if (!cache_path.empty()) {
    Json arr = Json::array();
    for (const auto& s : out) arr.push_back(solution_json(s));
    cache[key] = arr;
    std::ofstream os(cache_path);
    os << cache.dump(2) << '\n';
  }
  return out;
}

// ---------------------------------------------------------------- wind power

std::vector<IntervalPower> windfarm_power_summary(const RunResult& run, const Scenario& sc,
                                                  const std::vector<OracleSolution>& oracle,
                                                  double tail_fraction) {
  const auto* plant = dynamic_cast<const WindFarmPlant*>(sc.plant.get());
  if (!plant) throw ValidationError("power summary: not a wind farm scenario");
  const auto& p = plant->params();
  if (oracle.size() != p.intervals.size()) throw ValidationError("power summary: one oracle per interval");
  const auto& tr = run.traj;
  const auto& L = run.layout;
  const bool use_x = L.nx == p.n_agents();
  std::vector<IntervalPower> out;
  for (size_t k = 0; k < p.intervals.size(); ++k) {
    if (tr.t.empty() || p.intervals[k].t_begin >= tr.t.back()) break;
    IntervalPower ip;
    ip.t_begin = p.intervals[k].t_begin;
    const bool last = k + 1 == p.intervals.size() || p.intervals[k + 1].t_begin >= tr.t.back();
    ip.t_end = last ? tr.t.back() : p.intervals[k + 1].t_begin;
    const double from = ip.t_end - tail_fraction * (ip.t_end - ip.t_begin);
    const Mat& W = p.intervals[k].wake;
    double acc = 0.0;
    long count = 0;
    for (size_t s = 0; s < tr.t.size(); ++s) {
      if (tr.t[s] < from || tr.t[s] > ip.t_end || (!last && tr.t[s] == ip.t_end)) continue;
      const Vec& st = tr.states[s];
      acc += use_x ? farm_power(p, W, st.segment(L.x_offset, L.nx)) : farm_power(p, W, st.head(L.m));
      ++count;
    }
    ip.algorithm = count ? acc / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
    ip.greedy = farm_power(p, W, Vec::Constant(p.n_agents(), p.a_max));
    ip.oracle = farm_power(p, W, oracle[k].u);
    out.push_back(ip);
  }
  return out;
}

}  // namespace gne
