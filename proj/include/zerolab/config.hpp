#pragma once

// Run configuration: a TOML file (see configs/), validated before any
// computation and hashed (SHA-256 of its canonical JSON form) so every
// output can be traced back to the exact settings that produced it.
// Link OpenSSL::Crypto when including this header.

#include <array>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <toml++/toml.hpp>

#include "zerolab/ensemble.hpp"
#include "zerolab/holomap.hpp"
#include "zerolab/mc.hpp"
#include "zerolab/testfn.hpp"
#include "zerolab/theory.hpp"

namespace zerolab {

struct RhoDef {
  std::string id;
  std::string kind = "annulus";  // annulus | disk | tensor | half_plane
  std::array<double, 2> center{0.0, 0.0};
  std::vector<double> radii;     // annulus: r0 r1 r2 r3; disk: r_inner r_outer
  std::array<double, 4> core{0, 1, 0, 1};  // tensor: x0 x1 y0 y1
  double margin = 0.25;

  TestFunction build() const {
    const cplx c(center[0], center[1]);
    if (kind == "annulus") {
      if (radii.size() != 4) throw ConfigError("rho '" + id + "': annulus needs radii = [r0, r1, r2, r3]");
      return TestFunction::annulus(c, radii[0], radii[1], radii[2], radii[3], id);
    }
    if (kind == "disk") {
      if (radii.size() != 2) throw ConfigError("rho '" + id + "': disk needs radii = [r_inner, r_outer]");
      return TestFunction::radial_bump(c, radii[0], radii[1], id);
    }
    if (kind == "tensor") return TestFunction::tensor_bump({core[0], core[1], core[2], core[3]}, margin, id);
    if (kind == "half_plane") return TestFunction::tensor_bump({0.25, 1.5, -1.5, 1.5}, 0.5, id);
    throw ConfigError("rho '" + id + "': unknown kind '" + kind + "'");
  }
};

struct RunConfig {
  std::vector<std::string> map{"z"};

  std::string family_kind = "unit";  // unit | scalar | expr
  std::string family_expr = "1";
  std::string A = "1", B = "1";
  std::string kappa = "0", lambda = "0", xi = "0", eta = "0";

  Rect window{-2, 2, -2, 2};
  int nx = 257, ny = 257;

  int n = 20;
  std::vector<int> n_list;
  int trials = 200;
  std::uint64_t seed = 20240917;
  std::string method = "auto";
  std::string representation = "symmetric";
  long long jmax = 0;  // audit range; 0 means max(n, n_list)
  std::string out = "out";
  unsigned threads = 0;
  bool allow_failed_audit = false;
  std::string curve_normalization = "potential";  // potential | one_form (debug)
  std::optional<bool> retain_zeros;

  std::vector<RhoDef> rho;

  // ---- construction of library objects ----------------------------------

  HoloMap make_map() const { return HoloMap::from_strings(map); }

  PerturbationFamily make_family() const {
    PerturbationFamily f;
    if (family_kind == "unit") f = PerturbationFamily::unit();
    else if (family_kind == "scalar") f = PerturbationFamily::scalar(family_expr);
    else if (family_kind == "expr") f = PerturbationFamily::family(family_expr);
    else throw ConfigError("family.kind must be unit, scalar or expr (got '" + family_kind + "')");
    f.with_certificates(kappa, lambda, xi, eta).with_envelopes(A, B);
    return f;
  }

  Window make_window() const { return Window(window, nx, ny); }

  Representation make_representation() const {
    if (representation == "symmetric") return Representation::SymmetricMultinomial;
    if (representation == "full") return Representation::FullTensor;
    throw ConfigError("run.representation must be symmetric or full");
  }

  Method make_method() const {
    if (method == "auto") return Method::Auto;
    if (method == "aberth") return Method::Aberth;
    if (method == "subdivide") return Method::Subdivide;
    throw ConfigError("run.method must be auto, aberth or subdivide");
  }

  CurveNormalization make_normalization() const {
    if (curve_normalization == "potential") return CurveNormalization::Potential;
    if (curve_normalization == "one_form") return CurveNormalization::OneForm;
    throw ConfigError("run.curve_normalization must be potential or one_form");
  }

  std::vector<TestFunction> make_rhos() const {
    std::vector<TestFunction> out;
    if (rho.empty()) return builtin_test_functions();
    for (const auto& r : rho) out.push_back(r.build());
    return out;
  }

  EnsembleSpec make_spec(int degree) const {
    EnsembleSpec s;
    s.map = make_map();
    s.fam = make_family();
    s.n = degree;
    s.representation = make_representation();
    s.seed = seed;
    return s;
  }

  Experiment make_experiment(int degree) const {
    Experiment ex;
    ex.spec = make_spec(degree);
    ex.window = make_window();
    ex.trials = trials;
    ex.rho_set = make_rhos();
    ex.method = make_method();
    ex.retain_zeros = retain_zeros;
    ex.allow_failed_audit = allow_failed_audit;
    ex.audit_jmax = jmax;
    return ex;
  }

  std::vector<int> degrees() const { return n_list.empty() ? std::vector<int>{n} : n_list; }

  long long audit_jmax() const {
    if (jmax > 0) return jmax;
    long long m = n;
    for (int v : n_list) m = std::max<long long>(m, v);
    return std::max<long long>(m, 1);
  }

  /// Builds every object once so errors surface before any computation.
  void validate() const {
    if (map.empty()) throw ConfigError("map.components must not be empty");
    make_map();
    make_family();
    make_window();
    make_representation();
    make_method();
    make_normalization();
    if (n < 0) throw ConfigError("run.n must be >= 0");
    if (trials < 2) throw ConfigError("run.trials must be >= 2");
    for (std::size_t i = 0; i < n_list.size(); ++i) {
      if (n_list[i] < 1) throw ConfigError("run.n_list entries must be >= 1");
      if (i > 0 && n_list[i] <= n_list[i - 1]) throw ConfigError("run.n_list must be increasing");
    }
    const Rect w = window;
    for (const auto& t : make_rhos())
      if (!w.contains(t.support())) throw ConfigError("rho '" + t.id() + "' support leaves the window");
    for (int d : degrees()) coeff_count(static_cast<int>(map.size()), d, make_representation());
  }

  /// Canonical form: every key, sorted, output path and thread cap excluded.
  nlohmann::json canonical() const {
    nlohmann::json rhos = nlohmann::json::array();
    for (const auto& r : rho)
      rhos.push_back({{"id", r.id}, {"kind", r.kind}, {"center", r.center}, {"radii", r.radii},
                      {"core", r.core}, {"margin", r.margin}});
    return {{"map", {{"components", map}}},
            {"family",
             {{"kind", family_kind}, {"expr", family_expr}, {"A", A}, {"B", B},
              {"kappa", kappa}, {"lambda", lambda}, {"xi", xi}, {"eta", eta}}},
            {"window", {{"x0", window.x0}, {"x1", window.x1}, {"y0", window.y0}, {"y1", window.y1},
                        {"nx", nx}, {"ny", ny}}},
            {"run",
             {{"n", n}, {"n_list", n_list}, {"trials", trials}, {"seed", seed}, {"method", method},
              {"representation", representation}, {"jmax", jmax},
              {"allow_failed_audit", allow_failed_audit}, {"curve_normalization", curve_normalization},
              {"retain_zeros", retain_zeros ? nlohmann::json(*retain_zeros) : nlohmann::json(nullptr)}}},
            {"rho", rhos}};
  }

  std::string digest() const { return sha256_hex(canonical().dump()); }

  static std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
      throw Error("SHA-256 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      hex += buf;
    }
    return hex;
  }
};

namespace detail {

template <class T>
T toml_get(const toml::table& t, std::string_view key, T fallback) {
  const auto node = t[key];
  if (!node) return fallback;
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto s = node.value<std::string>()) return *s;
    if (auto i = node.value<long long>()) return std::to_string(*i);  // certificates may be integers
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto b = node.value<bool>()) return *b;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto d = node.value<double>()) return *d;
  } else {
    if (auto i = node.value<long long>()) return static_cast<T>(*i);
  }
  throw ConfigError("config key '" + std::string(key) + "' has the wrong type");
}

template <class T>
std::vector<T> toml_array(const toml::table& t, std::string_view key, std::vector<T> fallback) {
  const auto node = t[key];
  if (!node) return fallback;
  const auto* arr = node.as_array();
  if (!arr) throw ConfigError("config key '" + std::string(key) + "' must be an array");
  std::vector<T> out;
  for (const auto& e : *arr) {
    std::optional<T> v;
    if constexpr (std::is_same_v<T, std::string>) v = e.template value<std::string>();
    else if constexpr (std::is_floating_point_v<T>) v = e.template value<double>();
    else if (auto i = e.template value<long long>()) v = static_cast<T>(*i);
    if (!v) throw ConfigError("config key '" + std::string(key) + "' has an element of the wrong type");
    out.push_back(*v);
  }
  return out;
}

inline const toml::table& section(const toml::table& root, std::string_view name) {
  static const toml::table empty;
  const auto node = root[name];
  if (!node) return empty;
  if (const auto* t = node.as_table()) return *t;
  throw ConfigError("config section [" + std::string(name) + "] must be a table");
}

inline void reject_unknown(const toml::table& t, std::initializer_list<std::string_view> known,
                           const std::string& where) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (auto name : known) ok |= k.str() == name;
    if (!ok) throw ConfigError("unknown config key '" + std::string(k.str()) + "' in " + where);
  }
}

}  // namespace detail

inline RunConfig parse_config(std::string_view text, const std::string& source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  using namespace detail;
  reject_unknown(root, {"map", "family", "window", "run", "rho"}, "the top level");
  RunConfig c;

  const auto& m = section(root, "map");
  reject_unknown(m, {"components"}, "[map]");
  c.map = toml_array<std::string>(m, "components", c.map);

  const auto& f = section(root, "family");
  reject_unknown(f, {"kind", "expr", "A", "B", "kappa", "lambda", "xi", "eta"}, "[family]");
  c.family_kind = toml_get(f, "kind", c.family_kind);
  c.family_expr = toml_get(f, "expr", c.family_expr);
  c.A = toml_get(f, "A", c.A);
  c.B = toml_get(f, "B", c.B);
  c.kappa = toml_get(f, "kappa", c.kappa);
  c.lambda = toml_get(f, "lambda", c.lambda);
  c.xi = toml_get(f, "xi", c.xi);
  c.eta = toml_get(f, "eta", c.eta);

  const auto& w = section(root, "window");
  reject_unknown(w, {"x0", "x1", "y0", "y1", "nx", "ny"}, "[window]");
  c.window.x0 = toml_get(w, "x0", c.window.x0);
  c.window.x1 = toml_get(w, "x1", c.window.x1);
  c.window.y0 = toml_get(w, "y0", c.window.y0);
  c.window.y1 = toml_get(w, "y1", c.window.y1);
  c.nx = toml_get(w, "nx", c.nx);
  c.ny = toml_get(w, "ny", c.ny);

  const auto& r = section(root, "run");
  reject_unknown(r,
                 {"n", "n_list", "trials", "seed", "method", "representation", "jmax", "out", "threads",
                  "allow_failed_audit", "curve_normalization", "retain_zeros"},
                 "[run]");
  c.n = toml_get(r, "n", c.n);
  c.n_list = toml_array<int>(r, "n_list", c.n_list);
  c.trials = toml_get(r, "trials", c.trials);
  c.seed = static_cast<std::uint64_t>(toml_get<long long>(r, "seed", static_cast<long long>(c.seed)));
  c.method = toml_get(r, "method", c.method);
  c.representation = toml_get(r, "representation", c.representation);
  c.jmax = toml_get(r, "jmax", c.jmax);
  c.out = toml_get(r, "out", c.out);
  c.threads = toml_get(r, "threads", c.threads);
  c.allow_failed_audit = toml_get(r, "allow_failed_audit", c.allow_failed_audit);
  c.curve_normalization = toml_get(r, "curve_normalization", c.curve_normalization);
  if (r["retain_zeros"]) c.retain_zeros = toml_get(r, "retain_zeros", false);

  if (const auto node = root["rho"]) {
    const auto* arr = node.as_array();
    if (!arr) throw ConfigError("[[rho]] must be an array of tables");
    for (const auto& e : *arr) {
      const auto* t = e.as_table();
      if (!t) throw ConfigError("[[rho]] entries must be tables");
      reject_unknown(*t, {"id", "kind", "center", "radii", "core", "margin"}, "[[rho]]");
      RhoDef d;
      d.id = toml_get<std::string>(*t, "id", "rho" + std::to_string(c.rho.size()));
      d.kind = toml_get(*t, "kind", d.kind);
      const auto center = toml_array<double>(*t, "center", {0.0, 0.0});
      if (center.size() != 2) throw ConfigError("rho center must be [re, im]");
      d.center = {center[0], center[1]};
      d.radii = toml_array<double>(*t, "radii", {});
      const auto core = toml_array<double>(*t, "core", {0, 1, 0, 1});
      if (core.size() != 4) throw ConfigError("rho core must be [x0, x1, y0, y1]");
      d.core = {core[0], core[1], core[2], core[3]};
      d.margin = toml_get(*t, "margin", d.margin);
      c.rho.push_back(std::move(d));
    }
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace zerolab
