#pragma once

// JSON and CSV serialization. JSON objects use sorted keys; every CSV file
// starts with a "# zerolab <version> digest=<hex>" line followed by a single
// column header line.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "zerolab/ensemble.hpp"
#include "zerolab/holomap.hpp"
#include "zerolab/mc.hpp"
#include "zerolab/theory.hpp"
#include "zerolab/zerofind.hpp"

namespace zerolab::io {

using json = nlohmann::json;

inline json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json rect_json(const Rect& r) { return {{"x0", r.x0}, {"x1", r.x1}, {"y0", r.y0}, {"y1", r.y1}}; }

inline json to_json(const AuditReport& rep) {
  json results = json::array();
  for (const auto& h : rep.results) {
    results.push_back({{"hypothesis", h.hypothesis},
                       {"pass", h.pass},
                       {"detail", h.detail},
                       {"witness",
                        {{"z", complex_json(h.witness.z)},
                         {"j", h.witness.j},
                         {"lhs", h.witness.lhs},
                         {"rhs", h.witness.rhs}}}});
  }
  return {{"pass", rep.pass()},
          {"results", results},
          {"window", rect_json(rep.window.rect)},
          {"grid", {rep.window.nx, rep.window.ny}},
          {"jmax", rep.jmax},
          {"tail_start", rep.tail_start},
          {"c_min", rep.c_min},
          {"c_min_at", complex_json(rep.c_min_at)},
          {"sup_B", rep.sup_B},
          {"sup_kappa", rep.sup_kappa},
          {"sup_lambda", rep.sup_lambda}};
}

inline json to_json(const CoefficientDraw& d) {
  json coeffs = json::array();
  for (const cplx& c : d.coeffs) coeffs.push_back(complex_json(c));
  return {{"trial", d.trial},
          {"layout", {{"representation", to_string(d.representation)}, {"ell", d.ell}, {"n", d.n}, {"size", d.coeffs.size()}}},
          {"coeffs", coeffs}};
}

/// Inverse of to_json(CoefficientDraw), for replaying a recorded draw.
inline CoefficientDraw draw_from_json(const json& j) {
  CoefficientDraw d;
  d.trial = j.at("trial").get<std::uint64_t>();
  const auto& layout = j.at("layout");
  const auto rep = layout.at("representation").get<std::string>();
  if (rep == "full_tensor") d.representation = Representation::FullTensor;
  else if (rep == "symmetric_multinomial") d.representation = Representation::SymmetricMultinomial;
  else throw ConfigError("unknown representation '" + rep + "' in draw record");
  d.ell = layout.at("ell").get<int>();
  d.n = layout.at("n").get<int>();
  for (const auto& c : j.at("coeffs")) d.coeffs.emplace_back(c.at(0).get<double>(), c.at(1).get<double>());
  if (d.coeffs.size() != layout.at("size").get<std::size_t>()) throw ConfigError("draw record size mismatch");
  return d;
}

inline json to_json(const EmpiricalMeasure& em, const std::string& digest) {
  json per_rho = json::object();
  for (const auto& s : em.stats)
    per_rho[s.id] = {{"mean", s.mean}, {"se", s.se}, {"stdev", s.stdev}, {"n_trials", s.n_trials}};
  json failures = json::array();
  for (const auto& f : em.failures) failures.push_back({{"trial", f.trial}, {"reason", f.reason}});
  return {{"spec_digest", digest},
          {"version", kVersion},
          {"n", em.n},
          {"method", to_string(em.method_used)},
          {"audit_overridden", em.audit_overridden},
          {"trials_ok", em.trials_ok},
          {"trials_failed", em.trials_failed},
          {"failures", failures},
          {"per_rho", per_rho}};
}

inline json pairing_json(const std::string& rho_id, int n, double expectation, const LimitPairing& lim) {
  return {{"rho_id", rho_id},
          {"n", n},
          {"expectation", expectation},
          {"limit_ac", lim.ac},
          {"limit_curve", lim.curve},
          {"limit_total", lim.total},
          {"potential_form", lim.potential},
          {"diff", lim.diff},
          {"excluded_length", lim.excluded_length}};
}

inline json to_json(const SweepRow& r) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"n", r.n},
          {"rho_id", r.rho_id},
          {"expectation", r.expectation},
          {"expectation_err", r.expectation_err},
          {"mc_mean", num(r.mc_mean)},
          {"mc_se", num(r.mc_se)},
          {"mc_trials", r.mc_trials},
          {"limit", r.limit},
          {"potential_form", r.potential},
          {"limit_diff", r.limit_diff},
          {"gap", r.gap},
          {"family_constant", r.family_constant},
          {"rate_bound", r.rate_bound},
          {"rate_ratio", r.rate_ratio}};
}

// ---------------------------------------------------------------------------
// CSV

inline void csv_preamble(std::ostream& os, const std::string& digest, const std::string& header) {
  os << "# zerolab " << kVersion << " digest=" << digest << '\n' << header << '\n';
  os << std::setprecision(17);
}

inline void write_zeros_csv(std::ostream& os, const std::string& digest, const EmpiricalMeasure& em) {
  if (!em.retained) throw NoZeroData();
  csv_preamble(os, digest, "trial,re,im,multiplicity,residual");
  for (std::size_t t = 0; t < em.zeros.size(); ++t) {
    if (!em.ok[t]) continue;
    for (const auto& z : em.zeros[t].zeros)
      os << t << ',' << z.location.real() << ',' << z.location.imag() << ',' << z.multiplicity << ','
         << z.residual << '\n';
  }
}

inline void write_density_csv(std::ostream& os, const std::string& digest, const HoloMap& map, const Window& w) {
  csv_preamble(os, digest, "x,y,d");
  for (int iy = 0; iy < w.ny; ++iy)
    for (int ix = 0; ix < w.nx; ++ix) {
      const cplx z = w.node(ix, iy);
      double d = 0.0;
      try {
        d = ac_density(map, z);
      } catch (const OnCurve&) {
        d = 0.0;  // the curve carries this point's mass
      }
      os << z.real() << ',' << z.imag() << ',' << d << '\n';
    }
}

/// One row per curve vertex; weight is the curve measure per unit length,
/// (1/2pi) Im(sum conj(f_j) f'_j t) with t the unit tangent.
inline void write_curve_csv(std::ostream& os, const std::string& digest, const CurveC& c) {
  csv_preamble(os, digest, "chain_id,x,y,weight_per_unit_length");
  for (std::size_t k = 0; k < c.polylines.size(); ++k)
    for (const auto& v : c.polylines[k].vertices) {
      const double weight = v.degenerate ? 0.0 : (0.5 * std::conj(v.grad) * v.tangent).imag() / (2.0 * std::numbers::pi);
      os << k << ',' << v.z.real() << ',' << v.z.imag() << ',' << weight << '\n';
    }
}

inline void write_sweep_csv(std::ostream& os, const std::string& digest, const std::vector<SweepRow>& rows) {
  csv_preamble(os, digest,
               "n,rho_id,expectation,expectation_err,mc_mean,mc_se,limit,potential_form,gap,rate_bound,rate_ratio");
  for (const auto& r : rows)
    os << r.n << ',' << r.rho_id << ',' << r.expectation << ',' << r.expectation_err << ',' << r.mc_mean << ','
       << r.mc_se << ',' << r.limit << ',' << r.potential << ',' << r.gap << ',' << r.rate_bound << ','
       << r.rate_ratio << '\n';
}

/// Digest recorded in an output file: "spec_digest" for JSON, the preamble for CSV.
inline std::string read_digest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  const std::string tag = "digest=";
  if (first.rfind("# zerolab", 0) == 0) {
    const auto p = first.find(tag);
    if (p == std::string::npos) throw ConfigError(path + ": preamble carries no digest");
    return first.substr(p + tag.size());
  }
  in.seekg(0);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception&) {
    throw ConfigError(path + ": neither a zerolab CSV nor JSON");
  }
  if (!j.contains("spec_digest")) throw ConfigError(path + ": no spec_digest field");
  return j.at("spec_digest").get<std::string>();
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace zerolab::io
