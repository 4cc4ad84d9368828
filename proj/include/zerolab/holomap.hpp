#pragma once

#include <algorithm>
#include <bit>
#include <limits>
#include <string>
#include <vector>

#include "zerolab/common.hpp"
#include "zerolab/expr.hpp"
#include "zerolab/parallel.hpp"

namespace zerolab {

/// The map f = (f_1, ..., f_ell) into C^ell.
class HoloMap {
 public:
  HoloMap() = default;
  explicit HoloMap(std::vector<ExprProgram> components) : components_(std::move(components)) {
    if (components_.empty()) throw ConfigError("map needs at least one component");
  }
  static HoloMap from_strings(const std::vector<std::string>& texts) {
    std::vector<ExprProgram> c;
    c.reserve(texts.size());
    for (const auto& t : texts) c.push_back(ExprProgram::parse(t));
    return HoloMap(std::move(c));
  }

  std::size_t ell() const { return components_.size(); }
  const std::vector<ExprProgram>& components() const { return components_; }

  std::vector<Jet1> eval(cplx z) const {
    std::vector<Jet1> out;
    out.reserve(components_.size());
    for (const auto& c : components_) out.push_back(c.eval_jet(z));
    return out;
  }
  void eval_into(cplx z, std::vector<Jet1>& out) const {
    out.resize(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) out[k] = components_[k].eval_jet(z);
  }
  /// |f(z)|^2 = sum_j |f_j(z)|^2.
  double norm2(cplx z) const {
    double s = 0.0;
    for (const auto& c : components_) s += std::norm(c.eval(z));
    return s;
  }
  bool is_polynomial() const {
    return std::all_of(components_.begin(), components_.end(),
                       [](const ExprProgram& p) { return p.is_polynomial(); });
  }

 private:
  std::vector<ExprProgram> components_;
};

inline double norm_f(const HoloMap& map, cplx z) { return std::sqrt(map.norm2(z)); }

/// Integer-valued growth sequence (kappa_j, lambda_j, xi_j or eta_j).
class Certificate {
 public:
  enum class Kind { Constant, CeilLog2, Expression };

  Certificate() = default;

  /// Accepts a non-negative integer literal, "log2" (ceil(log2(j+1))),
  /// or any expression in j whose real part is rounded up.
  static Certificate parse(const std::string& text) {
    Certificate c;
    c.text_ = text;
    if (text == "log2" || text == "ceil_log2") {
      c.kind_ = Kind::CeilLog2;
      return c;
    }
    const bool integral = !text.empty() && std::all_of(text.begin(), text.end(), [](char ch) {
      return std::isdigit(static_cast<unsigned char>(ch));
    });
    if (integral) {
      c.kind_ = Kind::Constant;
      c.constant_ = std::stoll(text);
      return c;
    }
    c.kind_ = Kind::Expression;
    c.expr_ = ExprProgram::parse(text);
    if (c.expr_.depends_on_z()) throw ConfigError("certificate '" + text + "' may not depend on z");
    return c;
  }
  static Certificate constant(long long v) { return parse(std::to_string(v)); }

  Kind kind() const { return kind_; }
  const std::string& text() const { return text_; }

  long long at(long long j) const {
    switch (kind_) {
      case Kind::Constant: return constant_;
      case Kind::CeilLog2: return static_cast<long long>(std::bit_width(static_cast<unsigned long long>(j)));
      case Kind::Expression: {
        const double v = expr_.eval(0.0, j).real();
        return std::max(0LL, static_cast<long long>(std::ceil(v - 1e-9)));
      }
    }
    return 0;
  }

  /// c_j / j -> 0. Built-in kinds are sublinear by construction; expressions
  /// are probed at j = 10^6.
  bool sublinear() const {
    if (kind_ != Kind::Expression) return true;
    constexpr long long probe = 1'000'000;
    return static_cast<double>(at(probe)) / static_cast<double>(probe) < 1e-3;
  }

 private:
  Kind kind_ = Kind::Constant;
  long long constant_ = 0;
  ExprProgram expr_;
  std::string text_ = "0";
};

enum class FamilyKind { Unit, ScalarSeq, ExprFamily };

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::Unit: return "unit";
    case FamilyKind::ScalarSeq: return "scalar";
    case FamilyKind::ExprFamily: return "expr";
  }
  return "?";
}

/// The perturbation weights g_j together with their growth certificates
/// and the envelopes A, B (used through their moduli).
struct PerturbationFamily {
  FamilyKind kind = FamilyKind::Unit;
  ExprProgram expr = ExprProgram::parse("1");
  Certificate kappa, lambda, xi, eta;
  ExprProgram A = ExprProgram::parse("1");
  ExprProgram B = ExprProgram::parse("1");

  static PerturbationFamily unit() { return {}; }

  static PerturbationFamily scalar(const std::string& c_of_j) {
    PerturbationFamily f;
    f.kind = FamilyKind::ScalarSeq;
    f.expr = ExprProgram::parse(c_of_j);
    if (f.expr.depends_on_z()) throw ConfigError("scalar family c_j may not depend on z");
    return f;
  }

  static PerturbationFamily family(const std::string& g_of_zj) {
    PerturbationFamily f;
    f.kind = FamilyKind::ExprFamily;
    f.expr = ExprProgram::parse(g_of_zj);
    return f;
  }

  PerturbationFamily& with_certificates(const std::string& k, const std::string& l,
                                        const std::string& x, const std::string& e) {
    kappa = Certificate::parse(k);
    lambda = Certificate::parse(l);
    xi = Certificate::parse(x);
    eta = Certificate::parse(e);
    return *this;
  }
  PerturbationFamily& with_envelopes(const std::string& a, const std::string& b) {
    A = ExprProgram::parse(a);
    B = ExprProgram::parse(b);
    return *this;
  }

  bool constant_in_z() const { return kind != FamilyKind::ExprFamily || !expr.depends_on_z(); }

  Jet1 g(cplx z, long long j) const {
    switch (kind) {
      case FamilyKind::Unit: return {1.0, 0.0};
      case FamilyKind::ScalarSeq: return {expr.eval(0.0, j), 0.0};
      case FamilyKind::ExprFamily: return expr.eval_jet(z, j);
    }
    return {};
  }
  cplx g_value(cplx z, long long j) const {
    switch (kind) {
      case FamilyKind::Unit: return 1.0;
      case FamilyKind::ScalarSeq: return expr.eval(0.0, j);
      case FamilyKind::ExprFamily: return expr.eval(z, j);
    }
    return {};
  }
  double envelope_A(cplx z) const { return std::abs(A.eval(z)); }
  double envelope_B(cplx z) const { return std::abs(B.eval(z)); }
};

/// Certificate values with running maxima applied, j = 0..jmax.
inline std::vector<long long> monotone_sequence(const Certificate& c, long long jmax) {
  std::vector<long long> out(static_cast<std::size_t>(jmax + 1));
  long long run = 0;
  for (long long j = 0; j <= jmax; ++j) out[static_cast<std::size_t>(j)] = run = std::max(run, c.at(j));
  return out;
}

struct Witness {
  cplx z{};
  long long j = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct HypothesisResult {
  std::string hypothesis;  // "i", "ii", "iii", "compact_bound"
  bool pass = true;
  Witness witness;
  std::string detail;
};

struct AuditReport {
  std::vector<HypothesisResult> results;
  Window window;
  long long jmax = 0;
  long long tail_start = 0;  // J: the tail lower bound is estimated over J <= j <= jmax
  double c_min = 0.0;
  cplx c_min_at{};
  double sup_B = 0.0;
  long long sup_kappa = 0;
  long long sup_lambda = 0;

  bool pass() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  }
  const HypothesisResult& get(const std::string& name) const {
    for (const auto& r : results)
      if (r.hypothesis == name) return r;
    throw Error("no hypothesis named " + name);
  }
};

/// Audits g_0 != 0 ("i"), the growth bound ("ii"), the tail lower bound ("iii")
/// and the compactness bound on the window grid
/// for 0 <= j <= jmax. Violations are reported, never thrown.
inline AuditReport audit_hypotheses(const HoloMap& map, const PerturbationFamily& fam,
                                    const Window& w, long long jmax) {
  if (jmax < 1) throw ConfigError("audit requires jmax >= 1");
  w.validate();
  AuditReport rep;
  rep.window = w;
  rep.jmax = jmax;
  rep.tail_start = jmax / 2;

  const auto kappa = monotone_sequence(fam.kappa, jmax);
  const auto lambda = monotone_sequence(fam.lambda, jmax);
  const auto xi = monotone_sequence(fam.xi, jmax);
  const auto eta = monotone_sequence(fam.eta, jmax);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  struct RowResult {
    double min_g0 = kInf;
    cplx min_g0_at{};
    bool ii_fail = false;
    Witness ii_witness{{}, std::numeric_limits<long long>::max(), 0, 0};
    double log_cmin = kInf;
    cplx cmin_at{};
    long long cmin_j = 0;
    double sup_B = 0.0;
    cplx sup_B_at{};
    double min_A = kInf, min_B = kInf;
  };
  std::vector<RowResult> rows(static_cast<std::size_t>(w.ny));

  parallel_for(rows.size(), [&](std::size_t iy) {
    RowResult& r = rows[iy];
    for (int ix = 0; ix < w.nx; ++ix) {
      const cplx z = w.node(ix, static_cast<int>(iy));
      const double log1f = std::log1p(norm_f(map, z));
      const double a = fam.envelope_A(z), b = fam.envelope_B(z);
      const double logA = std::log(a), logB = std::log(b);
      r.min_A = std::min(r.min_A, a);
      r.min_B = std::min(r.min_B, b);
      if (b > r.sup_B) r.sup_B = b, r.sup_B_at = z;

      double tail_min = kInf;
      long long tail_j = 0;
      for (long long j = 0; j <= jmax; ++j) {
        const double g = std::abs(fam.g_value(z, j));
        const double logg = std::log(g);
        if (j == 0 && g < r.min_g0) r.min_g0 = g, r.min_g0_at = z;

        const auto sj = static_cast<std::size_t>(j);
        const double log_rhs = static_cast<double>(kappa[sj]) * logB + static_cast<double>(lambda[sj]) * log1f;
        if (logg > log_rhs + 1e-12 * (1.0 + std::abs(log_rhs)) && j < r.ii_witness.j) {
          r.ii_fail = true;
          r.ii_witness = {z, j, g, std::exp(log_rhs)};
        }
        if (j >= rep.tail_start) {
          const double v = static_cast<double>(xi[sj]) * logA + static_cast<double>(eta[sj]) * log1f + logg;
          if (v < tail_min) tail_min = v, tail_j = j;
        }
      }
      if (tail_min < r.log_cmin) r.log_cmin = tail_min, r.cmin_at = z, r.cmin_j = tail_j;
    }
  });

  RowResult total;
  for (const RowResult& r : rows) {
    if (r.min_g0 < total.min_g0) total.min_g0 = r.min_g0, total.min_g0_at = r.min_g0_at;
    if (r.ii_fail && r.ii_witness.j < total.ii_witness.j) total.ii_fail = true, total.ii_witness = r.ii_witness;
    if (r.log_cmin < total.log_cmin) total.log_cmin = r.log_cmin, total.cmin_at = r.cmin_at, total.cmin_j = r.cmin_j;
    if (r.sup_B > total.sup_B) total.sup_B = r.sup_B, total.sup_B_at = r.sup_B_at;
    total.min_A = std::min(total.min_A, r.min_A);
    total.min_B = std::min(total.min_B, r.min_B);
  }

  const bool growth_ii = fam.kappa.sublinear() && fam.lambda.sublinear();
  const bool growth_iii = fam.xi.sublinear() && fam.eta.sublinear();

  HypothesisResult h1{"i", total.min_g0 > 1e-12, {total.min_g0_at, 0, total.min_g0, 1e-12},
                      "min |g_0| over the audit grid"};
  HypothesisResult h2{"ii", !total.ii_fail && growth_ii, {}, ""};
  if (total.ii_fail) {
    h2.witness = total.ii_witness;
    h2.detail = "|g_j(z)| exceeds B^kappa_j (1+|f|)^lambda_j";
  } else {
    h2.detail = growth_ii ? "bound holds on the audited range" : "kappa or lambda is not o(j)";
  }

  rep.c_min = std::exp(total.log_cmin);
  rep.c_min_at = total.cmin_at;
  HypothesisResult h3{"iii", rep.c_min > 1e-12 && growth_iii,
                      {total.cmin_at, total.cmin_j, rep.c_min, 1e-12},
                      growth_iii ? "min over tail of A^xi (1+|f|)^eta |g_j|" : "xi or eta is not o(j)"};

  rep.sup_B = total.sup_B;
  rep.sup_kappa = kappa.back();
  rep.sup_lambda = lambda.back();
  const double ck = std::max({rep.sup_B, static_cast<double>(rep.sup_kappa), static_cast<double>(rep.sup_lambda)});
  const bool positive = total.min_A > 0.0 && total.min_B > 0.0;
  HypothesisResult hk{"compact_bound", std::isfinite(ck) && positive,
                      {total.sup_B_at, jmax, rep.sup_B, ck},
                      positive ? "C_K = max(sup B, kappa_jmax, lambda_jmax)" : "envelope A or B vanishes"};

  rep.results = {h1, h2, h3, hk};
  return rep;
}

}  // namespace zerolab
