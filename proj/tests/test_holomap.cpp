#include <gtest/gtest.h>

#include "zerolab/holomap.hpp"

using namespace zerolab;

namespace {

const Window kBox({-2, 2, -2, 2}, 41, 41);

PerturbationFamily exp_tilt() {
  // e^{|z|} is not holomorphic; exp(3) bounds it on [-2,2]^2.
  return PerturbationFamily::family("exp(((-1)^j/(j+1))*z)").with_certificates("1", "0", "1", "0").with_envelopes("exp(3)", "exp(3)");
}

}  // namespace

TEST(HoloMap, NormExamples) {
  EXPECT_DOUBLE_EQ(norm_f(HoloMap::from_strings({"z"}), cplx(3, 4)), 5.0);
  EXPECT_DOUBLE_EQ(norm_f(HoloMap::from_strings({"z", "1"}), 0.0), 1.0);
  EXPECT_DOUBLE_EQ(norm_f(HoloMap::from_strings({"z", "z^2"}), 1.0), std::sqrt(2.0));
}

TEST(HoloMap, NormSquaredIsComponentSum) {
  const auto map = HoloMap::from_strings({"z", "exp(z)/3", "z^2 - 1i"});
  for (int iy = 0; iy < kBox.ny; iy += 5)
    for (int ix = 0; ix < kBox.nx; ix += 5) {
      const cplx z = kBox.node(ix, iy);
      double s = 0.0;
      for (const auto& c : map.components()) s += std::norm(c.eval(z));
      EXPECT_NEAR(map.norm2(z), s, 1e-15 * s);
      EXPECT_NEAR(norm_f(map, z) * norm_f(map, z), s, 4e-16 * s + 1e-300);
    }
}

TEST(HoloMap, RejectsEmptyAndPoles) {
  EXPECT_THROW(HoloMap(std::vector<ExprProgram>{}), ConfigError);
  EXPECT_THROW(norm_f(HoloMap::from_strings({"1/z"}), 0.0), PoleError);
}

TEST(Window, Validation) {
  EXPECT_THROW(Window(Rect{1, 0, 0, 1}, 3, 3), ConfigError);
  EXPECT_THROW(Window(Rect{0, 1, 0, 1}, 1, 3), ConfigError);
  const Window w({0, 1, 0, 2}, 3, 5);
  EXPECT_EQ(w.node(0, 0), cplx(0, 0));
  EXPECT_EQ(w.node(2, 4), cplx(1, 2));
}

TEST(Certificate, Kinds) {
  EXPECT_EQ(Certificate::parse("3").at(100), 3);
  const auto l2 = Certificate::parse("log2");
  for (long long j : {0, 1, 2, 3, 4, 7, 8, 1000})
    EXPECT_EQ(l2.at(j), static_cast<long long>(std::ceil(std::log2(static_cast<double>(j + 1))))) << j;
  const auto e = Certificate::parse("j/2");
  EXPECT_EQ(e.at(5), 3);
  EXPECT_FALSE(e.sublinear());
  EXPECT_TRUE(Certificate::parse("(j+1)^0 * 4").sublinear());
  EXPECT_TRUE(l2.sublinear());
  EXPECT_THROW(Certificate::parse("z"), ConfigError);
}

TEST(Certificate, MonotoneReplacement) {
  const auto c = Certificate::parse("2 - j");
  const auto m = monotone_sequence(c, 5);
  EXPECT_EQ(m, (std::vector<long long>{2, 2, 2, 2, 2, 2}));
}

TEST(Audit, UnitFamilyPasses) {
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), PerturbationFamily::unit(), kBox, 40);
  EXPECT_TRUE(rep.pass());
  EXPECT_DOUBLE_EQ(rep.c_min, 1.0);
  EXPECT_EQ(rep.sup_kappa, 0);
  EXPECT_EQ(rep.sup_lambda, 0);
  EXPECT_DOUBLE_EQ(rep.sup_B, 1.0);
}

TEST(Audit, ExpTiltPassesWithCminBound) {
  const auto map = HoloMap::from_strings({"z"});
  const auto fam = exp_tilt();
  const auto rep = audit_hypotheses(map, fam, kBox, 40);
  EXPECT_TRUE(rep.pass());
  EXPECT_GE(rep.c_min, std::exp(-2.0 * std::sqrt(2.0)));
  // Independent grid evaluation of min over J <= j <= jmax of A^xi |g_j|.
  double expect = std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < kBox.ny; ++iy)
    for (int ix = 0; ix < kBox.nx; ++ix)
      for (long long j = rep.tail_start; j <= 40; ++j) {
        const cplx z = kBox.node(ix, iy);
        const double s = (j % 2 ? -1.0 : 1.0) / static_cast<double>(j + 1);
        expect = std::min(expect, std::exp(3.0) * std::exp(s * z.real()));
      }
  EXPECT_NEAR(rep.c_min, expect, 1e-12 * expect);
}

TEST(Audit, GrowingScalarWithZeroKappaFailsAtJ1) {
  auto fam = PerturbationFamily::scalar("j+1");
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), fam, kBox, 10);
  EXPECT_FALSE(rep.pass());
  const auto& ii = rep.get("ii");
  EXPECT_FALSE(ii.pass);
  EXPECT_EQ(ii.witness.j, 1);
  EXPECT_DOUBLE_EQ(ii.witness.lhs, 2.0);
  EXPECT_DOUBLE_EQ(ii.witness.rhs, 1.0);
  EXPECT_TRUE(rep.get("i").pass);
}

TEST(Audit, ScalarFamiliesWithCertificatesPass) {
  const auto map = HoloMap::from_strings({"z"});
  auto up = PerturbationFamily::scalar("j+1").with_certificates("log2", "0", "0", "0").with_envelopes("1", "2");
  auto down = PerturbationFamily::scalar("1/(j+1)").with_certificates("0", "0", "log2", "0").with_envelopes("2", "1");
  EXPECT_TRUE(audit_hypotheses(map, up, kBox, 200).pass());
  const auto rep = audit_hypotheses(map, down, kBox, 200);
  EXPECT_TRUE(rep.pass());
  EXPECT_GE(rep.c_min, 1.0 - 1e-12);
}

TEST(Audit, FailsHypothesisOneWhenG0Vanishes) {
  auto fam = PerturbationFamily::family("z").with_certificates("1", "1", "0", "0").with_envelopes("1", "2");
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), fam, kBox, 4);
  EXPECT_FALSE(rep.get("i").pass);
  EXPECT_EQ(rep.get("i").witness.z, cplx(0.0));
}

TEST(Audit, FailsThreeWhenTailDecays) {
  auto fam = PerturbationFamily::scalar("2^(-j)");
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), fam, kBox, 60);
  EXPECT_TRUE(rep.get("ii").pass);
  EXPECT_FALSE(rep.get("iii").pass);
}

TEST(Audit, SuperlinearCertificateFails) {
  auto fam = PerturbationFamily::scalar("2^j").with_certificates("j", "0", "0", "0").with_envelopes("1", "2");
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), fam, kBox, 20);
  EXPECT_FALSE(rep.get("ii").pass);
  EXPECT_EQ(rep.get("ii").witness.j, 0);  // no numerical witness; growth condition fails
}

TEST(Audit, HypothesisTwoMonotoneInJmax) {
  const auto map = HoloMap::from_strings({"z", "1"});
  const std::vector<PerturbationFamily> fams = {
      PerturbationFamily::scalar("j+1").with_certificates("log2", "0", "0", "0").with_envelopes("1", "2"),
      PerturbationFamily::scalar("(j+1)^2").with_certificates("log2", "0", "0", "0").with_envelopes("1", "2"),
      PerturbationFamily::scalar("j+1"),
      exp_tilt(),
  };
  for (const auto& fam : fams) {
    bool passed_later = false;
    for (long long jmax = 64; jmax >= 1; jmax /= 2) {
      const bool pass = audit_hypotheses(map, fam, Window({-1, 1, -1, 1}, 9, 9), jmax).get("ii").pass;
      if (passed_later) {
        EXPECT_TRUE(pass) << "jmax " << jmax;
      }
      passed_later |= pass;
    }
  }
}

TEST(Audit, ReportsAuditedRange) {
  const auto rep = audit_hypotheses(HoloMap::from_strings({"z"}), exp_tilt(), kBox, 30);
  EXPECT_EQ(rep.jmax, 30);
  EXPECT_EQ(rep.tail_start, 15);
  EXPECT_EQ(rep.window.nx, 41);
  EXPECT_THROW(audit_hypotheses(HoloMap::from_strings({"z"}), exp_tilt(), kBox, 0), ConfigError);
}
