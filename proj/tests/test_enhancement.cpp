#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "v2spin/enhancement.hpp"

using namespace v2spin;

namespace {

SpinSystem si4() {
  SpinSystem s;
  s.D = 34.89;
  s.nuclei.push_back(Nucleus::si29(HyperfineTensor::diagonal(-2.7, -2.6, -2.2)));
  return s;
}

}  // namespace

TEST(Enhancement, UnityWithoutHyperfine) {
  SpinSystem s;
  s.nuclei.push_back(Nucleus::si29(HyperfineTensor{}));
  for (double b : {5.0, 25.0, 37.0, 150.0}) {
    EXPECT_EQ(enhancement_analytic_m32(s, b), 1.0);
    for (int ms : {-3, -1, 1, 3}) EXPECT_NEAR(enhancement_exact(s, b, ms), 1.0, 1e-12);
  }
}

TEST(Enhancement, ResonantMixingAngle) {
  auto s = si4();
  const auto& a = s.nuclei[0].A;
  const double b_res = (2.0 * s.D - a.zz) / (s.gamma_e - s.nuclei[0].gamma_n);
  EXPECT_NEAR(mixing_angle_m32(s, b_res), std::numbers::pi / 4.0, 1e-6);
  EXPECT_NEAR(mixing_angle_m32(s, 1e7), 0.0, 1e-5);
}

TEST(Enhancement, AnalyticTracksExactAwayFromResonance) {
  const auto s = si4();
  for (double b : {10.0, 15.0, 20.0, 30.0, 35.0, 40.0}) {
    const double ex = enhancement_exact(s, b, -3), an = enhancement_analytic_m32(s, b);
    EXPECT_LT(std::abs(ex - an) / std::abs(an), 0.05) << b;
    EXPECT_GT(ex * an, 0.0);
  }
}

TEST(Enhancement, SublevelOrderingAt37G) {
  const auto s = si4();
  const double m3 = std::abs(enhancement_exact(s, 37.0, -3));
  const double m1 = std::abs(enhancement_exact(s, 37.0, -1));
  const double p1 = std::abs(enhancement_exact(s, 37.0, 1));
  const double p3 = std::abs(enhancement_exact(s, 37.0, 3));
  EXPECT_GT(m3, m1);
  EXPECT_GT(m1, p1);
  EXPECT_GT(p1, p3);
}

TEST(Enhancement, LargeFieldApproachesUnitySlowly) {
  // The mixing angle decays as 1/B while gamma_e/gamma_n is ~3300, so the
  // enhancement stays far from 1 at laboratory fields.
  const auto s = si4();
  EXPECT_GT(std::abs(enhancement_analytic_m32(s, 150.0)), 10.0);
  EXPECT_NEAR(enhancement_analytic_m32(s, 1e6), 1.0, 0.01);
}

TEST(Enhancement, CurveMarksHybridizedPointsAsNaN) {
  const auto curve = enhancement_curve(si4(), -1, {0.0, 10.0}, false);
  ASSERT_EQ(curve.points.size(), 2u);
  EXPECT_TRUE(std::isnan(curve.points[0].alpha));
  EXPECT_FALSE(std::isnan(curve.points[1].alpha));
  EXPECT_THROW(enhancement_curve(si4(), -1, {10.0}, true), Error);
}

TEST(Enhancement, HybridizedErrorKind) {
  try {
    enhancement_exact(si4(), 0.0, -3);
    FAIL() << "expected a hybridized error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Hybridized);
    EXPECT_TRUE(e.is_numerical());
  }
}

TEST(Enhancement, InputErrors) {
  auto s = si4();
  EXPECT_THROW(enhancement_exact(s, 37.0, -3, 1), Error);
  EXPECT_THROW(enhancement_exact(s, 37.0, -3, 0, "uu"), Error);
  s.nuclei[0].gamma_n = 0.0;
  s.nuclei[0].isotope = Isotope::Custom;
  EXPECT_THROW(enhancement_analytic_m32(s, 37.0), Error);
  SpinSystem two = si4();
  two.nuclei.push_back(two.nuclei[0]);
  EXPECT_THROW(mixing_angle_m32(two, 37.0), Error);
}

TEST(Enhancement, SpectatorConfiguration) {
  SpinSystem s = si4();
  s.nuclei.push_back(Nucleus::c13(HyperfineTensor::isotropic(0.4)));
  const double up = enhancement_exact(s, 37.0, -3, 0, "uu");
  const double down = enhancement_exact(s, 37.0, -3, 0, "ud");
  EXPECT_NEAR(up, enhancement_exact(si4(), 37.0, -3), 0.05 * std::abs(up));
  EXPECT_NEAR(down, up, 0.05 * std::abs(up));
}

TEST(Rabi, Frequency) {
  EXPECT_NEAR(rabi_frequency(-400.0, -8.465e-4, 1.0), 400.0 * 8.465e-4 / 2.0, 1e-15);
  EXPECT_THROW(rabi_frequency(1.0, 1.0, -1.0), Error);
}
