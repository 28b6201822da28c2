#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "v2spin/polarization.hpp"

using namespace v2spin;

namespace {

SpinSystem one_nucleus(HyperfineTensor a) {
  SpinSystem s;
  s.D = 34.89;
  s.nuclei.push_back(Nucleus::si29(a));
  return s;
}

const HyperfineTensor kSi2 = HyperfineTensor::diagonal(9.00, 9.03, 8.66);
const HyperfineTensor kSi4 = HyperfineTensor::diagonal(-2.7, -2.6, -2.2);

std::vector<double> linspace(double stop, int n) {
  std::vector<double> t;
  for (int i = 0; i <= n; ++i) t.push_back(stop * i / n);
  return t;
}

}  // namespace

TEST(FlipFlop, LorentzianRate) {
  EXPECT_DOUBLE_EQ(flip_flop_rate({1.0, 0.0, 10.0}), 10.0);
  EXPECT_DOUBLE_EQ(flip_flop_rate({1.0, 1.0, 10.0}), 5.0);
  EXPECT_DOUBLE_EQ(flip_flop_rate({0.0, 3.0, 10.0}), 0.0);
  EXPECT_NEAR(flip_flop_rate({0.1, 10.0, 10.0}), 10.0 * 0.01 / 100.01, 1e-15);
  EXPECT_THROW(flip_flop_rate({-1.0, 0.0, 10.0}), Error);
  EXPECT_THROW(flip_flop_rate({1.0, 0.0, 0.0}), Error);
}

TEST(RateModel, ColumnsSumToZeroAndRatesNonNegative) {
  for (auto line : {OpticalLine::A1, OpticalLine::A2}) {
    const auto m = build_rate_model(one_nucleus(kSi2), 37.0, line);
    EXPECT_LT(m.max_column_sum(), 1e-12);
    for (const auto& r : m.rates) EXPECT_GE(r.rate, 0.0);
    EXPECT_EQ(m.dimension(), 8u);
  }
}

TEST(RateModel, OpticalChannelsConserveNuclearState) {
  const auto m = build_rate_model(one_nucleus(kSi2), 37.0, OpticalLine::A1);
  int optical = 0, flipflop = 0;
  for (const auto& r : m.rates) {
    if (r.channel == RateChannel::OpticalA1) {
      ++optical;
      EXPECT_EQ(m.states[r.from].two_mi, m.states[r.to].two_mi);
      EXPECT_EQ(std::abs(m.states[r.from].two_ms), 1);
      EXPECT_EQ(std::abs(m.states[r.to].two_ms), 3);
    }
    if (r.channel == RateChannel::FlipFlop) ++flipflop;
  }
  EXPECT_EQ(optical, 4 * 2);
  EXPECT_GT(flipflop, 0);
}

TEST(RateModel, FromEntriesValidation) {
  EXPECT_THROW(rate_model_from_entries(1, {{0, 1, -1.0, RateChannel::FlipFlop}}), Error);
  EXPECT_THROW(rate_model_from_entries(1, {{0, 0, 1.0, RateChannel::FlipFlop}}), Error);
  EXPECT_THROW(rate_model_from_entries(1, {{0, 99, 1.0, RateChannel::FlipFlop}}), Error);
  const auto m = rate_model_from_entries(0, {{0, 1, 2.0, RateChannel::Relaxation}});
  EXPECT_DOUBLE_EQ(m.generator(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.generator(0, 0), -2.0);
}

TEST(RateModel, ParameterValidation) {
  OpticalParams p;
  p.cycling_rate = 0.0;
  EXPECT_THROW(build_rate_model(one_nucleus(kSi2), 37.0, OpticalLine::A1, p), Error);
  p = {};
  p.isc_branching = {0.7, 0.7};
  EXPECT_THROW(build_rate_model(one_nucleus(kSi2), 37.0, OpticalLine::A1, p), Error);
  p = {};
  p.electron_relaxation = -1.0;
  EXPECT_THROW(build_rate_model(one_nucleus(kSi2), 37.0, OpticalLine::A1, p), Error);
}

TEST(Evolution, MatchesUniformizationOracle) {
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A1);
  const auto p0 = thermal_populations(1);
  for (double t : {0.0, 0.3, 5.0, 60.0}) {
    const Eigen::VectorXd p = evolve_populations(m, p0, t);
    const Eigen::VectorXd ref = oracle::uniformized_evolution(m.generator, p0, t);
    EXPECT_LT((p - ref).cwiseAbs().maxCoeff(), 1e-9) << t;
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  }
}

TEST(Evolution, ZeroTimeIsIdentity) {
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A2);
  const auto p0 = product_populations({0.1, 0.2, 0.3, 0.4}, {0.25});
  EXPECT_EQ(evolve_populations(m, p0, 0.0), p0);
}

TEST(Evolution, RejectsBadDistributions) {
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A1);
  Eigen::VectorXd p = thermal_populations(1);
  p(0) += 0.1;
  EXPECT_THROW(evolve_populations(m, p, 1.0), Error);
  EXPECT_THROW(evolve_populations(m, thermal_populations(2), 1.0), Error);
  EXPECT_THROW(evolve_populations(m, thermal_populations(1), -1.0), Error);
}

TEST(SteadyState, MatchesSvdNullSpace) {
  OpticalParams p;
  p.electron_relaxation = 1e-3;
  p.nuclear_relaxation = 1e-4;
  const auto m = build_rate_model(one_nucleus(kSi2), 30.0, OpticalLine::A1, p);
  ASSERT_GT(oracle::second_smallest_singular(m.generator), 1e-8);
  const Eigen::VectorXd ss = steady_state(m);
  EXPECT_LT((ss - oracle::svd_stationary(m.generator)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((m.generator * ss).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SteadyState, NonUniqueWithoutRelaxationIsReported) {
  // With A_xx = A_yy and no relaxation, |+3/2,u> and |-3/2,d> are both
  // absorbing under A1 pumping.
  const auto m = build_rate_model(one_nucleus(HyperfineTensor::diagonal(9.0, 9.0, 8.66)), 37.0, OpticalLine::A1);
  EXPECT_THROW(steady_state(m), Error);
}

TEST(Polarization, A1AndA2PumpOppositeDirections) {
  OpticalParams p;
  p.electron_relaxation = 1e-3;
  for (const auto& a : {kSi2, kSi4}) {
    const auto s = one_nucleus(a);
    const double p1 = nuclear_polarization(build_rate_model(s, 37.0, OpticalLine::A1, p),
                                           steady_state(build_rate_model(s, 37.0, OpticalLine::A1, p)), 0, {-3, -1});
    const double p2 = nuclear_polarization(build_rate_model(s, 37.0, OpticalLine::A2, p),
                                           steady_state(build_rate_model(s, 37.0, OpticalLine::A2, p)), 0, {-3, -1});
    EXPECT_LT(p1 * p2, 0.0);
    EXPECT_GT(std::abs(p1), 0.5);
    EXPECT_GT(std::abs(p2), 0.5);
  }
}

TEST(Polarization, ThermalStartIsUnpolarized) {
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A1);
  EXPECT_NEAR(nuclear_polarization(m, thermal_populations(1), 0), 0.0, 1e-15);
  EXPECT_THROW(nuclear_polarization(m, thermal_populations(1), 1), Error);
  EXPECT_NEAR(nuclear_polarization(m, product_populations({0.25, 0.25, 0.25, 0.25}, {1.0}), 0), 1.0, 1e-15);
}

TEST(Buildup, ExponentialFitRecoversTimeConstant) {
  std::vector<double> t = linspace(100.0, 200), y;
  for (double v : t) y.push_back(0.1 - 0.8 * (1.0 - std::exp(-v / 17.0)));
  const auto fit = fit_exponential_buildup(t, y);
  ASSERT_TRUE(fit.T.has_value());
  EXPECT_NEAR(*fit.T, 17.0, 1e-6);
  EXPECT_NEAR(fit.amplitude, -0.8, 1e-8);
  EXPECT_NEAR(fit.offset, 0.1, 1e-8);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(Buildup, FlatCurveHasNoTimeConstant) {
  const auto fit = fit_exponential_buildup({0, 1, 2, 3, 4}, {0.2, 0.2, 0.2, 0.2, 0.2});
  EXPECT_FALSE(fit.T.has_value());
  EXPECT_THROW(fit_exponential_buildup({}, {}), Error);
}

TEST(Buildup, GslacManifoldCurveIsExponential) {
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A1);
  const auto curve = polarization_curve(m, thermal_populations(1), linspace(150.0, 150), 0, {-3, -1});
  ASSERT_TRUE(curve.fitted_T.has_value());
  EXPECT_GT(curve.r_squared, 0.999);
  EXPECT_GT(*curve.fitted_T, 1.0);
  EXPECT_THROW(polarization_curve(m, thermal_populations(1), {1.0, 0.5}, 0), Error);
  EXPECT_THROW(polarization_curve(m, thermal_populations(1), {}, 0), Error);
}

TEST(Buildup, NoFlipFlopMeansNoPolarization) {
  OpticalParams p;
  p.flip_flop = false;
  const auto m = build_rate_model(one_nucleus(kSi4), 37.0, OpticalLine::A1, p);
  const auto curve = polarization_curve(m, thermal_populations(1), linspace(50.0, 20), 0, {-3, -1});
  EXPECT_FALSE(curve.fitted_T.has_value());
  for (const auto& [t, v] : curve.points) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Polarization, PumpedStatesAt37G) {
  // Arrows in the literature denote the 29Si moment; with gamma_n < 0 the
  // moment-up state is mI = -1/2 ('d' here).
  OpticalParams p;
  p.electron_relaxation = 1e-3;
  const auto s = one_nucleus(kSi2);
  auto dominant_in_pair = [&](OpticalLine line) {
    const auto m = build_rate_model(s, 37.0, line, p);
    const auto ss = steady_state(m);
    std::size_t best = m.states.size();
    for (std::size_t i = 0; i < m.states.size(); ++i) {
      const int ms = m.states[i].two_ms;
      if (ms != -3 && ms != -1) continue;
      if (best == m.states.size() || ss(static_cast<Eigen::Index>(i)) > ss(static_cast<Eigen::Index>(best))) best = i;
    }
    return m.states[best].to_string();
  };
  EXPECT_EQ(dominant_in_pair(OpticalLine::A1), "|-3/2,d>");
  EXPECT_EQ(dominant_in_pair(OpticalLine::A2), "|-1/2,u>");
  const auto m = build_rate_model(s, 37.0, OpticalLine::A1, p);
  EXPECT_GT(std::abs(nuclear_polarization(m, steady_state(m), 0, {-3, -1})), 0.9);
}
