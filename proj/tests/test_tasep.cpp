#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "slabsep/oracle.hpp"
#include "slabsep/rng.hpp"
#include "slabsep/tasep.hpp"

using namespace slabsep;
using namespace slabsep::tasep;

namespace {

// Time-averaged occupation law of one long run.
std::vector<double> time_average(const BoundaryParams& p, int n, double burn_in, int events, std::uint64_t seed) {
  Simulator sim(Configuration::all_empty(n), p);
  CounterRng rng(seed);
  sim.run_until(burn_in, rng);
  std::vector<double> occ(std::size_t{1} << n, 0.0);
  double total = 0;
  for (int i = 0; i < events; ++i) {
    const auto s = sim.state().index();
    const double t0 = sim.time();
    sim.step(rng, 1e300);
    occ[s] += sim.time() - t0;
    total += sim.time() - t0;
  }
  for (auto& v : occ) v /= total;
  return occ;
}

Configuration random_config(CounterRng& rng, int n) {
  Configuration c(n);
  for (int i = 0; i < n; ++i) c[i] = rng() & 1;
  return c;
}

}  // namespace

TEST(Configuration, IndexAndString) {
  const auto c = Configuration::from_string("0110");
  EXPECT_EQ(c.size(), 4);
  EXPECT_EQ(c.index(), 0b0110u);
  EXPECT_EQ(Configuration::from_index(6, 4), c);
  EXPECT_EQ(c.to_string(), "0110");
  EXPECT_EQ(c.particles(), 2);
  EXPECT_EQ(Configuration::from_string("100").reflected(), Configuration::from_string("110"));
  EXPECT_THROW(Configuration::from_string("012"), std::invalid_argument);
  EXPECT_THROW(Configuration(std::vector<std::uint8_t>{0, 3}), std::invalid_argument);
}

TEST(Simulate, ZeroTimeKeepsState) {
  const auto c = Configuration::from_string("10110");
  EXPECT_EQ(simulate(c, {0.6, 0.2}, 0.0, 1).final_state, c);
  EXPECT_THROW(simulate(c, {0.6, 0.2}, -1.0, 1), std::invalid_argument);
  EXPECT_THROW(simulate(Configuration{}, {0.6, 0.2}, 1.0, 1), std::invalid_argument);
}

TEST(Simulate, SingleSiteOccupation) {
  const BoundaryParams p{0.3, 0.7};
  const auto occ = time_average(p, 1, 10, 400000, 11);
  // two-state chain; SE of a time average over ~2e5 cycles is below 2e-3
  EXPECT_NEAR(occ[1], 0.3, 0.01);
}

TEST(Simulate, TwoSiteStationaryFrequencies) {
  const auto occ = time_average({1.0, 1.0}, 2, 10, 1000000, 12);
  EXPECT_NEAR(occ[0b00], 0.2, 0.01);
  EXPECT_NEAR(occ[0b01], 0.4, 0.01);  // site 1 occupied
  EXPECT_NEAR(occ[0b10], 0.2, 0.01);
  EXPECT_NEAR(occ[0b11], 0.2, 0.01);
}

TEST(Simulate, DeterministicTrajectory) {
  SimulateOptions opt;
  opt.record_events = true;
  opt.snapshot_times = {0.5, 1.0, 2.5, 4.0};
  const auto a = simulate(Configuration::all_empty(6), {0.6, 0.2}, 5.0, 99, opt);
  const auto b = simulate(Configuration::all_empty(6), {0.6, 0.2}, 5.0, 99, opt);
  std::ostringstream sa, sb;
  a.trajectory->write_csv(sa);
  b.trajectory->write_csv(sb);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.trajectory->events, b.trajectory->events);
  EXPECT_EQ(sa.str().rfind("t,site,value\n", 0), 0u);
}

TEST(Simulate, ReplayReproducesSnapshots) {
  SimulateOptions opt;
  opt.record_events = true;
  for (int s = 0; s < 20; ++s) opt.snapshot_times.push_back(0.37 * s);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto init = Configuration::from_string("1010011");
    const auto r = simulate(init, {0.4, 0.7}, 8.0, seed, opt);
    const auto& tr = *r.trajectory;
    for (std::size_t i = 1; i < tr.events.size(); ++i) ASSERT_LT(tr.events[i - 1].t, tr.events[i].t);
    for (const auto& snap : tr.snapshots) EXPECT_EQ(replay(tr.initial, tr.events, snap.t), snap.state);
    EXPECT_EQ(replay(tr.initial, tr.events, 8.0), r.final_state);
  }
}

TEST(Simulate, GeneratorFidelity) {
  const BoundaryParams p{0.6, 0.3};
  for (int n = 1; n <= 4; ++n) {
    const auto q = oracle::generator(p, n);
    for (std::uint64_t s = 0; s < (1u << n); ++s) {
      const int reps = 20000;
      std::vector<int> count(std::size_t{1} << n, 0);
      double hold = 0;
      for (int r = 0; r < reps; ++r) {
        Simulator sim(Configuration::from_index(s, n), p);
        CounterRng rng(derive_seed(1000 * n + s, r));
        sim.step(rng, 1e300);
        hold += sim.time();
        ++count[sim.state().index()];
      }
      const double exit_rate = -q.rate(s, s);
      EXPECT_NEAR(hold / reps, 1 / exit_rate, 4 / exit_rate / std::sqrt(reps));
      for (std::uint64_t t = 0; t < (1u << n); ++t) {
        if (t == s) continue;
        const double pt = q.rate(s, t) / exit_rate;
        const double se = std::sqrt(std::max(pt * (1 - pt), 1e-12) / reps);
        EXPECT_NEAR(static_cast<double>(count[t]) / reps, pt, 4 * se + 1e-12) << n << " " << s << "->" << t;
      }
    }
  }
}

TEST(Disagreement, Examples) {
  const auto xi = disagreement(Configuration::from_string("110"), Configuration::from_string("100"));
  EXPECT_EQ(std::vector<std::uint8_t>(xi.values().begin(), xi.values().end()),
            (std::vector<std::uint8_t>{1, 2, 0}));
  EXPECT_EQ(xi.upper(), Configuration::from_string("110"));
  EXPECT_EQ(xi.lower(), Configuration::from_string("100"));
  EXPECT_EQ(xi.second_class(), 1);
  const auto c = Configuration::from_string("1011");
  EXPECT_EQ(disagreement(c, c).second_class(), 0);
  EXPECT_THROW(disagreement(Configuration::from_string("01"), Configuration::from_string("10")),
               std::invalid_argument);
}

TEST(Coupling, EqualStartsCoalesceAtZero) {
  const auto c = Configuration::from_string("0110");
  const auto r = coupled_simulate(c, c, {0.3, 0.3}, 10.0, 5);
  EXPECT_EQ(r.tau, 0.0);
  EXPECT_FALSE(r.timed_out);
}

TEST(Coupling, RejectsUnorderedPair) {
  EXPECT_THROW(coupled_simulate(Configuration::from_string("01"), Configuration::from_string("10"), {0.5, 0.5},
                                1.0, 1),
               std::invalid_argument);
}

TEST(Coupling, SingleSiteRace) {
  const BoundaryParams p{0.4, 0.9};
  double sum = 0;
  const int reps = 40000;
  for (int r = 0; r < reps; ++r) {
    sum += coupled_simulate(Configuration::all_full(1), Configuration::all_empty(1), p, 1e9, r).tau;
  }
  const double mean = 1 / 1.3;
  EXPECT_NEAR(sum / reps, mean, 4 * mean / std::sqrt(reps));
}

TEST(Coupling, AbsorptionTimeMatchesOracle) {
  const BoundaryParams p{1.0, 1.0};
  const int n = 3;
  const double expected = oracle::coupled_absorption_time(p, n, Configuration::all_full(n), Configuration::all_empty(n));
  const int reps = 40000;
  double sum = 0, sq = 0;
  for (int r = 0; r < reps; ++r) {
    const double t =
        coupled_simulate(Configuration::all_full(n), Configuration::all_empty(n), p, 1e9, derive_seed(3, r)).tau;
    sum += t;
    sq += t * t;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sq / reps - mean * mean) / reps);
  EXPECT_NEAR(mean, expected, 1.96 * se * 2);  // two-sided 95% band, doubled for a stable test
}

TEST(Coupling, OrderingPreserved) {
  CounterRng pick(17);
  for (int run = 0; run < 10000; ++run) {
    const int n = 1 + static_cast<int>(pick() % 8);
    auto eta = random_config(pick, n);
    auto zeta = random_config(pick, n);
    for (int i = 0; i < n; ++i) {
      if (zeta[i] > eta[i]) std::swap(eta[i], zeta[i]);
    }
    const BoundaryParams p{0.1 + 0.9 * pick.uniform(), 0.1 + 0.9 * pick.uniform()};
    CoupledSimulator sim(eta, zeta, p);
    CounterRng rng(derive_seed(77, run));
    int steps = 0;
    while (steps++ < 200 && sim.step(rng, 50.0)) ASSERT_TRUE(sim.ordered());
  }
}

TEST(Coupling, MarginalsAreTasep) {
  const BoundaryParams p{0.7, 0.4};
  const int n = 6;
  const double t = 1.5;
  const int reps = 6000;
  std::vector<double> up(n, 0), low(n, 0), single(n, 0), single_low(n, 0);
  const auto top = Configuration::all_full(n);
  const auto bottom = Configuration::from_string("100000");
  for (int r = 0; r < reps; ++r) {
    CoupledSimulator sim(top, bottom, p);
    CounterRng rng(derive_seed(5, r));
    while (sim.step(rng, t)) {
    }
    const auto a = simulate(top, p, t, derive_seed(6, r)).final_state;
    const auto b = simulate(bottom, p, t, derive_seed(7, r)).final_state;
    for (int i = 0; i < n; ++i) {
      up[i] += sim.upper()[i] - a[i];
      low[i] += sim.lower()[i] - b[i];
      single[i] += a[i];
      single_low[i] += b[i];
    }
  }
  // two-sample z on the occupation difference; 0.001 / 12 two-sided is |z| < 3.9
  for (int i = 0; i < n; ++i) {
    const double pa = single[i] / reps;
    const double se = std::sqrt(2 * std::max(pa * (1 - pa), 0.01) / reps);
    EXPECT_LT(std::abs(up[i] / reps) / se, 3.9) << "upper site " << i + 1;
    const double pb = single_low[i] / reps;
    const double se_low = std::sqrt(2 * std::max(pb * (1 - pb), 0.01) / reps);
    EXPECT_LT(std::abs(low[i] / reps) / se_low, 3.9) << "lower site " << i + 1;
  }
}

TEST(Coupling, TraceSampling) {
  CouplingOptions opt;
  opt.trace_interval = 0.5;
  const auto r = coupled_simulate(Configuration::all_full(4), Configuration::all_empty(4), {0.5, 0.5}, 3.0, 8, opt);
  ASSERT_FALSE(r.second_class_trace.empty());
  EXPECT_EQ(r.second_class_trace.front().count, 4);
  for (std::size_t i = 1; i < r.second_class_trace.size(); ++i) {
    EXPECT_NEAR(r.second_class_trace[i].t - r.second_class_trace[i - 1].t, 0.5, 1e-12);
  }
}

TEST(Coupling, DefaultTimeouts) {
  EXPECT_NEAR(default_timeout({0.6, 0.2}, 10), 20 * 20.0 / 3 * 10, 1e-9);
  EXPECT_NEAR(default_timeout({0.25, 0.25}, 8), 50 * 64 / 0.1875, 1e-9);
}

TEST(Quantile, OrderStatistic) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  const auto q = quantile_with_ci(v, 0.75);
  EXPECT_EQ(q.s, 75);
  EXPECT_LE(q.ci_lo, 75);
  EXPECT_GE(q.ci_hi, 75);
  EXPECT_THROW(quantile_with_ci({}, 0.5), std::invalid_argument);
}

TEST(MixingUpper, AllCoalescedBound) {
  const auto est = mixing_upper_estimate({0.6, 0.2}, 4, 0.25, 200, 3);
  EXPECT_TRUE(est.ok);
  EXPECT_LE(est.s, *std::max_element(est.taus.begin(), est.taus.end()));
}

TEST(MixingUpper, SingleSiteExponentialQuantile) {
  const auto est = mixing_upper_estimate({1.0, 1.0}, 1, 0.25, 40000, 4);
  EXPECT_NEAR(est.s, std::log(4.0) / 2, 0.02);
  EXPECT_THROW(mixing_upper_estimate({1.0, 1.0}, 1, 1.5, 10, 4), std::invalid_argument);
  EXPECT_THROW(mixing_upper_estimate({1.0, 1.0}, 1, 0.25, 0, 4), std::invalid_argument);
}

TEST(MixingUpper, DominatesExactMixingTime) {
  const BoundaryParams p{0.6, 0.2};
  const double exact = oracle::mixing_time_exact(p, 8, 0.25).t_mix;
  int good = 0;
  const int runs = 20;
  for (int k = 0; k < runs; ++k) {
    good += mixing_upper_estimate(p, 8, 0.25, 400, derive_seed(123, k)).s >= exact;
  }
  EXPECT_GE(good, 19);
}

TEST(MixingUpper, TimeoutReported) {
  const auto est = mixing_upper_estimate({0.25, 0.25}, 16, 0.25, 20, 5, 1.0);
  EXPECT_FALSE(est.ok);
  EXPECT_EQ(est.horizon, 1.0);
  EXPECT_EQ(est.timeouts, 20u);
}
