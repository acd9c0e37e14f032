// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: slabsep_acceptance [criterion ...] [--threads k]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "slabsep/analysis.hpp"
#include "slabsep/lpp.hpp"
#include "slabsep/model.hpp"
#include "slabsep/oracle.hpp"
#include "slabsep/parallel.hpp"
#include "slabsep/rng.hpp"
#include "slabsep/tasep.hpp"

using namespace slabsep;
using model::BoundaryParams;

namespace {

int g_threads = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome c1_constants() {
  double worst = 0;
  int points = 0;
  for (int i = 1; i <= 40; ++i) {
    for (int j = 1; j <= 25; ++j) {
      const double beta = 0.5 * j / 26.0;
      const double alpha = beta + (1.0 - beta) * i / 41.0;
      const auto d = model::derive({alpha, beta});
      if (d.phase != model::Phase::HighDensity) return {false, "grid point outside high density"};
      const double c1 = model::c_high_ratio_form(d.a_hat, d.b);
      const double c2 = model::c_high_rate_form(alpha, beta);
      const double c3 = model::c_high_from_x_star(d.a_hat, d.b);
      worst = std::max({worst, std::abs(c1 - c2) / c1, std::abs(c1 - c3) / c1});
      ++points;
    }
  }
  return {points == 1000 && worst <= 1e-12, fmt("points=%d max_rel_err=%.3g", points, worst)};
}

Outcome c2_stationary() {
  // three parameter sets per phase; the triple point admits only one
  const std::vector<BoundaryParams> sets{{0.6, 0.2}, {0.9, 0.3}, {0.4, 0.1},  {0.2, 0.6}, {0.3, 0.9},
                                         {0.1, 0.4}, {0.7, 0.8}, {1.0, 1.0}, {0.6, 0.5}, {0.3, 0.3},
                                         {0.1, 0.1}, {0.45, 0.45}, {0.5, 0.5}};
  double worst = 0;
  std::vector<std::pair<int, std::size_t>> jobs;
  for (int n = 2; n <= 5; ++n) {
    for (std::size_t k = 0; k < sets.size(); ++k) jobs.emplace_back(n, k);
  }
  std::vector<double> tv(jobs.size());
  parallel_for(jobs.size(), g_threads, [&](std::size_t j) {
    const auto [n, k] = jobs[j];
    const auto emp = analysis::empirical_stationary(sets[k], n, 50.0, 1'000'000, derive_seed(2, j));
    tv[j] = oracle::total_variation(emp, oracle::stationary_exact(sets[k], n).pi);
  });
  worst = *std::max_element(tv.begin(), tv.end());
  return {worst <= 0.02, fmt("instances=%zu max_tv=%.4f", jobs.size(), worst)};
}

Outcome c3_mixing_closed_form() {
  const double t = oracle::mixing_time_exact({1.0, 1.0}, 1, 0.25).t_mix;
  const double err = std::abs(t - std::log(2.0) / 2);
  return {err <= 1e-6, fmt("t_mix=%.9f err=%.2g", t, err)};
}

Outcome c4_dp_bruteforce() {
  std::size_t pairs = 0, mismatches = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int n = 1 + static_cast<int>(s % 4);
    const lpp::Environment env(lpp::EnvironmentSpec::slab(n, 0.3 + 0.005 * s, 0.8 - 0.004 * s, derive_seed(4, s)));
    const Point u{static_cast<std::int64_t>(s % 3), 0};
    for (std::int64_t d = 0; d <= 8; ++d) {
      for (std::int64_t x = u.x; x <= u.x + d; ++x) {
        const Point v{x, u.y + d - (x - u.x)};
        if (!env.contains(v)) continue;
        const auto dp = lpp::passage_value(env, u, v);
        const auto bf = oracle::lpp_bruteforce(env, u, v);
        ++pairs;
        if (dp.has_value() != bf.value.has_value() || (dp && *dp != *bf.value)) ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("pairs=%zu mismatches=%zu", pairs, mismatches)};
}

Outcome c5_coupling_law() {
  const BoundaryParams p{0.7, 0.4};
  const double t = 2.0;
  const std::size_t reps = 100000;
  double worst = 0;
  std::string detail;
  for (int n : {2, 4, 6}) {
    for (const auto& start : {Configuration::all_empty(n), Configuration::from_index(0b0101010101 & ((1u << n) - 1), n)}) {
      const auto exact = oracle::transient(p, n, start, t).p;
      const auto states = static_cast<Eigen::Index>(1) << n;
      std::vector<std::uint64_t> via_lpp(reps), via_sim(reps);
      const auto g0 = lpp::encode_interface(start, {0, 0});
      parallel_for(reps, g_threads, [&](std::size_t r) {
        const lpp::Environment env(lpp::EnvironmentSpec::slab(n, p.alpha, p.beta, derive_seed(50 + n, r)));
        via_lpp[r] = lpp::evolve_interface(env, g0, t).interface.configuration().index();
        via_sim[r] = tasep::simulate(start, p, t, derive_seed(60 + n, r)).final_state.index();
      });
      for (const auto* v : {&via_lpp, &via_sim}) {
        Eigen::VectorXd emp = Eigen::VectorXd::Zero(states);
        for (auto s : *v) emp(static_cast<Eigen::Index>(s)) += 1.0 / reps;
        worst = std::max(worst, oracle::total_variation(emp, exact));
      }
    }
  }
  return {worst <= 0.03, fmt("replicas=%zu max_tv=%.4f", reps, worst)};
}

Outcome c6_moments() {
  const auto r = analysis::h_moment_check(0.25, 4000, 400, 6, 256, g_threads);
  const bool ok = std::abs(r.mean_z) <= 4 && r.variance_ratio >= 0.7 && r.variance_ratio <= 1.3;
  return {ok, fmt("mean=%.1f target=%.1f z=%.2f var/n=%.3f ratio=%.3f", r.mean, r.target_mean, r.mean_z,
                  r.variance / 4000.0, r.variance_ratio)};
}

Outcome c7_hitting() {
  const auto r = analysis::hitting_stats({0.6, 0.2}, 200, 150, 600, 200, 7, g_threads);
  const double tol = std::pow(200.0, 0.85);
  const bool ok = std::isfinite(r.median) && std::abs(r.median - r.center) <= tol;
  return {ok, fmt("median=%.1f center=%.1f tol=%.1f misses=%zu q10=%.1f q90=%.1f", r.median, r.center, tol,
                  r.misses, r.q10, r.q90)};
}

Outcome c8_high_density() {
  const BoundaryParams p{0.6, 0.2};
  const double c = 20.0 / 3.0;
  analysis::ScalingOptions opt;
  opt.threads = g_threads;
  const auto res = analysis::mixing_scaling(p, {64, 128, 256}, 0.25, 8, opt);
  std::ostringstream os;
  std::vector<double> dist;
  bool contains = false;
  bool upper_ok = true;
  for (const auto& row : res.rows) {
    const double lo = row.lower / row.n, hi = row.upper / row.n, mid = row.midpoint / row.n;
    os << fmt("N=%d [%.3f, %.3f] mid=%.3f; ", row.n, lo, hi, mid);
    dist.push_back(std::abs(mid - c));
    upper_ok &= row.upper_ok;
    if (row.n == 256) contains = lo <= 1.25 * c && hi >= 0.75 * c;
  }
  const bool monotone = dist[1] <= dist[0] && dist[2] <= dist[1];
  os << fmt("contains=%d monotone=%d", contains, monotone);
  return {contains && monotone && upper_ok, os.str()};
}

Outcome c9_coexistence_scaling() {
  const BoundaryParams p{0.25, 0.25};
  std::vector<double> ns, ups;
  std::ostringstream os;
  bool ok = true;
  for (int n : {16, 32, 64}) {
    const auto est = tasep::mixing_upper_estimate(p, n, 0.25, 200, derive_seed(9, n), std::nullopt, g_threads);
    ok &= est.ok;
    ns.push_back(n);
    ups.push_back(est.s);
    os << fmt("N=%d s=%.0f; ", n, est.s);
  }
  const auto fit = analysis::fit_loglog(ns, ups);
  ok &= fit.slope >= 1.75 && fit.slope <= 2.25;
  os << fmt("exponent=%.3f", fit.slope);
  if (fit.slope_ci) os << fmt(" ci=[%.3f, %.3f]", fit.slope_ci->lo, fit.slope_ci->hi);
  return {ok, os.str()};
}

double coefficient_of_variation(const std::vector<double>& v) {
  double m = 0, s = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1)) / m;
}

Outcome c10_no_cutoff_signature() {
  const auto co = tasep::mixing_upper_estimate({0.25, 0.25}, 64, 0.25, 200, 10, std::nullopt, g_threads);
  const auto hd = tasep::mixing_upper_estimate({0.6, 0.2}, 64, 0.25, 200, 11, std::nullopt, g_threads);
  const double cv_co = coefficient_of_variation(co.taus);
  const double cv_hd = coefficient_of_variation(hd.taus);
  const bool ok = co.timeouts == 0 && hd.timeouts == 0 && cv_co >= 2 * cv_hd;
  return {ok, fmt("cv_coexistence=%.3f cv_high_density=%.3f ratio=%.2f", cv_co, cv_hd, cv_co / cv_hd)};
}

Outcome c11_traversal() {
  bool ok = true;
  std::ostringstream os;
  for (int n : {12, 16, 24}) {
    const auto est = analysis::traversal_prob({0.3, 0.3}, n, std::int64_t{n} * n, 500, derive_seed(11, n), g_threads);
    ok &= est.p >= 0.03;
    os << fmt("N=%d p=%.3f [%.3f, %.3f]; ", n, est.p, est.ci.lo, est.ci.hi);
  }
  return {ok, os.str()};
}

Outcome c12_density() {
  const auto r = analysis::density_profile({0.6, 0.2}, 256, 5000, 20000, 12);
  return {std::abs(r.mean_density - 0.8) <= 0.03, fmt("mean_density=%.4f target=0.8", r.mean_density)};
}

Outcome c13_symmetry() {
  bool ok = true;
  std::ostringstream os;
  for (int n : {4, 6}) {
    const auto r = analysis::hole_symmetry_exact({0.3, 0.3}, n);
    ok &= r.max_reflection_gap <= 1e-10 && r.hole_majority <= 0.5;
    os << fmt("N=%d gap=%.2g holes>N/2=%.6f; ", n, r.max_reflection_gap, r.hole_majority);
  }
  return {ok, os.str()};
}

Outcome c14_certificates() {
  const double rho = 0.3 * 0.7;
  const double t_cap = 4.0 * 144 / rho;
  const auto r = analysis::validate_certificates({0.3, 0.3}, 12, t_cap, 200, 14, g_threads);
  return {r.violations == 0, fmt("T=%.1f certificates=%zu coalesced=%zu violations=%zu", t_cap, r.certificates,
                                 r.coalesced, r.violations)};
}

// Invariant suites, each counting exact violations.
Outcome c15_invariants() {
  std::size_t superadd = 0, monotone = 0, subpath = 0, ordering = 0, flow = 0, jump = 0, band = 0;
  {
    const lpp::Environment env(lpp::EnvironmentSpec::slab(5, 0.3, 0.3, 151));
    CounterRng rng(152);
    auto rand_point = [&](Point base, int span) {
      while (true) {
        const Point q{base.x + static_cast<std::int64_t>(rng() % span), base.y + static_cast<std::int64_t>(rng() % span)};
        if (env.contains(q)) return q;
      }
    };
    int checked = 0;
    while (checked < 10000) {
      const Point u = rand_point({0, 0}, 6), v = rand_point(u, 8), w = rand_point(v, 8);
      const auto uv = lpp::passage_value(env, u, v), vw = lpp::passage_value(env, v, w);
      const auto uw = lpp::passage_value(env, u, w);
      if (!uv || !vw) continue;
      // right side composed in path order: a sweep from v seeded with T(u, v)
      lpp::LevelSweep sweep(env, lpp::Window::box(v, w), {{v, *uv}});
      while (sweep.level() < w.level() && sweep.advance()) {
      }
      if (!uw || *uw < sweep.value(w.offset())) ++superadd;
      ++checked;
    }
  }
  for (std::uint64_t s = 0; s < 20; ++s) {
    const lpp::Environment env(lpp::EnvironmentSpec::slab(6, 0.4, 0.6, derive_seed(153, s)));
    lpp::PassageField f(env, lpp::Window::box({0, 0}, {30, 30}), {{Point{0, 0}, 0.0}});
    for (std::int64_t x = 0; x <= 30; ++x) {
      for (std::int64_t y = 0; y <= 30; ++y) {
        const Point v{x, y};
        if (!f.reachable(v)) continue;
        if (f.reachable(v + kE1) && f.value(v + kE1) < f.value(v)) ++monotone;
        if (f.reachable(v + kE2) && f.value(v + kE2) < f.value(v)) ++monotone;
        const auto tb = lpp::restricted_passage(env, 3, {0, 0}, v.offset() <= 3 ? v : Point{0, 0});
        if (tb && v.offset() <= 3 && *tb > f.value(v)) ++band;
      }
    }
  }
  for (std::uint64_t s = 0; s < 100; ++s) {
    const lpp::Environment env(lpp::EnvironmentSpec::slab(4, 0.35, 0.55, derive_seed(154, s)));
    const auto g = lpp::geodesic(env, {0, 0}, {14, 11});
    auto sum = [&](std::size_t i, std::size_t j) {
      double acc = 0;
      for (std::size_t k = i; k < j; ++k) acc += env.weight(g.path[k]);
      return acc;
    };
    if (sum(0, g.path.size() - 1) != g.value) ++subpath;
    for (std::size_t i = 0; i < g.path.size(); ++i) {
      for (std::size_t j = i; j < g.path.size(); ++j) {
        if (*lpp::passage_value(env, g.path[i], g.path[j]) != sum(i, j)) ++subpath;
      }
    }
  }
  {
    CounterRng pick(155);
    for (int run = 0; run < 10000; ++run) {
      const int n = 1 + static_cast<int>(pick() % 8);
      Configuration eta(n), zeta(n);
      for (int i = 0; i < n; ++i) {
        eta[i] = pick() & 1;
        zeta[i] = eta[i] & (pick() & 1);
      }
      tasep::CoupledSimulator sim(eta, zeta, {0.1 + 0.9 * pick.uniform(), 0.1 + 0.9 * pick.uniform()});
      CounterRng rng(derive_seed(156, run));
      int steps = 0;
      while (steps++ < 200 && sim.step(rng, 50.0)) ordering += !sim.ordered();
    }
  }
  {
    CounterRng rng(157);
    for (int rep = 0; rep < 100; ++rep) {
      const int n = 1 + static_cast<int>(rng() % 8);
      const lpp::Environment env(
          lpp::EnvironmentSpec::slab(n, 0.2 + 0.8 * rng.uniform(), 0.2 + 0.8 * rng.uniform(), derive_seed(158, rep)));
      const double t = 15.0 * rng.uniform();
      const auto c = lpp::flow_counts(env, t);
      const auto g = lpp::evolve_interface(env, lpp::encode_interface(Configuration::all_empty(n), {0, 0}), t);
      if (g.interface.configuration().particles() != c.entered - c.exited) ++flow;
    }
  }
  for (int n = 1; n <= 6; ++n) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      const lpp::Environment env(lpp::EnvironmentSpec::slab(n, 0.5, 0.5, derive_seed(159, 100 * n + s)));
      const auto g0 = lpp::encode_interface(Configuration::all_full(n), {0, 0});
      std::vector<lpp::Source> src;
      for (Point q : g0.points()) src.push_back({q, 0.0});
      lpp::PassageField field(env, lpp::Window::box({0, -n}, {20, 20}), src);
      const auto evo = lpp::evolve_interface(env, g0, 12.0, true);
      const auto g = field.geodesic_to({14 + n, 14});
      for (std::size_t k = 0; k + 1 < g.path.size(); ++k) {
        const Point u = g.path[k];
        if (g.path[k + 1] - u != kE1) continue;
        const auto it = std::find_if(evo.events.begin(), evo.events.end(),
                                     [&](const lpp::GrowthEvent& e) { return e.corner == u; });
        if (it == evo.events.end()) continue;
        if (it->t != field.value(u + kE1) || it->label != u.y + 1 || it->site != u.offset()) ++jump;
      }
    }
  }
  const std::size_t total = superadd + monotone + subpath + ordering + flow + jump + band;
  return {total == 0, fmt("superadditivity=%zu monotonicity=%zu subpath=%zu ordering=%zu flow=%zu jump_time=%zu "
                          "band=%zu",
                          superadd, monotone, subpath, ordering, flow, jump, band)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"derived-constant identities", c1_constants},
      {"oracle equivalence (stationary)", c2_stationary},
      {"exact mixing closed form", c3_mixing_closed_form},
      {"LPP DP equals brute force", c4_dp_bruteforce},
      {"coupling and LPP law equivalence", c5_coupling_law},
      {"half-quadrant moments", c6_moments},
      {"hitting location", c7_hitting},
      {"high-density mixing constant", c8_high_density},
      {"coexistence N^2 scaling", c9_coexistence_scaling},
      {"no-cutoff signature", c10_no_cutoff_signature},
      {"traversal probability", c11_traversal},
      {"density profile", c12_density},
      {"coexistence symmetry", c13_symmetry},
      {"certificate soundness", c14_certificates},
      {"invariant suites", c15_invariants},
  };
  std::set<int> selected;
  if (const char* env = std::getenv("SLABSEP_THREADS")) g_threads = std::atoi(env);
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--threads" && i + 1 < argc) {
      g_threads = std::atoi(argv[++i]);
    } else {
      selected.insert(std::atoi(a.c_str()));
    }
  }
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s  %s  (%s; %.1fs)\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
