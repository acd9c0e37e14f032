#include "slabsep/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "slabsep/oracle.hpp"
#include "slabsep/parallel.hpp"
#include "slabsep/rng.hpp"

namespace slabsep::analysis {

std::vector<int> StatisticSpec::project(const Configuration& eta) const {
  const int n = eta.size();
  const int b = std::max(1, std::min(blocks, n));
  const int w = std::max(1, bin_width);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(b + 2));
  int total = 0;
  for (int j = 0; j < b; ++j) {
    const int from = j * n / b;
    const int to = (j + 1) * n / b;
    int c = 0;
    for (int i = from; i < to; ++i) c += eta[i];
    total += c;
    out.push_back(c / w);
  }
  if (include_total) out.push_back(total / w);
  if (hole_majority) out.push_back(2 * (n - total) > n ? 1 : 0);
  return out;
}

std::string StatisticSpec::describe() const {
  return "blocks=" + std::to_string(blocks) + ",bin_width=" + std::to_string(bin_width) +
         ",total=" + (include_total ? "1" : "0") + ",hole_majority=" + (hole_majority ? "1" : "0");
}

namespace {

using Image = std::vector<int>;
using Histogram = std::map<Image, double>;

double tv_of(const Histogram& a, const Histogram& b) {
  double s = 0;
  for (const auto& [k, v] : a) {
    const auto it = b.find(k);
    s += std::abs(v - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : b) {
    if (!a.count(k)) s += v;
  }
  return 0.5 * s;
}

Histogram empirical(const std::vector<Image>& xs, std::size_t from, std::size_t to) {
  Histogram h;
  const double w = 1.0 / static_cast<double>(to - from);
  for (std::size_t i = from; i < to; ++i) h[xs[i]] += w;
  return h;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double t_quantile_975(std::size_t df) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228};
  if (df >= 1 && df <= 10) return table[df - 1];
  return 1.959963984540054 + 2.4 / static_cast<double>(df);
}

}  // namespace

TvEstimate tv_lower_exact(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n, const StatisticSpec& statistic) {
  if (a.size() != b.size() || a.size() != (Eigen::Index{1} << n)) {
    throw std::invalid_argument("exact distributions must cover all 2^N states");
  }
  Histogram ha, hb;
  for (Eigen::Index s = 0; s < a.size(); ++s) {
    const auto img = statistic.project(Configuration::from_index(static_cast<std::uint64_t>(s), n));
    ha[img] += a(s);
    hb[img] += b(s);
  }
  TvEstimate est;
  est.value = est.ci_lo = est.ci_hi = est.plug_in = tv_of(ha, hb);
  est.exact = true;
  est.statistic = statistic;
  return est;
}

TvEstimate tv_lower_estimate(const std::vector<Configuration>& a, const std::vector<Configuration>& b,
                             const StatisticSpec& statistic, std::uint64_t seed, int bootstrap) {
  if (a.size() < 100 || b.size() < 100) throw std::invalid_argument("need at least 100 samples per side");
  const std::size_t half = std::min(a.size(), b.size()) / 2;
  const std::size_t max_images = std::max<std::size_t>(2, half / 5);
  const int n = a.front().size();

  TvEstimate est;
  est.statistic = statistic;
  std::vector<Image> pa, pb;
  while (true) {
    pa.clear();
    pb.clear();
    std::map<Image, int> distinct;
    for (const auto& c : a) distinct[pa.emplace_back(est.statistic.project(c))];
    for (const auto& c : b) distinct[pb.emplace_back(est.statistic.project(c))];
    if (distinct.size() <= max_images || est.statistic.bin_width > n) break;
    est.coarsened = true;
    if (est.statistic.blocks > 1) {
      est.statistic.blocks /= 2;
    } else {
      est.statistic.bin_width *= 2;
    }
  }
  est.plug_in = tv_of(empirical(pa, 0, pa.size()), empirical(pb, 0, pb.size()));

  const std::size_t ha = pa.size() / 2, hb = pb.size() / 2;
  const auto fa = empirical(pa, 0, ha);
  const auto fb = empirical(pb, 0, hb);
  auto in_event = [&](const Image& img) {
    const auto ia = fa.find(img);
    const auto ib = fb.find(img);
    const double va = ia == fa.end() ? 0.0 : ia->second;
    const double vb = ib == fb.end() ? 0.0 : ib->second;
    return va > vb;
  };
  std::vector<char> ea(pa.size() - ha), eb(pb.size() - hb);
  for (std::size_t i = ha; i < pa.size(); ++i) ea[i - ha] = in_event(pa[i]);
  for (std::size_t i = hb; i < pb.size(); ++i) eb[i - hb] = in_event(pb[i]);
  auto mean = [](const std::vector<char>& v) {
    return static_cast<double>(std::count(v.begin(), v.end(), 1)) / static_cast<double>(v.size());
  };
  est.value = mean(ea) - mean(eb);

  CounterRng rng(seed);
  std::vector<double> boots;
  boots.reserve(static_cast<std::size_t>(bootstrap));
  for (int r = 0; r < bootstrap; ++r) {
    std::size_t ca = 0, cb = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) ca += ea[rng() % ea.size()];
    for (std::size_t i = 0; i < eb.size(); ++i) cb += eb[rng() % eb.size()];
    boots.push_back(static_cast<double>(ca) / static_cast<double>(ea.size()) -
                    static_cast<double>(cb) / static_cast<double>(eb.size()));
  }
  std::sort(boots.begin(), boots.end());
  est.ci_lo = boots.empty() ? est.value : quantile_sorted(boots, 0.025);
  est.ci_hi = boots.empty() ? est.value : quantile_sorted(boots, 0.975);
  return est;
}

Interval wilson(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0, 1};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == trials ? 1.0 : std::min(1.0, centre + half)};
}

LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("a fit needs at least two points");
  const auto m = x.size();
  std::vector<double> lx(m), ly(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("log-log fit needs positive values");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(m);
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(m);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("a fit needs distinct x values");
  LinearFit fit;
  fit.points = m;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (m >= 3) {
    double ssr = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ly[i] - fit.intercept - fit.slope * lx[i];
      ssr += r * r;
    }
    const double se = std::sqrt(ssr / static_cast<double>(m - 2) / sxx);
    const double t = t_quantile_975(m - 2);
    fit.slope_ci = Interval{fit.slope - t * se, fit.slope + t * se};
  }
  return fit;
}

LowerEndpoint mixing_lower_estimate(const BoundaryParams& params, int n, double epsilon, double t_max,
                                    double t_reference, std::size_t replicas, int grid, std::uint64_t seed,
                                    int threads) {
  if (grid < 1) throw std::invalid_argument("grid must have at least one point");
  if (!(t_max > 0) || !(t_reference > 0)) throw std::invalid_argument("grid and reference times must be positive");
  LowerEndpoint out;
  for (int j = 1; j <= grid; ++j) out.grid.push_back(t_max * j / grid);

  using Samples = std::vector<std::vector<Configuration>>;  // [grid][replica]
  auto run_from = [&](const Configuration& start, std::uint64_t stream) {
    Samples s(out.grid.size(), std::vector<Configuration>(replicas));
    parallel_for(replicas, threads, [&](std::size_t r) {
      tasep::SimulateOptions opt;
      opt.snapshot_times = out.grid;
      const auto res = tasep::simulate(start, params, t_max, derive_seed(derive_seed(seed, stream), r), opt);
      for (std::size_t j = 0; j < out.grid.size(); ++j) s[j][r] = res.trajectory->snapshots[j].state;
    });
    return s;
  };
  const auto empty = run_from(Configuration::all_empty(n), 1);
  const auto full = run_from(Configuration::all_full(n), 2);
  std::vector<Configuration> reference(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const auto start = r % 2 == 0 ? Configuration::all_empty(n) : Configuration::all_full(n);
    reference[r] = tasep::simulate(start, params, t_reference, derive_seed(derive_seed(seed, 3), r)).final_state;
  });

  const StatisticSpec spec;
  for (std::size_t j = 0; j < out.grid.size(); ++j) {
    const auto e = tv_lower_estimate(empty[j], reference, spec, derive_seed(seed, 100 + j));
    const auto f = tv_lower_estimate(full[j], reference, spec, derive_seed(seed, 100000 + j));
    out.tv_empty.push_back(e.ci_lo);
    out.tv_full.push_back(f.ci_lo);
    if (std::max(e.ci_lo, f.ci_lo) > epsilon) out.t = out.grid[j];
  }
  return out;
}

ScalingResult mixing_scaling(const BoundaryParams& params, const std::vector<int>& n_list, double epsilon,
                             std::uint64_t seed, const ScalingOptions& options) {
  if (n_list.empty()) throw std::invalid_argument("N list must not be empty");
  ScalingResult result;
  for (int n : n_list) {
    const auto up = tasep::mixing_upper_estimate(params, n, epsilon, options.replicas,
                                                 derive_seed(seed, static_cast<std::uint64_t>(n)), std::nullopt,
                                                 options.threads);
    ScalingRow row;
    row.n = n;
    row.upper = up.s;
    row.ci_lo = up.ci_lo;
    row.ci_hi = up.ci_hi;
    row.upper_ok = up.ok;
    row.taus = up.taus;
    if (!up.ok) {
      result.warnings.push_back("N=" + std::to_string(n) + ": timeout fraction above epsilon at horizon " +
                                std::to_string(up.horizon));
    }
    const auto low = mixing_lower_estimate(params, n, epsilon, 1.2 * up.s, options.reference_factor * up.s,
                                           options.lower_replicas, options.grid,
                                           derive_seed(seed, 1'000'000 + static_cast<std::uint64_t>(n)),
                                           options.threads);
    row.lower = low.t;
    row.midpoint = 0.5 * (row.lower + row.upper);
    result.rows.push_back(std::move(row));
  }
  if (result.rows.size() >= 2) {
    std::vector<double> xs, mids, ups;
    for (const auto& r : result.rows) {
      xs.push_back(r.n);
      mids.push_back(r.midpoint);
      ups.push_back(r.upper);
    }
    result.midpoint_fit = fit_loglog(xs, mids);
    result.upper_fit = fit_loglog(xs, ups);
    if (result.rows.size() == 2) result.warnings.push_back("two-point fit: slope reported without a CI");
  }
  return result;
}

MomentReport h_moment_check(double alpha, std::int64_t n, std::size_t replicas, std::uint64_t seed,
                            std::int64_t band, int threads) {
  if (!(alpha > 0 && alpha < 0.5)) throw std::invalid_argument("moment check requires 0 < alpha < 1/2");
  if (n < 1 || replicas < 2) throw std::invalid_argument("need n >= 1 and at least two replicas");
  MomentReport rep;
  rep.alpha = alpha;
  rep.n = n;
  rep.replicas = replicas;
  const double rho = alpha * (1 - alpha);
  rep.target_mean = static_cast<double>(n) / rho;
  rep.target_sigma2 = (1 - 2 * alpha) / (rho * rho);
  rep.values.resize(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const lpp::Environment env(lpp::EnvironmentSpec::half_quadrant(alpha, derive_seed(seed, r)));
    const auto v = lpp::passage_value(env, Point{0, 0}, Point{n, n}, lpp::Window{}.with_band(0, band));
    rep.values[r] = *v;
  });
  const double m = std::accumulate(rep.values.begin(), rep.values.end(), 0.0) / static_cast<double>(replicas);
  double ss = 0;
  for (double v : rep.values) ss += (v - m) * (v - m);
  rep.mean = m;
  rep.variance = ss / static_cast<double>(replicas - 1);
  rep.centred_mean = (m - rep.target_mean) / std::sqrt(static_cast<double>(n));
  rep.mean_z = (m - rep.target_mean) / std::sqrt(rep.variance / static_cast<double>(replicas));
  rep.variance_ratio = rep.variance / static_cast<double>(n) / rep.target_sigma2;
  return rep;
}

HittingReport hitting_stats(const BoundaryParams& params, int n, std::int64_t y, std::int64_t x,
                            std::size_t replicas, std::uint64_t seed, int threads) {
  const auto d = model::derive(params);
  if (d.phase != model::Phase::HighDensity) throw std::invalid_argument("hitting statistics need high density");
  if (y < 0 || y > n) throw std::invalid_argument("y must lie in [0, N]");
  const model::SlabGeometry geo(n);
  const Point start{n - y, 0};
  const Point target = geo.q(static_cast<double>(x) + 0.5 * n);
  if (!geo.on_lower(target) || !precedes(start, target)) {
    throw std::invalid_argument("target must be a lower-boundary point beyond the start");
  }
  HittingReport rep;
  rep.center = static_cast<double>(y) / (d.b * d.b - 1.0);
  rep.replicas = replicas;
  std::vector<std::optional<std::int64_t>> hits(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const lpp::Environment env(lpp::EnvironmentSpec::slab(n, params.alpha, params.beta, derive_seed(seed, r)));
    const auto g = lpp::geodesic(env, start, target);
    if (auto h = lpp::first_boundary_hit(g, lpp::Boundary::Lower, n)) hits[r] = h->offset;
  });
  std::vector<double> vals;
  for (const auto& h : hits) {
    if (h) {
      rep.hits.push_back(*h);
      vals.push_back(static_cast<double>(*h));
    } else {
      ++rep.misses;
    }
  }
  std::sort(vals.begin(), vals.end());
  rep.median = quantile_sorted(vals, 0.5);
  rep.q10 = quantile_sorted(vals, 0.1);
  rep.q90 = quantile_sorted(vals, 0.9);
  return rep;
}

ProbabilityEstimate traversal_prob(const BoundaryParams& params, int n, std::int64_t m, std::size_t replicas,
                                   std::uint64_t seed, int threads) {
  std::vector<char> hit(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const lpp::Environment env(lpp::EnvironmentSpec::slab(n, params.alpha, params.beta, derive_seed(seed, r)));
    hit[r] = lpp::traversing_event(env, m);
  });
  ProbabilityEstimate est;
  est.trials = replicas;
  est.successes = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  est.p = replicas ? static_cast<double>(est.successes) / static_cast<double>(replicas) : 0.0;
  est.ci = wilson(est.successes, est.trials);
  return est;
}

std::optional<Certificate> scan_at_certificate(const Configuration& initial, std::span<const tasep::Event> events,
                                               double t_cap) {
  Configuration eta = initial;
  const int n = eta.size();
  std::vector<int> label_at(static_cast<std::size_t>(n), 0);
  std::vector<int> pos{-1};  // pos[label]; n once the particle has left
  int i = 1;
  std::vector<double> times{0.0};

  auto check = [&](double now) -> std::optional<Certificate> {
    while (true) {
      const int p = i < static_cast<int>(pos.size()) ? pos[i] : -1;
      if (p == n - 1) return Certificate{i, times, now};
      // vacuous before entry and after leaving
      if (p < 0 || p >= n || eta[p + 1] == 0) return std::nullopt;
      times.push_back(now);
      ++i;
    }
  };

  if (auto c = check(0.0)) return c;
  for (const auto& e : events) {
    if (!(e.t < t_cap)) break;
    switch (e.kind) {
      case tasep::EventKind::Enter:
        if (eta[0] == 0) {
          eta[0] = 1;
          label_at[0] = static_cast<int>(pos.size());
          pos.push_back(0);
        }
        break;
      case tasep::EventKind::Exit:
        if (eta[n - 1] == 1) {
          eta[n - 1] = 0;
          if (label_at[n - 1] > 0) pos[label_at[n - 1]] = n;
          label_at[n - 1] = 0;
        }
        break;
      case tasep::EventKind::Hop: {
        const int x = e.site - 1;
        if (eta[x] == 1 && eta[x + 1] == 0) {
          eta[x] = 0;
          eta[x + 1] = 1;
          label_at[x + 1] = label_at[x];
          label_at[x] = 0;
          if (label_at[x + 1] > 0) pos[label_at[x + 1]] = x + 1;
        }
        break;
      }
    }
    if (auto c = check(e.t)) return c;
  }
  return std::nullopt;
}

std::optional<Certificate> scan_at_certificate(const tasep::CoupledTrajectory& trajectory, double t_cap) {
  if (trajectory.upper0.size() == 0) throw std::invalid_argument("trajectory carries no event log");
  return scan_at_certificate(trajectory.upper0, trajectory.events, t_cap);
}

CertificateReport validate_certificates(const BoundaryParams& params, int n, double t_cap, std::size_t replicas,
                                        std::uint64_t seed, int threads) {
  struct Outcome {
    bool cert = false, coalesced = false, violation = false, late = false;
  };
  std::vector<Outcome> out(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    tasep::CouplingOptions opt;
    opt.record_events = true;
    const auto res = tasep::coupled_simulate(Configuration::all_full(n), Configuration::all_empty(n), params, t_cap,
                                             derive_seed(seed, r), opt, true);
    const auto cert = scan_at_certificate(*res.trajectory, t_cap);
    auto& o = out[r];
    o.cert = cert.has_value();
    o.coalesced = !res.timed_out && res.tau <= t_cap;
    o.violation = o.cert && !o.coalesced;
    o.late = o.cert && (res.timed_out || res.tau > cert->tau);
  });
  CertificateReport rep;
  rep.replicas = replicas;
  rep.horizon = t_cap;
  for (const auto& o : out) {
    rep.certificates += o.cert;
    rep.coalesced += o.coalesced;
    rep.violations += o.violation;
    rep.late_coalescence += o.late;
  }
  return rep;
}

DensityReport density_profile(const BoundaryParams& params, int n, double burn_in, double duration,
                              std::uint64_t seed) {
  if (!(duration > 0) || !(burn_in >= 0)) throw std::invalid_argument("burn-in and duration must be valid");
  tasep::Simulator sim(Configuration::all_empty(n), params);
  CounterRng rng(seed);
  sim.run_until(burn_in, rng);
  std::vector<double> integral(static_cast<std::size_t>(n), 0.0), since(static_cast<std::size_t>(n), burn_in);
  auto flush = [&](int i, double now) {
    integral[i] += (now - since[i]) * sim.state()[i];
    since[i] = now;
  };
  const double t_end = burn_in + duration;
  tasep::Event e;
  while (true) {
    // flush the sites an event can touch before it changes them
    const auto before = sim.state();
    if (!sim.step(rng, t_end, &e)) break;
    auto touch = [&](int i) {
      integral[i] += (e.t - since[i]) * before[i];
      since[i] = e.t;
    };
    if (e.kind == tasep::EventKind::Hop) {
      touch(e.site - 1);
      touch(e.site);
    } else {
      touch(e.site - 1);
    }
  }
  for (int i = 0; i < n; ++i) flush(i, t_end);
  DensityReport rep;
  rep.target = 1.0 - params.beta;
  rep.burn_in = burn_in;
  rep.duration = duration;
  rep.profile.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rep.profile[i] = integral[i] / duration;
  const int lo = n / 4, hi = 3 * n / 4;
  double s = 0;
  for (int i = lo; i < hi; ++i) s += rep.profile[i];
  rep.mean_density = s / std::max(1, hi - lo);
  return rep;
}

SymmetryReport hole_symmetry_exact(const BoundaryParams& params, int n) {
  const auto st = oracle::stationary_exact(params, n);
  SymmetryReport rep;
  rep.residual = st.residual;
  for (Eigen::Index s = 0; s < st.pi.size(); ++s) {
    const auto c = Configuration::from_index(static_cast<std::uint64_t>(s), n);
    const auto r = static_cast<Eigen::Index>(c.reflected().index());
    rep.max_reflection_gap = std::max(rep.max_reflection_gap, std::abs(st.pi(s) - st.pi(r)));
    const int holes = n - std::popcount(static_cast<std::uint64_t>(s));
    if (2 * holes > n) rep.hole_majority += st.pi(s);
  }
  return rep;
}

ProbabilityEstimate hole_majority_mc(const BoundaryParams& params, int n, std::size_t replicas, double burn_in,
                                     std::uint64_t seed, int threads) {
  std::vector<char> hit(replicas, 0);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const auto start = r % 2 == 0 ? Configuration::all_empty(n) : Configuration::all_full(n);
    const auto c = tasep::simulate(start, params, burn_in, derive_seed(seed, r)).final_state;
    hit[r] = 2 * (n - c.particles()) > n;
  });
  ProbabilityEstimate est;
  est.trials = replicas;
  est.successes = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
  est.p = replicas ? static_cast<double>(est.successes) / static_cast<double>(replicas) : 0.0;
  est.ci = wilson(est.successes, est.trials);
  return est;
}

Eigen::VectorXd empirical_stationary(const BoundaryParams& params, int n, double burn_in, std::uint64_t events,
                                     std::uint64_t seed) {
  if (n > 20) throw std::invalid_argument("empirical stationary law limited to N <= 20");
  tasep::Simulator sim(Configuration::all_empty(n), params);
  CounterRng rng(seed);
  sim.run_until(burn_in, rng);
  Eigen::VectorXd time = Eigen::VectorXd::Zero(Eigen::Index{1} << n);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < events; ++i) {
    const auto s = static_cast<Eigen::Index>(sim.state().index());
    const double t0 = sim.time();
    sim.step(rng, kInf);
    time(s) += sim.time() - t0;
  }
  return time / time.sum();
}

nlohmann::json ExperimentRecord::to_json() const {
  nlohmann::json j;
  j["experiment"] = name;
  j["parameters"] = parameters;
  j["seed"] = seed;
  j["replicas"] = replicas;
  j["summary"] = summary;
  if (wall_clock) j["wall_clock_s"] = *wall_clock;
  return j;
}

}  // namespace slabsep::analysis
