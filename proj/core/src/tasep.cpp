#include "slabsep/tasep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "slabsep/parallel.hpp"

namespace slabsep {

Configuration::Configuration(std::vector<std::uint8_t> sites) : sites_(std::move(sites)) {
  for (auto v : sites_) {
    if (v > 1) throw std::invalid_argument("configuration entries must be 0 or 1");
  }
}

Configuration Configuration::from_index(std::uint64_t index, int n) {
  if (n < 0 || n > 63) throw std::invalid_argument("configuration index supports 0..63 sites");
  Configuration c(n);
  for (int i = 0; i < n; ++i) c.sites_[i] = static_cast<std::uint8_t>((index >> i) & 1u);
  return c;
}

Configuration Configuration::from_string(const std::string& bits) {
  std::vector<std::uint8_t> v;
  v.reserve(bits.size());
  for (char ch : bits) {
    if (ch != '0' && ch != '1') throw std::invalid_argument("configuration string must contain only 0 and 1");
    v.push_back(static_cast<std::uint8_t>(ch - '0'));
  }
  return Configuration(std::move(v));
}

std::uint64_t Configuration::index() const {
  if (sites_.size() > 63) throw std::invalid_argument("configuration too long for an index");
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < sites_.size(); ++i) idx |= static_cast<std::uint64_t>(sites_[i]) << i;
  return idx;
}

int Configuration::particles() const {
  int c = 0;
  for (auto v : sites_) c += v;
  return c;
}

std::string Configuration::to_string() const {
  std::string s;
  s.reserve(sites_.size());
  for (auto v : sites_) s.push_back(static_cast<char>('0' + v));
  return s;
}

Configuration Configuration::reflected() const {
  std::vector<std::uint8_t> v(sites_.rbegin(), sites_.rend());
  for (auto& x : v) x = static_cast<std::uint8_t>(1 - x);
  return Configuration(std::move(v));
}

bool Configuration::dominates(const Configuration& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    if (sites_[i] < other.sites_[i]) return false;
  }
  return true;
}

std::ostream& operator<<(std::ostream& os, const Configuration& c) { return os << c.to_string(); }

namespace tasep {

void Trajectory::write_csv(std::ostream& os) const {
  os << "t,site,value\n";
  for (const auto& snap : snapshots) {
    for (int i = 0; i < snap.state.size(); ++i) {
      os << snap.t << ',' << (i + 1) << ',' << int(snap.state[i]) << '\n';
    }
  }
}

void apply(Configuration& eta, const Event& e) {
  const int n = eta.size();
  switch (e.kind) {
    case EventKind::Enter: eta[0] = 1; break;
    case EventKind::Exit: eta[n - 1] = 0; break;
    case EventKind::Hop: {
      const auto x = static_cast<std::size_t>(e.site - 1);
      if (eta[x] == 1 && eta[x + 1] == 0) {
        eta[x] = 0;
        eta[x + 1] = 1;
      }
      break;
    }
  }
}

Configuration replay(const Configuration& initial, std::span<const Event> events, double t_end) {
  Configuration eta = initial;
  for (const auto& e : events) {
    if (e.t > t_end) break;
    apply(eta, e);
  }
  return eta;
}

namespace {

void check_state(const Configuration& eta, const BoundaryParams& params) {
  params.validate();
  if (eta.size() < 1) throw std::invalid_argument("configuration must have at least one site");
}

// Swap-remove membership of bond indices.
void set_member(std::vector<int>& members, std::vector<int>& position, int pair, bool on) {
  const int slot = position[pair];
  if (on && slot < 0) {
    position[pair] = static_cast<int>(members.size());
    members.push_back(pair);
  } else if (!on && slot >= 0) {
    const int last = members.back();
    members[slot] = last;
    position[last] = slot;
    members.pop_back();
    position[pair] = -1;
  }
}

std::size_t pick(double u, std::size_t size) {
  return std::min(static_cast<std::size_t>(u), size - 1);
}

}  // namespace

Simulator::Simulator(Configuration eta0, BoundaryParams params)
    : eta_(std::move(eta0)), params_(params), n_(eta_.size()) {
  check_state(eta_, params_);
  position_.assign(static_cast<std::size_t>(std::max(0, n_ - 1)), -1);
  for (int i = 0; i + 1 < n_; ++i) refresh(i);
}

double Simulator::total_rate() const {
  return static_cast<double>(enabled_.size()) + (eta_[0] == 0 ? params_.alpha : 0.0) +
         (eta_[n_ - 1] == 1 ? params_.beta : 0.0);
}

void Simulator::refresh(int pair) {
  set_member(enabled_, position_, pair, eta_[pair] == 1 && eta_[pair + 1] == 0);
}

bool Simulator::step(CounterRng& rng, double t_end, Event* out) {
  const double rate = total_rate();
  const double dt = rng.exponential(rate);
  if (!(t_ + dt <= t_end)) {
    t_ = t_end;
    return false;
  }
  t_ += dt;
  fire(rng.uniform() * rate, out);
  return true;
}

void Simulator::fire(double u, Event* out) {
  Event e{t_, EventKind::Hop, 0};
  const auto bulk = static_cast<double>(enabled_.size());
  if (u < bulk) {
    const int pair = enabled_[pick(u, enabled_.size())];
    eta_[pair] = 0;
    eta_[pair + 1] = 1;
    e.site = pair + 1;
    if (pair > 0) refresh(pair - 1);
    refresh(pair);
    if (pair + 1 < n_ - 1) refresh(pair + 1);
  } else {
    u -= bulk;
    const bool entry_on = eta_[0] == 0;
    if (entry_on && (u < params_.alpha || eta_[n_ - 1] == 0)) {
      eta_[0] = 1;
      e.kind = EventKind::Enter;
      e.site = 1;
      if (n_ > 1) refresh(0);
    } else {
      eta_[n_ - 1] = 0;
      e.kind = EventKind::Exit;
      e.site = n_;
      if (n_ > 1) refresh(n_ - 2);
    }
  }
  if (out) *out = e;
}

void Simulator::run_until(double t_end, CounterRng& rng, std::vector<Event>* log) {
  Event e;
  while (step(rng, t_end, &e)) {
    if (log) log->push_back(e);
  }
}

SimulationResult simulate(const Configuration& eta0, const BoundaryParams& params, double t_end,
                          std::uint64_t seed, const SimulateOptions& options) {
  if (!(t_end >= 0)) throw std::invalid_argument("t_end must be nonnegative");
  Simulator sim(eta0, params);
  CounterRng rng(seed);
  SimulationResult result;
  std::vector<double> times = options.snapshot_times;
  std::sort(times.begin(), times.end());
  const bool keep = options.record_events || !times.empty();
  Trajectory traj;
  traj.initial = eta0;
  std::vector<Event>* log = options.record_events ? &traj.events : nullptr;
  for (double ts : times) {
    if (ts < 0 || ts > t_end) throw std::invalid_argument("snapshot time outside [0, t_end]");
    sim.run_until(ts, rng, log);
    traj.snapshots.push_back({ts, sim.state()});
  }
  sim.run_until(t_end, rng, log);
  result.final_state = sim.state();
  if (keep) result.trajectory = std::move(traj);
  return result;
}

DisagreementState::DisagreementState(const Configuration& eta, const Configuration& zeta) {
  if (eta.size() != zeta.size()) throw std::invalid_argument("coupled configurations differ in length");
  if (!eta.dominates(zeta)) throw std::invalid_argument("configurations are not componentwise ordered");
  xi_.resize(static_cast<std::size_t>(eta.size()));
  for (int i = 0; i < eta.size(); ++i) {
    xi_[i] = static_cast<std::uint8_t>((eta[i] == 1 && zeta[i] == 1 ? 1 : 0) + (eta[i] != zeta[i] ? 2 : 0));
  }
}

int DisagreementState::second_class() const {
  return static_cast<int>(std::count(xi_.begin(), xi_.end(), std::uint8_t{2}));
}

Configuration DisagreementState::upper() const {
  Configuration c(size());
  for (int i = 0; i < size(); ++i) c[i] = xi_[i] >= 1 ? 1 : 0;
  return c;
}

Configuration DisagreementState::lower() const {
  Configuration c(size());
  for (int i = 0; i < size(); ++i) c[i] = xi_[i] == 1 ? 1 : 0;
  return c;
}

DisagreementState disagreement(const Configuration& eta, const Configuration& zeta) {
  return DisagreementState(eta, zeta);
}

CoupledSimulator::CoupledSimulator(Configuration eta0, Configuration zeta0, BoundaryParams params)
    : eta_(std::move(eta0)), zeta_(std::move(zeta0)), params_(params), n_(eta_.size()) {
  check_state(eta_, params_);
  if (zeta_.size() != n_) throw std::invalid_argument("coupled configurations differ in length");
  if (!eta_.dominates(zeta_)) throw std::invalid_argument("coupled pair must satisfy eta >= zeta");
  for (int i = 0; i < n_; ++i) disagreements_ += eta_[i] != zeta_[i];
  position_.assign(static_cast<std::size_t>(std::max(0, n_ - 1)), -1);
  for (int i = 0; i + 1 < n_; ++i) refresh(i);
}

bool CoupledSimulator::ordered() const { return eta_.dominates(zeta_); }

bool CoupledSimulator::bond_enabled(int pair) const {
  return (eta_[pair] == 1 && eta_[pair + 1] == 0) || (zeta_[pair] == 1 && zeta_[pair + 1] == 0);
}

void CoupledSimulator::refresh(int pair) { set_member(enabled_, position_, pair, bond_enabled(pair)); }

void CoupledSimulator::set_site(int i, std::uint8_t eta_value, std::uint8_t zeta_value) {
  disagreements_ -= eta_[i] != zeta_[i];
  eta_[i] = eta_value;
  zeta_[i] = zeta_value;
  disagreements_ += eta_[i] != zeta_[i];
}

bool CoupledSimulator::step(CounterRng& rng, double t_end, Event* out) {
  const double rate = static_cast<double>(enabled_.size()) + (zeta_[0] == 0 ? params_.alpha : 0.0) +
                      (eta_[n_ - 1] == 1 ? params_.beta : 0.0);
  const double dt = rng.exponential(rate);
  if (!(t_ + dt <= t_end)) {
    t_ = t_end;
    return false;
  }
  t_ += dt;
  fire(rng.uniform() * rate, out);
  return true;
}

void CoupledSimulator::fire(double u, Event* out) {
  Event e{t_, EventKind::Hop, 0};
  const auto bulk = static_cast<double>(enabled_.size());
  auto touch = [&](int site) {
    if (site > 0) refresh(site - 1);
    if (site < n_ - 1) refresh(site);
  };
  if (u < bulk) {
    const int x = enabled_[pick(u, enabled_.size())];
    auto hop = [&](const Configuration& c, int i) -> std::uint8_t {
      // value at site i after the shared bond clock at (x, x+1) rings
      const bool moves = c[x] == 1 && c[x + 1] == 0;
      return moves ? static_cast<std::uint8_t>(1 - c[i]) : c[i];
    };
    const auto e0 = hop(eta_, x), e1 = hop(eta_, x + 1);
    const auto z0 = hop(zeta_, x), z1 = hop(zeta_, x + 1);
    set_site(x, e0, z0);
    set_site(x + 1, e1, z1);
    e.site = x + 1;
    touch(x);
    touch(x + 1);
  } else {
    u -= bulk;
    const bool entry_on = zeta_[0] == 0;
    if (entry_on && (u < params_.alpha || eta_[n_ - 1] == 0)) {
      set_site(0, 1, 1);
      e.kind = EventKind::Enter;
      e.site = 1;
      touch(0);
    } else {
      set_site(n_ - 1, 0, 0);
      e.kind = EventKind::Exit;
      e.site = n_;
      touch(n_ - 1);
    }
  }
  if (out) *out = e;
}

CouplingResult coupled_simulate(const Configuration& eta0, const Configuration& zeta0,
                                const BoundaryParams& params, double horizon, std::uint64_t seed,
                                const CouplingOptions& options, bool run_to_horizon) {
  if (!(horizon >= 0)) throw std::invalid_argument("horizon must be nonnegative");
  CoupledSimulator sim(eta0, zeta0, params);
  CounterRng rng(seed);
  CouplingResult result;
  if (options.record_events) result.trajectory = CoupledTrajectory{eta0, zeta0, {}};
  auto* log = options.record_events ? &result.trajectory->events : nullptr;
  const double dt_trace = options.trace_interval;
  double next_sample = 0;
  auto sample_until = [&](double t) {
    if (dt_trace <= 0) return;
    while (next_sample <= t && next_sample <= horizon) {
      result.second_class_trace.push_back({next_sample, sim.second_class()});
      next_sample += dt_trace;
    }
  };
  std::optional<double> tau;
  if (sim.second_class() == 0) tau = 0.0;
  Event e;
  while (!tau || run_to_horizon) {
    const int before = sim.second_class();
    const bool moved = sim.step(rng, horizon, &e);
    const double t_now = sim.time();
    if (dt_trace > 0) {
      while (next_sample < t_now && next_sample <= horizon) {
        result.second_class_trace.push_back({next_sample, before});
        next_sample += dt_trace;
      }
    }
    if (!moved) break;
    if (log) log->push_back(e);
    if (!tau && sim.second_class() == 0) tau = t_now;
  }
  sample_until(sim.time());
  result.timed_out = !tau.has_value();
  result.tau = tau.value_or(horizon);
  return result;
}

double default_timeout(const BoundaryParams& params, int n) {
  const auto d = model::derive(params);
  const double nn = static_cast<double>(n);
  switch (d.phase) {
    case model::Phase::HighDensity: return 20.0 * *d.c_high * nn;
    case model::Phase::LowDensity: return 20.0 * *d.c_low * nn;
    case model::Phase::CoexistenceLine: return 50.0 * nn * nn / d.rho_alpha;
    default: return 50.0 * nn * nn / std::min(d.rho_alpha, d.rho_beta);
  }
}

QuantileEstimate quantile_with_ci(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q > 0 && q < 1)) throw std::invalid_argument("quantile level must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto at = [&](double rank) {  // 1-based order statistic, clamped
    const auto r = std::clamp<long>(static_cast<long>(rank), 1, static_cast<long>(values.size()));
    return values[static_cast<std::size_t>(r - 1)];
  };
  QuantileEstimate est;
  est.replicas = values.size();
  est.s = at(std::ceil(q * n - 1e-12));
  const double half = 1.959963984540054 * std::sqrt(n * q * (1 - q));
  est.ci_lo = at(std::floor(n * q - half));
  est.ci_hi = at(std::ceil(n * q + half) + 1);
  return est;
}

QuantileEstimate mixing_upper_estimate(const BoundaryParams& params, int n, double epsilon,
                                       std::size_t replicas, std::uint64_t seed,
                                       std::optional<double> horizon, int threads) {
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  if (replicas < 1) throw std::invalid_argument("replicas must be at least 1");
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  const double h = horizon.value_or(default_timeout(params, n));
  std::vector<double> taus(replicas);
  std::vector<char> timeouts(replicas);
  const auto top = Configuration::all_full(n);
  const auto bottom = Configuration::all_empty(n);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const auto res = coupled_simulate(top, bottom, params, h, derive_seed(seed, r));
    taus[r] = res.tau;
    timeouts[r] = res.timed_out;
  });
  auto est = quantile_with_ci(taus, 1.0 - epsilon);
  est.horizon = h;
  est.taus = taus;
  est.timed_out.assign(timeouts.begin(), timeouts.end());
  est.timeouts = static_cast<std::size_t>(std::count(timeouts.begin(), timeouts.end(), 1));
  est.ok = static_cast<double>(est.timeouts) <= epsilon * static_cast<double>(replicas);
  return est;
}

}  // namespace tasep
}  // namespace slabsep
