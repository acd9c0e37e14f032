#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "slabsep/model.hpp"
#include "slabsep/rng.hpp"

namespace slabsep {

/// Occupancy of sites 1..N; entry i holds site i+1 and 1 means a particle.
class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(int n, std::uint8_t fill = 0) : sites_(static_cast<std::size_t>(n), fill) {}
  explicit Configuration(std::vector<std::uint8_t> sites);

  static Configuration all_empty(int n) { return Configuration(n, 0); }
  static Configuration all_full(int n) { return Configuration(n, 1); }
  /// Bit i of `index` is the occupancy of site i+1.
  static Configuration from_index(std::uint64_t index, int n);
  /// Parses strings such as "0110" (site 1 first).
  static Configuration from_string(const std::string& bits);

  int size() const { return static_cast<int>(sites_.size()); }
  std::uint8_t operator[](std::size_t i) const { return sites_[i]; }
  std::uint8_t& operator[](std::size_t i) { return sites_[i]; }
  std::span<const std::uint8_t> sites() const { return sites_; }

  std::uint64_t index() const;
  int particles() const;
  std::string to_string() const;
  /// Site-wise 1 - eta, read right to left.
  Configuration reflected() const;
  /// eta(i) >= other(i) for all i.
  bool dominates(const Configuration& other) const;

  bool operator==(const Configuration&) const = default;

 private:
  std::vector<std::uint8_t> sites_;
};

std::ostream& operator<<(std::ostream& os, const Configuration& c);

namespace tasep {

using model::BoundaryParams;

enum class EventKind : std::uint8_t { Enter, Exit, Hop };

/// A clock ring that changed at least one coupled copy. For hops, `site` is
/// the 1-based origin x of the move x -> x+1.
struct Event {
  double t = 0;
  EventKind kind = EventKind::Hop;
  int site = 0;

  bool operator==(const Event&) const = default;
};

struct Snapshot {
  double t = 0;
  Configuration state;
};

/// Event log plus sampled snapshots. Replaying `events` from `initial`
/// reproduces every snapshot.
struct Trajectory {
  Configuration initial;
  std::vector<Event> events;
  std::vector<Snapshot> snapshots;

  /// Rows "t,site,value" per snapshot and site.
  void write_csv(std::ostream& os) const;
};

/// Applies one event to a configuration (no-op where the move is blocked).
void apply(Configuration& eta, const Event& e);
Configuration replay(const Configuration& initial, std::span<const Event> events, double t_end);

/// Exact event-driven simulator for one TASEP with open boundaries.
class Simulator {
 public:
  Simulator(Configuration eta0, BoundaryParams params);

  const Configuration& state() const { return eta_; }
  double time() const { return t_; }
  double total_rate() const;

  /// Draws the next event; returns false (without moving time) when it
  /// would land after `t_end`, in which case time is set to `t_end`.
  bool step(CounterRng& rng, double t_end, Event* out = nullptr);

  /// Runs until `t_end`, appending events to `log` when given.
  void run_until(double t_end, CounterRng& rng, std::vector<Event>* log = nullptr);

 private:
  void fire(double u, Event* out);
  void refresh(int pair);  // pair index x-1 for bond (x, x+1)

  Configuration eta_;
  BoundaryParams params_;
  double t_ = 0;
  int n_;
  std::vector<int> enabled_;   // bond indices with a particle followed by a hole
  std::vector<int> position_;  // slot in enabled_, or -1
};

struct SimulateOptions {
  bool record_events = false;
  std::vector<double> snapshot_times;
};

struct SimulationResult {
  Configuration final_state;
  std::optional<Trajectory> trajectory;
};

SimulationResult simulate(const Configuration& eta0, const BoundaryParams& params, double t_end,
                          std::uint64_t seed, const SimulateOptions& options = {});

/// xi(x) = 1{eta = zeta = 1} + 2 * 1{eta != zeta}; 2 marks a second-class particle.
class DisagreementState {
 public:
  DisagreementState(const Configuration& eta, const Configuration& zeta);

  int size() const { return static_cast<int>(xi_.size()); }
  std::uint8_t operator[](std::size_t i) const { return xi_[i]; }
  std::span<const std::uint8_t> values() const { return xi_; }
  int second_class() const;
  Configuration upper() const;  // eta = 1{xi >= 1}
  Configuration lower() const;  // zeta = 1{xi == 1}

 private:
  std::vector<std::uint8_t> xi_;
};

/// Throws std::invalid_argument unless eta dominates zeta.
DisagreementState disagreement(const Configuration& eta, const Configuration& zeta);

/// Two TASEPs under the basic coupling: shared bulk clocks, and boundary
/// clocks that overwrite site 1 (site N) in both copies regardless of
/// their occupation.
class CoupledSimulator {
 public:
  CoupledSimulator(Configuration eta0, Configuration zeta0, BoundaryParams params);

  const Configuration& upper() const { return eta_; }
  const Configuration& lower() const { return zeta_; }
  double time() const { return t_; }
  int second_class() const { return disagreements_; }
  bool ordered() const;

  bool step(CounterRng& rng, double t_end, Event* out = nullptr);

 private:
  void fire(double u, Event* out);
  void refresh(int pair);
  void set_site(int i, std::uint8_t eta_value, std::uint8_t zeta_value);
  bool bond_enabled(int pair) const;

  Configuration eta_;
  Configuration zeta_;
  BoundaryParams params_;
  double t_ = 0;
  int n_;
  int disagreements_ = 0;
  std::vector<int> enabled_;
  std::vector<int> position_;
};

struct SecondClassSample {
  double t = 0;
  int count = 0;
};

struct CouplingOptions {
  bool record_events = false;
  /// Sampling interval of the second-class count trace; 0 disables it.
  double trace_interval = 0;
};

/// Event log of a coupled run; replaying on both initial states
/// reproduces the coupled pair.
struct CoupledTrajectory {
  Configuration upper0;
  Configuration lower0;
  std::vector<Event> events;
};

struct CouplingResult {
  double tau = 0;          // coalescence time, or the horizon on timeout
  bool timed_out = false;
  std::vector<SecondClassSample> second_class_trace;
  std::optional<CoupledTrajectory> trajectory;
};

/// Runs the coupled pair until no second-class particle is left or the
/// horizon is reached. With `run_to_horizon`, keeps recording after coalescence.
CouplingResult coupled_simulate(const Configuration& eta0, const Configuration& zeta0,
                                const BoundaryParams& params, double horizon, std::uint64_t seed,
                                const CouplingOptions& options = {}, bool run_to_horizon = false);

/// Horizon after which a coalescence run is declared timed out.
double default_timeout(const BoundaryParams& params, int n);

struct QuantileEstimate {
  double s = 0;        // empirical (1 - epsilon)-quantile of tau
  double ci_lo = 0;    // binomial order-statistic confidence interval
  double ci_hi = 0;
  bool ok = true;      // false when too many replicas timed out
  double horizon = 0;
  std::size_t replicas = 0;
  std::size_t timeouts = 0;
  std::vector<double> taus;  // per replica, horizon on timeout
  std::vector<bool> timed_out;
};

/// Empirical order-statistic quantile with a 95% binomial interval;
/// `values` need not be sorted.
QuantileEstimate quantile_with_ci(std::vector<double> values, double q);

/// Upper estimate of t_mix(epsilon) from coalescence of the extremal pair
/// (all-full, all-empty). Replica r uses seed derive_seed(seed, r).
QuantileEstimate mixing_upper_estimate(const BoundaryParams& params, int n, double epsilon,
                                       std::size_t replicas, std::uint64_t seed,
                                       std::optional<double> horizon = std::nullopt, int threads = 1);

}  // namespace tasep
}  // namespace slabsep
