#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slabsep/model.hpp"
#include "slabsep/tasep.hpp"

namespace slabsep::lpp {

inline constexpr double kUnreachable = -std::numeric_limits<double>::infinity();
inline constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

enum class Mode { Slab, HalfQuadrant, FullPlane };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

struct EnvironmentSpec {
  Mode mode = Mode::Slab;
  int n = 1;          // slab width, slab mode only
  double alpha = 1;   // upper boundary (slab) or diagonal (half-quadrant) rate
  double beta = 1;    // lower boundary rate, slab mode only
  std::uint64_t seed = 0;

  static EnvironmentSpec slab(int n, double alpha, double beta, std::uint64_t seed) {
    return {Mode::Slab, n, alpha, beta, seed};
  }
  static EnvironmentSpec half_quadrant(double alpha, std::uint64_t seed) {
    return {Mode::HalfQuadrant, 1, alpha, 1, seed};
  }
  static EnvironmentSpec full_plane(std::uint64_t seed) { return {Mode::FullPlane, 1, 1, 1, seed}; }

  void validate() const;
};

/// Exponential weights regenerated on demand from (seed, site). Individual
/// sites may be pinned to fixed values for hand-built instances.
class Environment {
 public:
  explicit Environment(EnvironmentSpec spec);

  const EnvironmentSpec& spec() const { return spec_; }
  Mode mode() const { return spec_.mode; }
  int n() const { return spec_.n; }

  bool contains(Point v) const;
  /// Lowest and highest admissible x - y.
  std::int64_t offset_min() const;
  std::int64_t offset_max() const;

  double rate(Point v) const;
  /// Throws std::invalid_argument outside the admissible region.
  double weight(Point v) const;
  /// Same as weight() without the region check.
  double weight_unchecked(Point v) const;

  void pin(Point v, double w);

 private:
  EnvironmentSpec spec_;
  std::unordered_map<Point, double, PointHash> pinned_;
};

/// Box [lo, hi] intersected with the band k_min <= x - y <= k_max and the
/// environment's region.
struct Window {
  Point lo{-kFar, -kFar};
  Point hi{kFar, kFar};
  std::int64_t k_min = -kFar;
  std::int64_t k_max = kFar;

  static Window box(Point lo, Point hi) { return {lo, hi}; }
  Window with_band(std::int64_t kmin, std::int64_t kmax) const {
    Window w = *this;
    w.k_min = kmin;
    w.k_max = kmax;
    return w;
  }
  bool contains(Point v) const;
};

struct Source {
  Point site;
  double value = 0;
};

/// Offsets of one anti-diagonal level d = x + y; cells are k = k_lo, k_lo+2, ... k_hi.
struct LevelRange {
  std::int64_t k_lo = 0;
  std::int64_t k_hi = -2;
  std::size_t size() const { return k_hi < k_lo ? 0 : static_cast<std::size_t>((k_hi - k_lo) / 2 + 1); }
};

/// Level-by-level last-passage recursion. Holds only the current level.
class LevelSweep {
 public:
  LevelSweep(const Environment& env, Window window, std::vector<Source> sources);

  std::int64_t level() const { return level_; }
  std::int64_t last_level() const { return last_level_; }
  const LevelRange& range() const { return range_; }
  std::span<const double> values() const { return values_; }
  double value(std::int64_t k) const;

  /// Computes the next level; false once past the window.
  bool advance();
  /// Replaces the current level, e.g. to restart from a checkpoint.
  void reset(std::int64_t level, LevelRange range, std::vector<double> values);

  LevelRange range_at(std::int64_t d) const;
  const Environment& environment() const { return *env_; }
  const Window& window() const { return window_; }
  std::uint64_t cells() const { return cells_; }

 private:
  void seed_sources(std::int64_t d, std::vector<double>& row, const LevelRange& r) const;

  const Environment* env_;
  Window window_;
  std::vector<Source> sources_;  // sorted by level
  std::int64_t first_level_;
  std::int64_t last_level_;
  std::int64_t level_;
  LevelRange range_;
  std::vector<double> values_;
  std::vector<double> out_;  // T + weight of the current level
  std::uint64_t cells_ = 0;
};

struct Geodesic {
  std::vector<Point> path;
  double value = 0;   // T(path.front(), path.back())
  std::uint64_t ties = 0;

  void write_csv(std::ostream& os) const;  // idx,x,y
};

/// Passage values T(sources, .) stored for every level of a window.
class PassageField {
 public:
  PassageField(const Environment& env, Window window, std::vector<Source> sources);

  /// kUnreachable when v is out of the window or not reachable.
  double value(Point v) const;
  bool reachable(Point v) const { return value(v) != kUnreachable; }
  bool is_source(Point v) const;

  /// Backtracked argmax path from a source to v. Ties prefer the e2 predecessor.
  Geodesic geodesic_to(Point v) const;

  std::int64_t first_level() const { return first_level_; }
  std::int64_t last_level() const { return first_level_ + static_cast<std::int64_t>(rows_.size()) - 1; }
  const Window& window() const { return window_; }
  const std::vector<Source>& sources() const { return sources_; }
  const Environment& environment() const { return *env_; }
  std::uint64_t cells() const { return cells_; }

  /// Rows "x,y,value" for reachable cells.
  void write_csv(std::ostream& os) const;

 private:
  struct Row {
    LevelRange range;
    std::vector<double> values;
  };
  const Row* row(std::int64_t d) const;

  const Environment* env_;
  Window window_;
  std::vector<Source> sources_;
  std::int64_t first_level_ = 0;
  std::vector<Row> rows_;
  std::uint64_t cells_ = 0;
};

/// Value of T(u, v) only, with O(level width) memory. nullopt when no
/// admissible path exists.
std::optional<double> passage_value(const Environment& env, Point u, Point v, Window window = {});

inline constexpr std::uint64_t kDefaultCellBudget = 50'000'000;

struct GeodesicOptions {
  std::uint64_t cell_budget = kDefaultCellBudget;
  Window band{};
};

/// Geodesic gamma(u, v). Stores the full field when it fits the budget and
/// recomputes between level checkpoints otherwise.
Geodesic geodesic(const Environment& env, Point u, Point v, const GeodesicOptions& options = {});
Geodesic geodesic_checkpointed(const Environment& env, Point u, Point v, Window band,
                               std::int64_t checkpoint_interval);

/// Number of cells of a window between two levels.
std::uint64_t window_cells(const Environment& env, const Window& w, std::int64_t d0, std::int64_t d1);

struct GrowthInterface {
  Point anchor;                     // g^0, on the upper boundary
  std::vector<std::uint8_t> steps;  // 0: e1, 1: -e2

  int size() const { return static_cast<int>(steps.size()); }
  std::vector<Point> points() const;
  Configuration configuration() const;
  bool operator==(const GrowthInterface&) const = default;

  void write_csv(std::ostream& os) const;  // idx,x,y
};

GrowthInterface encode_interface(const Configuration& eta, Point anchor);
Configuration decode_interface(const GrowthInterface& g);
/// Rebuilds an interface from its points; throws unless they form a staircase.
GrowthInterface interface_from_points(std::span<const Point> pts);

/// A corner that was filled, i.e. a TASEP move in the interface picture.
struct GrowthEvent {
  double t = 0;
  Point corner;  // site whose weight completed
  tasep::EventKind kind = tasep::EventKind::Hop;
  int site = 0;              // 1-based origin site (entry: 0 reported as 1)
  std::int64_t label = 0;    // particle label; the first entering particle is 1
};

struct InterfaceEvolution {
  GrowthInterface interface;
  std::vector<GrowthEvent> events;
};

/// Fills every corner whose completion time is at most t. A corner u
/// completes at (time it became fillable) + weight(u).
InterfaceEvolution evolve_interface(const Environment& env, const GrowthInterface& g0, double t,
                                    bool record_events = false);

/// Interface at time t read off a passage field from g0:
/// {u : S(u - (1,1)) <= t < S(u)} with S(u) = T(g0, u) + weight(u).
GrowthInterface interface_from_field(const Environment& env, const GrowthInterface& g0, double t);

enum class Boundary { Upper, Lower };

struct BoundaryHit {
  Point site;
  std::size_t step = 0;   // index into the path
  std::int64_t offset = 0;  // x for site = p_x, z for site = q_{z + N/2}
};

std::optional<BoundaryHit> first_boundary_hit(const Geodesic& g, Boundary boundary, int n);

/// Event A_m: gamma(q_{-N/2}, p_m) visits some p_{x1} and later some q_{x2}
/// with N <= x1 <= x2 <= m.
bool traversing_event(const Environment& env, std::int64_t m);
bool traversing_path(const Geodesic& g, int n, std::int64_t m);

/// Point of the line segment L_m maximising T(start, .), and its value.
struct LineTarget {
  Point site;
  double value = 0;
};
LineTarget line_target(const PassageField& field, std::int64_t m, double b);

struct SemiInfinitePrefix {
  std::vector<Point> prefix;
  bool stabilized = false;
  std::int64_t horizon = 0;  // m of the far line at which the prefix stopped changing
  int doublings = 0;
};

/// First `depth` steps of the semi-infinite geodesic from `start`,
/// approximated by geodesics to L_m with m doubled until two consecutive
/// prefixes agree.
SemiInfinitePrefix semi_infinite_prefix(const Environment& env, Point start, int depth,
                                        std::optional<std::int64_t> m0 = std::nullopt,
                                        int max_doublings = 8);

enum class BandSide { Upper, Lower };

/// Passage time restricted to the band of width w along one boundary.
std::optional<double> restricted_passage(const Environment& env, std::int64_t w, Point u, Point v,
                                         BandSide side = BandSide::Upper);

/// ceil(log(N)^9), the default band width.
std::int64_t default_band(int n);

struct FlowCounts {
  std::int64_t entered = 0;  // M1' = M1 - 1
  std::int64_t exited = 0;   // M2
};

/// Entries and exits by time t from the all-empty start, read from
/// passage times out of p_0.
FlowCounts flow_counts(const Environment& env, double t);

/// Event B(n, r, d) on both boundaries with restricted passage times.
bool event_B(const Environment& env, std::int64_t n0, double r, double d,
             std::optional<std::int64_t> band = std::nullopt);

/// Maximal |Tbar(i,j) - (j-i)/rho| over both boundaries of the window,
/// divided by N. event_B holds iff this is at most d.
double event_B_statistic(const Environment& env, std::int64_t n0, double r,
                         std::optional<std::int64_t> band = std::nullopt);

}  // namespace slabsep::lpp
