#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slabsep {

/// Lattice site in Z^2. Up-right paths move by e1 = (1,0) or e2 = (0,1).
struct Point {
  std::int64_t x = 0;
  std::int64_t y = 0;

  constexpr Point operator+(Point o) const { return {x + o.x, y + o.y}; }
  constexpr Point operator-(Point o) const { return {x - o.x, y - o.y}; }
  constexpr bool operator==(const Point&) const = default;
  constexpr auto operator<=>(const Point&) const = default;

  /// Anti-diagonal level x + y.
  constexpr std::int64_t level() const { return x + y; }
  /// Distance from the upper boundary, x - y.
  constexpr std::int64_t offset() const { return x - y; }
};

inline constexpr Point kE1{1, 0};
inline constexpr Point kE2{0, 1};

/// Componentwise order u <= v.
constexpr bool precedes(Point u, Point v) { return u.x <= v.x && u.y <= v.y; }

struct PointHash {
  std::size_t operator()(Point p) const noexcept {
    auto h = static_cast<std::uint64_t>(p.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(p.y) + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

namespace model {

/// Entry and exit rates of the open-boundary TASEP. Both must lie in (0, 1].
struct BoundaryParams {
  double alpha = 0.5;
  double beta = 0.5;

  /// Throws std::invalid_argument when a rate is outside (0, 1].
  void validate() const;
};

enum class Phase { HighDensity, LowDensity, MaxCurrent, CoexistenceLine, TriplePoint };

std::string_view to_string(Phase phase);
Phase phase_from_string(std::string_view name);

Phase classify_phase(double alpha, double beta);

/// Every constant derived from (alpha, beta). Quantities that are undefined
/// for the phase at hand are left empty.
struct DerivedParams {
  double alpha = 0;
  double beta = 0;
  double a = 0;       // (1 - alpha) / alpha
  double b = 0;       // (1 - beta) / beta
  double a_hat = 0;   // max(1, a)
  double b_hat = 0;   // max(1, b)
  double alpha_hat_half = 0;  // min(alpha, 1/2)
  double beta_hat_half = 0;   // min(beta, 1/2)
  double rho_alpha = 0;
  double rho_beta = 0;
  Phase phase = Phase::TriplePoint;
  std::optional<double> sigma2;  // alpha < 1/2 only
  std::optional<double> x_star;  // high density only
  std::optional<double> c_high;  // high density only, t_mix / N limit
  std::optional<double> c_low;   // low density only, t_mix / N limit
};

DerivedParams derive(const BoundaryParams& params);

/// Mixing constant of the high density phase written through a_hat and b.
double c_high_ratio_form(double a_hat, double b);
/// Same constant written through the clamped entry rate and beta.
double c_high_rate_form(double alpha, double beta);
/// Same constant as ((a_hat + 1)^2 / a_hat) * x_star.
double c_high_from_x_star(double a_hat, double b);
/// Geodesic span constant a_hat (b+1)(b-1) / ((b - a_hat)(a_hat b - 1)).
double x_star(double a_hat, double b);

/// Geometry of the slab S_N = {(x,y) : y <= x <= y + N}.
class SlabGeometry {
 public:
  explicit SlabGeometry(int n);

  int n() const { return n_; }
  bool contains(Point v) const;
  /// Upper boundary (x, x), carrying rate-alpha weights.
  bool on_upper(Point v) const { return v.x == v.y; }
  /// Lower boundary (x + N, x), carrying rate-beta weights.
  bool on_lower(Point v) const { return v.x - v.y == n_; }

  /// p_x = (floor x, floor x).
  Point p(double x) const;
  /// q_x = (floor(x + N/2), ceil(x - N/2)). Lies on the lower boundary
  /// exactly when x + N/2 is an integer.
  Point q(double x) const;
  /// Index x with q_x == v for a lower-boundary point v = (k + N, k).
  double q_index(Point v) const { return static_cast<double>(v.y) + 0.5 * n_; }

  /// Points (x + y, x + floor(-b y)) for integer y in 0..floor(N/(b+1)),
  /// ordered by increasing first coordinate.
  std::vector<Point> line_segment(std::int64_t x, double b) const;

 private:
  int n_;
};

/// floor/ceil that snap values within 1e-9 of an integer onto it, so that
/// products such as (7/3) * 3 land on the intended lattice site.
std::int64_t snapped_floor(double v);
std::int64_t snapped_ceil(double v);

}  // namespace model
}  // namespace slabsep
