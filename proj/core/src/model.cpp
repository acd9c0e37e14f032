#include "slabsep/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slabsep::model {

void BoundaryParams::validate() const {
  auto check = [](double rate, const char* name) {
    if (!(rate > 0.0 && rate <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must lie in (0, 1], got " +
                                  std::to_string(rate));
    }
  };
  check(alpha, "alpha");
  check(beta, "beta");
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::HighDensity: return "high-density";
    case Phase::LowDensity: return "low-density";
    case Phase::MaxCurrent: return "max-current";
    case Phase::CoexistenceLine: return "coexistence-line";
    case Phase::TriplePoint: return "triple-point";
  }
  return "unknown";
}

Phase phase_from_string(std::string_view name) {
  for (auto p : {Phase::HighDensity, Phase::LowDensity, Phase::MaxCurrent,
                 Phase::CoexistenceLine, Phase::TriplePoint}) {
    if (to_string(p) == name) return p;
  }
  throw std::invalid_argument("unknown phase '" + std::string(name) + "'");
}

Phase classify_phase(double alpha, double beta) {
  BoundaryParams{alpha, beta}.validate();
  if (beta < std::min(alpha, 0.5)) return Phase::HighDensity;
  if (alpha < std::min(beta, 0.5)) return Phase::LowDensity;
  if (alpha == beta && alpha < 0.5) return Phase::CoexistenceLine;
  if (alpha == 0.5 && beta == 0.5) return Phase::TriplePoint;
  return Phase::MaxCurrent;
}

double x_star(double a_hat, double b) {
  return a_hat * (b + 1.0) * (b - 1.0) / ((b - a_hat) * (a_hat * b - 1.0));
}

double c_high_ratio_form(double a_hat, double b) {
  return (a_hat + 1.0) * (a_hat + 1.0) * (b + 1.0) * (b - 1.0) /
         ((a_hat * b - 1.0) * (b - a_hat));
}

double c_high_rate_form(double alpha, double beta) {
  const double ah = std::min(alpha, 0.5);
  return (1.0 - 2.0 * beta) / ((1.0 - ah - beta) * (ah - beta));
}

double c_high_from_x_star(double a_hat, double b) {
  return (a_hat + 1.0) * (a_hat + 1.0) / a_hat * x_star(a_hat, b);
}

DerivedParams derive(const BoundaryParams& params) {
  params.validate();
  DerivedParams d;
  d.alpha = params.alpha;
  d.beta = params.beta;
  d.a = (1.0 - params.alpha) / params.alpha;
  d.b = (1.0 - params.beta) / params.beta;
  d.a_hat = std::max(1.0, d.a);
  d.b_hat = std::max(1.0, d.b);
  d.alpha_hat_half = std::min(params.alpha, 0.5);
  d.beta_hat_half = std::min(params.beta, 0.5);
  d.rho_alpha = params.alpha * (1.0 - params.alpha);
  d.rho_beta = params.beta * (1.0 - params.beta);
  d.phase = classify_phase(params.alpha, params.beta);
  if (params.alpha < 0.5) {
    d.sigma2 = (1.0 - 2.0 * params.alpha) / (d.rho_alpha * d.rho_alpha);
  }
  if (d.phase == Phase::HighDensity) {
    d.x_star = x_star(d.a_hat, d.b);
    d.c_high = c_high_ratio_form(d.a_hat, d.b);
  } else if (d.phase == Phase::LowDensity) {
    // Particle-hole reflection of the high density constant.
    d.c_low = c_high_ratio_form(d.b_hat, d.a);
  }
  return d;
}

std::int64_t snapped_floor(double v) {
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::floor(v));
}

std::int64_t snapped_ceil(double v) {
  const double r = std::round(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(v));
}

SlabGeometry::SlabGeometry(int n) : n_(n) {
  if (n < 1) throw std::invalid_argument("slab width N must be at least 1");
}

bool SlabGeometry::contains(Point v) const {
  const auto k = v.offset();
  return k >= 0 && k <= n_;
}

Point SlabGeometry::p(double x) const {
  const auto f = snapped_floor(x);
  return {f, f};
}

Point SlabGeometry::q(double x) const {
  const double half = 0.5 * n_;
  return {snapped_floor(x + half), snapped_ceil(x - half)};
}

std::vector<Point> SlabGeometry::line_segment(std::int64_t x, double b) const {
  if (!(b > 0.0)) throw std::invalid_argument("line segment slope b must be positive");
  const auto y_max = snapped_floor(static_cast<double>(n_) / (b + 1.0));
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(y_max + 1));
  for (std::int64_t y = 0; y <= y_max; ++y) {
    pts.push_back({y + x, snapped_floor(-b * static_cast<double>(y)) + x});
  }
  return pts;
}

}  // namespace slabsep::model
