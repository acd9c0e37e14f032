#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slabsep/lpp.hpp"
#include "slabsep/model.hpp"
#include "slabsep/tasep.hpp"

namespace slabsep::analysis {

using model::BoundaryParams;

/// Projection of a configuration: particle counts in `blocks` equal
/// blocks, the total count and the indicator {#holes > N/2}. Counts are
/// divided by `bin_width` when coarsened.
struct StatisticSpec {
  int blocks = 8;
  int bin_width = 1;
  bool include_total = true;
  bool hole_majority = true;

  std::vector<int> project(const Configuration& eta) const;
  std::string describe() const;
};

struct TvEstimate {
  double value = 0;   // lower-bound estimate of the projected TV
  double ci_lo = 0;
  double ci_hi = 0;
  double plug_in = 0;  // empirical TV of the projected samples (biased upward)
  bool exact = false;
  bool coarsened = false;
  StatisticSpec statistic;
};

/// TV between the projected exact laws (indexed by Configuration::index()).
TvEstimate tv_lower_exact(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n,
                          const StatisticSpec& statistic = {});

/// Split-sample estimate: the event is chosen on the first half of each
/// sample and evaluated on the second half, so the value estimates a lower
/// bound on the projected TV. Coarsens the statistic until its image fits
/// the sample size. Needs at least 100 samples per side.
TvEstimate tv_lower_estimate(const std::vector<Configuration>& a, const std::vector<Configuration>& b,
                             const StatisticSpec& statistic, std::uint64_t seed, int bootstrap = 200);

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Wilson score interval at 95%.
Interval wilson(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  std::optional<Interval> slope_ci;  // absent for two points
  std::size_t points = 0;
};

/// Ordinary least squares of log y on log x.
LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingRow {
  int n = 0;
  double lower = 0;
  double upper = 0;
  double midpoint = 0;
  double ci_lo = 0;  // interval of the upper estimate
  double ci_hi = 0;
  bool upper_ok = true;
  std::vector<double> taus;
};

struct ScalingOptions {
  std::size_t replicas = 200;          // coupling replicas per N
  std::size_t lower_replicas = 400;    // samples per start for the TV bound
  int grid = 48;                       // candidate times up to 1.2 x the upper estimate
  double reference_factor = 3.0;       // stationary samples taken at this multiple of the upper estimate
  int threads = 1;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::optional<LinearFit> midpoint_fit;
  std::optional<LinearFit> upper_fit;
  std::vector<std::string> warnings;
};

ScalingResult mixing_scaling(const BoundaryParams& params, const std::vector<int>& n_list, double epsilon,
                             std::uint64_t seed, const ScalingOptions& options = {});

/// Largest candidate time at which the TV lower bound from the all-empty or
/// all-full start still exceeds epsilon.
struct LowerEndpoint {
  double t = 0;
  std::vector<double> grid;
  std::vector<double> tv_empty;  // lower CI bound per grid point
  std::vector<double> tv_full;
};
LowerEndpoint mixing_lower_estimate(const BoundaryParams& params, int n, double epsilon, double t_max,
                                    double t_reference, std::size_t replicas, int grid, std::uint64_t seed,
                                    int threads = 1);

struct MomentReport {
  double alpha = 0;
  std::int64_t n = 0;
  std::size_t replicas = 0;
  double mean = 0;
  double variance = 0;
  double target_mean = 0;      // n / rho_alpha
  double target_sigma2 = 0;
  double centred_mean = 0;     // (mean - n/rho) / sqrt(n)
  double mean_z = 0;           // (mean - n/rho) / (sd / sqrt(replicas))
  double variance_ratio = 0;   // (variance / n) / sigma2
  std::vector<double> values;
};

/// Replicas of H(p_0, p_n) on the half-quadrant via the band-restricted recursion.
MomentReport h_moment_check(double alpha, std::int64_t n, std::size_t replicas, std::uint64_t seed,
                            std::int64_t band = 256, int threads = 1);

struct HittingReport {
  double center = 0;  // y / (b^2 - 1)
  double median = 0;
  double q10 = 0;
  double q90 = 0;
  std::size_t replicas = 0;
  std::size_t misses = 0;  // geodesics never touching the lower boundary
  std::vector<std::int64_t> hits;
};

/// First lower-boundary hit of the geodesic from (N - y, 0) to q_{x + N/2}.
HittingReport hitting_stats(const BoundaryParams& params, int n, std::int64_t y, std::int64_t x,
                            std::size_t replicas, std::uint64_t seed, int threads = 1);

struct ProbabilityEstimate {
  double p = 0;
  Interval ci;
  std::size_t successes = 0;
  std::size_t trials = 0;
};

ProbabilityEstimate traversal_prob(const BoundaryParams& params, int n, std::int64_t m, std::size_t replicas,
                                   std::uint64_t seed, int threads = 1);

/// Greedy choice of t_0 <= ... <= t_k for the upper copy of a coupled run
/// from (all-full, all-empty).
struct Certificate {
  int k = 0;
  std::vector<double> times;  // t_0 .. t_{k-1}
  double tau = 0;             // time label k sits at site N
};

/// Requires an event log; throws std::invalid_argument without one.
std::optional<Certificate> scan_at_certificate(const tasep::CoupledTrajectory& trajectory, double t_cap);
std::optional<Certificate> scan_at_certificate(const Configuration& initial, std::span<const tasep::Event> events,
                                               double t_cap);

struct CertificateReport {
  std::size_t replicas = 0;
  std::size_t certificates = 0;
  std::size_t coalesced = 0;
  std::size_t violations = 0;         // certificate but no coalescence by T
  std::size_t late_coalescence = 0;   // certificate with coalescence after its tau
  double horizon = 0;
};

CertificateReport validate_certificates(const BoundaryParams& params, int n, double t_cap, std::size_t replicas,
                                        std::uint64_t seed, int threads = 1);

struct DensityReport {
  double mean_density = 0;  // time average over the middle half
  double target = 0;        // 1 - beta
  double burn_in = 0;
  double duration = 0;
  std::vector<double> profile;  // time-averaged occupation per site
};

DensityReport density_profile(const BoundaryParams& params, int n, double burn_in, double duration,
                              std::uint64_t seed);

struct SymmetryReport {
  double max_reflection_gap = 0;     // max |mu(eta) - mu(reflected eta)|
  double hole_majority = 0;          // mu(#holes > N/2)
  double residual = 0;
};

SymmetryReport hole_symmetry_exact(const BoundaryParams& params, int n);

/// Monte Carlo estimate of mu(#holes > N/2) from time averages after burn-in.
ProbabilityEstimate hole_majority_mc(const BoundaryParams& params, int n, std::size_t replicas, double burn_in,
                                     std::uint64_t seed, int threads = 1);

/// Empirical stationary law from one long run, time-averaged after burn-in.
Eigen::VectorXd empirical_stationary(const BoundaryParams& params, int n, double burn_in, std::uint64_t events,
                                     std::uint64_t seed);

struct ExperimentRecord {
  std::string name;
  nlohmann::json parameters;
  std::uint64_t seed = 0;
  std::vector<nlohmann::json> replicas;
  nlohmann::json summary;
  std::optional<double> wall_clock;  // excluded from artifacts unless requested

  nlohmann::json to_json() const;
};

}  // namespace slabsep::analysis
