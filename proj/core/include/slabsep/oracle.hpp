#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "slabsep/lpp.hpp"
#include "slabsep/model.hpp"
#include "slabsep/tasep.hpp"

namespace slabsep::oracle {

using model::BoundaryParams;

inline constexpr int kDefaultStateCap = 12;

/// Generator over {0,1}^N; state index bit i is the occupancy of site i+1.
struct RateMatrix {
  int n = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> q;  // includes the diagonal
  double uniformization_rate = 0;                  // (N - 1) + alpha + beta

  std::size_t states() const { return static_cast<std::size_t>(q.rows()); }
  std::size_t off_diagonal_nonzeros() const;
  double rate(std::uint64_t from, std::uint64_t to) const;
};

/// Bytes needed by the dense mixing-time computation at N sites.
std::uint64_t memory_estimate(int n);

RateMatrix generator(const BoundaryParams& params, int n, int cap = kDefaultStateCap);

struct Stationary {
  Eigen::VectorXd pi;
  double residual = 0;  // max |pi Q|
};

Stationary stationary_exact(const BoundaryParams& params, int n, int cap = kDefaultStateCap);

struct Transient {
  Eigen::VectorXd p;
  double truncation = 0;  // Poisson mass not summed
  std::size_t terms = 0;
};

inline constexpr double kTailTolerance = 1e-12;

/// Uniformization with rate (N - 1) + alpha + beta.
Transient transient(const RateMatrix& q, const Eigen::VectorXd& p0, double t);
Transient transient(const BoundaryParams& params, int n, const Configuration& eta0, double t,
                    int cap = kDefaultStateCap);

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct TvPoint {
  double t = 0;
  double tv = 0;
  std::uint64_t argmax = 0;
};

struct MixingTime {
  double t_mix = 0;
  std::uint64_t argmax_state = 0;  // worst initial state at t_mix
  std::vector<TvPoint> curve;      // worst-case TV on the search grid
  double bracket_hi = 0;
  int monotonicity_faults = 0;     // increases above 1e-12 along the curve
};

/// inf{t : max_eta TV(P_t(eta, .), mu) < epsilon} over all initial states,
/// to relative tolerance `rel_tol`.
MixingTime mixing_time_exact(const BoundaryParams& params, int n, double epsilon, double rel_tol = 1e-6,
                             int cap = kDefaultStateCap);

/// Index of an ordered pair in the coupled chain over {0,1}^N x {0,1}^N.
constexpr std::uint64_t pair_index(std::uint64_t eta, std::uint64_t zeta, int n) {
  return (eta << n) | zeta;
}

/// Generator of the basic coupling over all 4^N pairs.
Eigen::SparseMatrix<double, Eigen::RowMajor> coupled_generator(const BoundaryParams& params, int n,
                                                               int cap = kDefaultStateCap / 2);

/// Expected coalescence time E[tau] from an ordered pair, by a linear solve.
double coupled_absorption_time(const BoundaryParams& params, int n, const Configuration& eta,
                               const Configuration& zeta);

struct BruteForce {
  std::optional<double> value;  // nullopt when no admissible path exists
  std::uint64_t paths = 0;
};

inline constexpr std::uint64_t kDefaultPathBudget = 1'000'000;

/// Last-passage time by enumerating every admissible up-right path.
BruteForce lpp_bruteforce(const lpp::Environment& env, Point u, Point v, lpp::Window window = {},
                          std::uint64_t budget = kDefaultPathBudget);

/// Rows "state,probability" with the state written site 1 first.
void write_distribution_csv(std::ostream& os, const Eigen::VectorXd& p, int n);

}  // namespace slabsep::oracle
