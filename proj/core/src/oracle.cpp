#include "slabsep/oracle.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slabsep::oracle {

namespace {

void check_size(int n, int cap) {
  if (n < 1) throw std::invalid_argument("N must be at least 1");
  if (n > cap) {
    throw std::invalid_argument("N = " + std::to_string(n) + " exceeds the oracle state cap " +
                                std::to_string(cap) + " (about " + std::to_string(memory_estimate(n) >> 20) +
                                " MiB for the dense mixing computation)");
  }
}

using Triplets = std::vector<Eigen::Triplet<double>>;

// Off-diagonal moves of one configuration, as (target, rate).
template <class Emit>
void for_each_move(std::uint64_t s, int n, const BoundaryParams& p, Emit&& emit) {
  for (int x = 0; x + 1 < n; ++x) {
    if (((s >> x) & 1u) && !((s >> (x + 1)) & 1u)) emit(s ^ (3ull << x), 1.0);
  }
  if (!(s & 1u)) emit(s | 1u, p.alpha);
  if ((s >> (n - 1)) & 1u) emit(s & ~(1ull << (n - 1)), p.beta);
}

Eigen::SparseMatrix<double, Eigen::RowMajor> assemble(std::size_t states, Triplets& t) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> q(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  q.setFromTriplets(t.begin(), t.end());
  q.makeCompressed();
  return q;
}

double uniform_rate(const RateMatrix& q) {
  if (q.uniformization_rate > 0) return q.uniformization_rate;
  double lambda = 0;
  for (Eigen::Index r = 0; r < q.q.outerSize(); ++r) lambda = std::max(lambda, -q.q.coeff(r, r));
  return lambda;
}

// log of the Poisson(lambda) mass at k
double log_poisson(double lambda, std::size_t k) {
  if (lambda == 0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -lambda + static_cast<double>(k) * std::log(lambda) - std::lgamma(static_cast<double>(k) + 1.0);
}

// Rows of `m` are distributions; returns m exp(Q s) by uniformization.
template <class Mat>
Mat uniformize(const Mat& m, const Eigen::SparseMatrix<double, Eigen::RowMajor>& p, double lambda, double s,
               double* truncation, std::size_t* terms) {
  const double mu = lambda * s;
  Mat acc = Mat::Zero(m.rows(), m.cols());
  Mat term = m;
  double mass = 0;
  std::size_t k = 0;
  while (true) {
    const double w = std::exp(log_poisson(mu, k));
    acc += w * term;
    mass += w;
    if (static_cast<double>(k) >= mu && (1.0 - mass) < kTailTolerance) break;
    if (k > 100 && static_cast<double>(k) > mu && w == 0.0) break;
    term = (term * p).eval();
    ++k;
  }
  if (truncation) *truncation = std::max(0.0, 1.0 - mass);
  if (terms) *terms = k + 1;
  return acc;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> jump_matrix(const RateMatrix& q, double lambda) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> id(q.q.rows(), q.q.cols());
  id.setIdentity();
  if (lambda == 0) return id;
  Eigen::SparseMatrix<double, Eigen::RowMajor> p = id + q.q / lambda;
  p.prune(0.0);
  return p;
}

}  // namespace

std::size_t RateMatrix::off_diagonal_nonzeros() const {
  std::size_t c = 0;
  for (Eigen::Index r = 0; r < q.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, r); it; ++it) {
      if (it.col() != r && it.value() != 0.0) ++c;
    }
  }
  return c;
}

double RateMatrix::rate(std::uint64_t from, std::uint64_t to) const {
  return q.coeff(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to));
}

std::uint64_t memory_estimate(int n) {
  const std::uint64_t s = 1ull << n;
  return 3 * s * s * sizeof(double);
}

RateMatrix generator(const BoundaryParams& params, int n, int cap) {
  params.validate();
  check_size(n, cap);
  const std::uint64_t states = 1ull << n;
  Triplets t;
  t.reserve(states * static_cast<std::size_t>(n + 2));
  for (std::uint64_t s = 0; s < states; ++s) {
    double out = 0;
    for_each_move(s, n, params, [&](std::uint64_t to, double r) {
      t.emplace_back(static_cast<int>(s), static_cast<int>(to), r);
      out += r;
    });
    t.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  return {n, assemble(states, t), (n - 1) + params.alpha + params.beta};
}

Stationary stationary_exact(const BoundaryParams& params, int n, int cap) {
  const auto q = generator(params, n, cap);
  const auto states = static_cast<Eigen::Index>(q.states());
  // pi Q = 0 with the last balance equation replaced by normalisation
  Eigen::SparseMatrix<double> a = Eigen::SparseMatrix<double>(q.q.transpose());
  Triplets t;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) {
      if (it.row() != states - 1) t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (Eigen::Index c = 0; c < states; ++c) t.emplace_back(static_cast<int>(states - 1), static_cast<int>(c), 1.0);
  Eigen::SparseMatrix<double> sys(states, states);
  sys.setFromTriplets(t.begin(), t.end());
  sys.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success) throw std::runtime_error("stationary system is singular");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(states);
  rhs(states - 1) = 1.0;
  Stationary st;
  st.pi = lu.solve(rhs);
  st.pi = st.pi.cwiseMax(0.0);
  st.pi /= st.pi.sum();
  const Eigen::RowVectorXd res = st.pi.transpose() * q.q;
  st.residual = res.cwiseAbs().maxCoeff();
  return st;
}

Transient transient(const RateMatrix& q, const Eigen::VectorXd& p0, double t) {
  if (!(t >= 0)) throw std::invalid_argument("time must be nonnegative");
  const double lambda = uniform_rate(q);
  const auto p = jump_matrix(q, lambda);
  Transient out;
  const Eigen::RowVectorXd row = p0.transpose();
  out.p = uniformize(row, p, lambda, t, &out.truncation, &out.terms).transpose();
  return out;
}

Transient transient(const BoundaryParams& params, int n, const Configuration& eta0, double t, int cap) {
  if (eta0.size() != n) throw std::invalid_argument("initial configuration length differs from N");
  const auto q = generator(params, n, cap);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q.states()));
  p0(static_cast<Eigen::Index>(eta0.index())) = 1.0;
  return transient(q, p0, t);
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("distributions differ in size");
  return 0.5 * (a - b).cwiseAbs().sum();
}

MixingTime mixing_time_exact(const BoundaryParams& params, int n, double epsilon, double rel_tol, int cap) {
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0, 1)");
  const auto q = generator(params, n, cap);
  const auto pi = stationary_exact(params, n, cap).pi;
  const double lambda = uniform_rate(q);
  const auto p = jump_matrix(q, lambda);
  const auto states = static_cast<Eigen::Index>(q.states());
  const Eigen::RowVectorXd pi_row = pi.transpose();

  auto worst = [&](const Eigen::MatrixXd& m, double t) {
    TvPoint pt{t, -1, 0};
    for (Eigen::Index r = 0; r < states; ++r) {
      const double tv = 0.5 * (m.row(r) - pi_row).cwiseAbs().sum();
      if (tv > pt.tv) {
        pt.tv = tv;
        pt.argmax = static_cast<std::uint64_t>(r);
      }
    }
    return pt;
  };

  const auto d = model::derive(params);
  double rho = std::min(d.rho_alpha, d.rho_beta);
  if (rho <= 0) rho = std::max({d.rho_alpha, d.rho_beta, 0.25});
  const double nn = static_cast<double>(n);
  MixingTime out;
  out.bracket_hi = 10.0 * nn * nn / rho;
  const double h = out.bracket_hi / 1024.0;

  Eigen::MatrixXd prev = Eigen::MatrixXd::Identity(states, states);
  TvPoint at_prev = worst(prev, 0.0);
  out.curve.push_back(at_prev);
  if (at_prev.tv < epsilon) {
    out.t_mix = 0;
    out.argmax_state = at_prev.argmax;
    return out;
  }
  Eigen::MatrixXd cur;
  double t_prev = 0;
  TvPoint at_cur;
  for (int step = 1;; ++step) {
    cur = uniformize(prev, p, lambda, h, nullptr, nullptr);
    at_cur = worst(cur, step * h);
    out.curve.push_back(at_cur);
    if (at_cur.tv < epsilon) break;
    if (step > 1024 * 64) throw std::runtime_error("mixing time not reached within the grown bracket");
    if (step * h > out.bracket_hi) out.bracket_hi *= 2;
    prev = std::move(cur);
    t_prev = step * h;
  }

  // bisection on [t_prev, t_prev + h] from the stored row matrix at t_prev
  double lo = 0, hi = h;
  TvPoint best = at_cur;
  while (hi - lo > rel_tol * (t_prev + lo)) {
    const double mid = 0.5 * (lo + hi);
    const auto m = uniformize(prev, p, lambda, mid, nullptr, nullptr);
    const auto pt = worst(m, t_prev + mid);
    out.curve.push_back(pt);
    if (pt.tv < epsilon) {
      hi = mid;
      best = pt;
    } else {
      lo = mid;
    }
  }
  out.t_mix = t_prev + hi;
  out.argmax_state = best.argmax;
  std::sort(out.curve.begin(), out.curve.end(), [](const TvPoint& a, const TvPoint& b) { return a.t < b.t; });
  for (std::size_t i = 1; i < out.curve.size(); ++i) {
    if (out.curve[i].tv > out.curve[i - 1].tv + 1e-12) ++out.monotonicity_faults;
  }
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> coupled_generator(const BoundaryParams& params, int n, int cap) {
  params.validate();
  check_size(n, cap);
  const std::uint64_t single = 1ull << n;
  const std::uint64_t states = single * single;
  const std::uint64_t top = 1ull << (n - 1);
  Triplets t;
  for (std::uint64_t e = 0; e < single; ++e) {
    for (std::uint64_t z = 0; z < single; ++z) {
      const auto from = pair_index(e, z, n);
      double out = 0;
      auto emit = [&](std::uint64_t e2, std::uint64_t z2, double r) {
        if (e2 == e && z2 == z) return;
        t.emplace_back(static_cast<int>(from), static_cast<int>(pair_index(e2, z2, n)), r);
        out += r;
      };
      auto hop = [](std::uint64_t s, int x) {
        return (((s >> x) & 1u) && !((s >> (x + 1)) & 1u)) ? s ^ (3ull << x) : s;
      };
      for (int x = 0; x + 1 < n; ++x) emit(hop(e, x), hop(z, x), 1.0);
      emit(e | 1u, z | 1u, params.alpha);
      emit(e & ~top, z & ~top, params.beta);
      t.emplace_back(static_cast<int>(from), static_cast<int>(from), -out);
    }
  }
  return assemble(states, t);
}

double coupled_absorption_time(const BoundaryParams& params, int n, const Configuration& eta,
                               const Configuration& zeta) {
  if (eta.size() != n || zeta.size() != n) throw std::invalid_argument("configuration length differs from N");
  if (!eta.dominates(zeta)) throw std::invalid_argument("coupled pair must satisfy eta >= zeta");
  if (eta == zeta) return 0.0;
  const auto q = coupled_generator(params, n);
  const std::uint64_t single = 1ull << n;
  // transient states: ordered pairs that still disagree
  std::vector<int> id(single * single, -1);
  std::vector<std::uint64_t> members;
  for (std::uint64_t e = 0; e < single; ++e) {
    for (std::uint64_t z = 0; z < single; ++z) {
      if (e != z && (z & ~e) == 0) {
        id[pair_index(e, z, n)] = static_cast<int>(members.size());
        members.push_back(pair_index(e, z, n));
      }
    }
  }
  const auto m = static_cast<Eigen::Index>(members.size());
  Triplets t;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(q, static_cast<Eigen::Index>(members[i])); it;
         ++it) {
      const int j = id[static_cast<std::size_t>(it.col())];
      if (j >= 0) t.emplace_back(static_cast<int>(i), j, -it.value());
    }
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("absorption system is singular");
  const Eigen::VectorXd h = lu.solve(Eigen::VectorXd::Ones(m));
  return h(id[pair_index(eta.index(), zeta.index(), n)]);
}

BruteForce lpp_bruteforce(const lpp::Environment& env, Point u, Point v, lpp::Window window, std::uint64_t budget) {
  BruteForce out;
  auto admissible = [&](Point p) { return env.contains(p) && window.contains(p) && precedes(p, v); };
  if (!precedes(u, v) || !admissible(u) || !admissible(v)) return out;
  double best = lpp::kUnreachable;
  // path sums accumulate from the start in path order
  auto walk = [&](auto&& self, Point z, double sum) -> void {
    if (z == v) {
      if (++out.paths > budget) throw std::length_error("path enumeration budget exceeded");
      best = std::max(best, sum);
      return;
    }
    const double next = sum + env.weight_unchecked(z);
    for (Point step : {kE1, kE2}) {
      const Point w = z + step;
      if (admissible(w)) self(self, w, next);
    }
  };
  walk(walk, u, 0.0);
  if (best != lpp::kUnreachable) out.value = best;
  return out;
}

void write_distribution_csv(std::ostream& os, const Eigen::VectorXd& p, int n) {
  os << "state,probability\n";
  os.precision(17);
  for (Eigen::Index s = 0; s < p.size(); ++s) {
    os << Configuration::from_index(static_cast<std::uint64_t>(s), n).to_string() << ',' << p(s) << '\n';
  }
}

}  // namespace slabsep::oracle
