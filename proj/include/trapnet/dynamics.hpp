#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "trapnet/error.hpp"
#include "trapnet/network.hpp"
#include "trapnet/rng.hpp"
#include "trapnet/stats.hpp"
#include "trapnet/trap.hpp"

namespace trapnet {

/// Q(x,y) = mu(x,y)/nu(x), Q(x,x) = -mu(x)/nu(x).
class Generator {
 public:
  Generator(const ElectricalNetwork& net, std::vector<double> nu) : net_(net), nu_(std::move(nu)) {
    if (nu_.size() != net_.size()) fail(Errc::SupportMismatch, "trap measure must have one weight per vertex");
    for (double w : nu_)
      if (!(w > 0.0) || !std::isfinite(w)) fail(Errc::SupportMismatch, "trap measure must be fully supported");
  }

  const ElectricalNetwork& network() const noexcept { return net_; }
  const std::vector<double>& nu() const noexcept { return nu_; }
  std::size_t size() const noexcept { return nu_.size(); }

  double rate(std::size_t x, std::size_t y) const {
    if (x == y) return -exit_rate(x);
    return net_.conductance(x, y) / nu_[x];
  }
  double exit_rate(std::size_t x) const { return net_.total_conductance(x) / nu_[x]; }

  Eigen::MatrixXd matrix() const {
    const auto n = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t x = 0; x < size(); ++x) {
      Q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) = -exit_rate(x);
      for (const auto& nb : net_.neighbors(x))
        Q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(nb.vertex)) = nb.conductance / nu_[x];
    }
    return Q;
  }

 private:
  ElectricalNetwork net_;
  std::vector<double> nu_;
};

inline Generator generator(const ElectricalNetwork& net, const std::vector<double>& nu) { return Generator(net, nu); }

namespace detail {

/// Eigendecomposition of the nu-symmetrized negative generator restricted to
/// the vertices where keep is set (rates to dropped vertices become killing).
struct SymmetricSpectrum {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd U;
  Eigen::VectorXd sqrt_nu;
  std::vector<std::size_t> vertices;

  SymmetricSpectrum() = default;
  SymmetricSpectrum(const Generator& gen, const std::vector<char>& keep) {
    for (std::size_t i = 0; i < gen.size(); ++i)
      if (keep[i]) vertices.push_back(i);
    const auto m = static_cast<Eigen::Index>(vertices.size());
    std::vector<Eigen::Index> pos(gen.size(), -1);
    for (Eigen::Index a = 0; a < m; ++a) pos[vertices[static_cast<std::size_t>(a)]] = a;
    sqrt_nu.resize(m);
    for (Eigen::Index a = 0; a < m; ++a) sqrt_nu(a) = std::sqrt(gen.nu()[vertices[static_cast<std::size_t>(a)]]);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
    const auto& net = gen.network();
    for (Eigen::Index a = 0; a < m; ++a) {
      const std::size_t x = vertices[static_cast<std::size_t>(a)];
      H(a, a) = net.total_conductance(x) / gen.nu()[x];
      for (const auto& nb : net.neighbors(x)) {
        const Eigen::Index b = pos[nb.vertex];
        if (b >= 0) H(a, b) = -nb.conductance / (sqrt_nu(a) * sqrt_nu(b));
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) fail(Errc::NumericalFailure, "eigensolver did not converge");
    lambda = es.eigenvalues().cwiseMax(0.0);
    U = es.eigenvectors();
  }

  Eigen::VectorXd decay(double t) const { return (-lambda.array() * t).exp().matrix(); }
};

}  // namespace detail

class TransitionKernel;

/// Spectral representation P_t = D^{-1/2} U e^{-Lambda t} U^T D^{1/2}, D = diag(nu).
/// One factorization serves every time argument.
class SpectralKernel {
 public:
  explicit SpectralKernel(const Generator& gen) : nu_(gen.nu()), spec_(gen, std::vector<char>(gen.size(), 1)) {}

  std::size_t size() const noexcept { return nu_.size(); }
  const std::vector<double>& nu() const noexcept { return nu_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return spec_.lambda; }

  Eigen::MatrixXd matrix(double t) const {
    check_time(t);
    const auto n = static_cast<Eigen::Index>(size());
    if (t == 0.0) return Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd W = spec_.U * spec_.decay(t).asDiagonal() * spec_.U.transpose();
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
      for (Eigen::Index y = 0; y < n; ++y) P(x, y) = W(x, y) * spec_.sqrt_nu(y) / spec_.sqrt_nu(x);
    return P;
  }

  /// Row P_t(x, .).
  Eigen::VectorXd row(std::size_t x, double t) const {
    check_time(t);
    const auto n = static_cast<Eigen::Index>(size());
    const auto xi = static_cast<Eigen::Index>(x);
    if (t == 0.0) return Eigen::VectorXd::Unit(n, xi);
    const Eigen::VectorXd coef = spec_.U.row(xi).transpose().cwiseProduct(spec_.decay(t));
    Eigen::VectorXd r = spec_.U * coef;
    return r.cwiseProduct(spec_.sqrt_nu) / spec_.sqrt_nu(xi);
  }

  /// Diagonal P_t(x,x) as a sum of nonnegative terms.
  Eigen::VectorXd diagonal(double t) const {
    check_time(t);
    const auto n = static_cast<Eigen::Index>(size());
    if (t == 0.0) return Eigen::VectorXd::Ones(n);
    return spec_.U.cwiseAbs2() * spec_.decay(t);
  }

  double entry(std::size_t x, std::size_t y, double t) const { return row(x, t)(static_cast<Eigen::Index>(y)); }

  /// p(t,x,y) = P_t(x,y)/nu(y).
  double density(std::size_t x, std::size_t y, double t) const {
    check_time(t);
    const auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(y);
    const Eigen::VectorXd d = spec_.decay(t);
    double s = 0.0;
    for (Eigen::Index k = 0; k < d.size(); ++k) s += d(k) * spec_.U(xi, k) * spec_.U(yi, k);
    return s / (spec_.sqrt_nu(xi) * spec_.sqrt_nu(yi));
  }

  TransitionKernel kernel(double t) const;

 private:
  static void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) fail(Errc::NonpositiveTime, "time must be nonnegative and finite");
  }

  std::vector<double> nu_;
  detail::SymmetricSpectrum spec_;
};

class TransitionKernel {
 public:
  TransitionKernel(double t, Eigen::MatrixXd P, std::vector<double> nu) : t_(t), P_(std::move(P)), nu_(std::move(nu)) {}

  double time() const noexcept { return t_; }
  const Eigen::MatrixXd& matrix() const noexcept { return P_; }
  double operator()(std::size_t x, std::size_t y) const {
    return P_(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  }
  double density(std::size_t x, std::size_t y) const { return (*this)(x, y) / nu_[y]; }
  std::size_t size() const noexcept { return nu_.size(); }

 private:
  double t_;
  Eigen::MatrixXd P_;
  std::vector<double> nu_;
};

inline TransitionKernel SpectralKernel::kernel(double t) const { return TransitionKernel(t, matrix(t), nu_); }

inline TransitionKernel transition_kernel(const Generator& gen, double t) { return SpectralKernel(gen).kernel(t); }

/// Right-continuous path: steps[k] = (state, holding duration), durations sum to the horizon.
struct PathSample {
  std::size_t start = 0;
  double horizon = 0.0;
  std::vector<std::pair<std::size_t, double>> steps;

  std::size_t state_at(double t) const {
    double clock = 0.0;
    for (const auto& [x, h] : steps) {
      clock += h;
      if (t < clock) return x;
    }
    return steps.empty() ? start : steps.back().first;
  }
};

namespace detail {

inline std::size_t jump_target(const Generator& gen, std::size_t x, RngStream& rng) {
  const auto& nbs = gen.network().neighbors(x);
  const double target = rng.uniform_open_right() * gen.network().total_conductance(x);
  double acc = 0.0;
  for (const auto& nb : nbs) {
    acc += nb.conductance;
    if (target < acc) return nb.vertex;
  }
  return nbs.back().vertex;
}

inline double holding_time(const Generator& gen, std::size_t x, RngStream& rng) {
  const double rate = gen.exit_rate(x);
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return exponential(rng, rate);
}

}  // namespace detail

/// Gillespie simulation up to the horizon.
inline PathSample simulate_path(const Generator& gen, std::size_t start, double horizon, RngStream& rng) {
  if (!(horizon > 0.0)) fail(Errc::NonpositiveTime, "horizon must be positive");
  if (start >= gen.size()) fail(Errc::UnknownVertex, "start state out of range");
  PathSample path{start, horizon, {}};
  double clock = 0.0;
  std::size_t x = start;
  while (true) {
    const double h = detail::holding_time(gen, x, rng);
    if (clock + h >= horizon) {
      path.steps.emplace_back(x, horizon - clock);
      break;
    }
    path.steps.emplace_back(x, h);
    clock += h;
    x = detail::jump_target(gen, x, rng);
  }
  return path;
}

/// State at time t without storing the path.
inline std::size_t state_at_time(const Generator& gen, std::size_t start, double t, RngStream& rng) {
  double clock = 0.0;
  std::size_t x = start;
  while (true) {
    const double h = detail::holding_time(gen, x, rng);
    if (clock + h > t) return x;
    clock += h;
    x = detail::jump_target(gen, x, rng);
  }
}

/// Whether the chain started inside `inside` leaves it by time T.
inline bool exits_before(const Generator& gen, std::size_t start, const std::vector<char>& inside, double T, RngStream& rng) {
  if (!inside[start]) return true;
  double clock = 0.0;
  std::size_t x = start;
  while (true) {
    const double h = detail::holding_time(gen, x, rng);
    if (clock + h > T) return false;
    clock += h;
    x = detail::jump_target(gen, x, rng);
    if (!inside[x]) return true;
  }
}

/// P_x(tau_B <= T) from the spectrum of the generator killed outside B.
inline double exit_probability(const Generator& gen, std::size_t x, const std::vector<char>& inside, double T) {
  if (!inside[x]) return 1.0;
  bool all = std::all_of(inside.begin(), inside.end(), [](char c) { return c != 0; });
  if (all) return 0.0;
  detail::SymmetricSpectrum spec(gen, inside);
  const auto a = static_cast<Eigen::Index>(std::find(spec.vertices.begin(), spec.vertices.end(), x) - spec.vertices.begin());
  const Eigen::VectorXd coef = spec.U.row(a).transpose().cwiseProduct(spec.decay(T));
  const Eigen::VectorXd r = spec.U * coef;
  double survive = 0.0;
  for (Eigen::Index b = 0; b < r.size(); ++b) survive += r(b) * spec.sqrt_nu(b);
  survive /= spec.sqrt_nu(a);
  return std::clamp(1.0 - survive, 0.0, 1.0);
}

/// Multipliers for the time argument and the holding window of the two-point functions.
struct TimeScale {
  double time_unit = 1.0;
  double hold_unit = 1.0;

  static TimeScale raw() { return {}; }
  static TimeScale scaled(const Scale& s) { return {s.a * s.c, s.c}; }
};

/// Phi(s,t) = P(X(s) = X(t)) started at rho.
inline double aging_phi(const SpectralKernel& K, std::size_t rho, double s, double t, TimeScale ts = {}) {
  if (!(s > 0.0) || !(t > 0.0)) fail(Errc::NonpositiveTime, "aging function needs s, t > 0");
  if (s == t) return 1.0;  // P_0 is the identity, so the sum is a full row of P_s
  if (s > t) std::swap(s, t);
  const double u = ts.time_unit * s;
  const double w = ts.time_unit * t - u;
  const Eigen::VectorXd r = K.row(rho, u);
  const Eigen::VectorXd d = K.diagonal(w);
  return std::clamp(r.dot(d), 0.0, 1.0);
}

/// Psi(s,t) = sum_x exp(-mu(x) s / nu~(x)) P_t(rho, x), nu~ = nu / hold_unit.
inline double subaging_psi(const SpectralKernel& K, const ElectricalNetwork& net, std::size_t rho, double s, double t, TimeScale ts = {}) {
  if (!(s >= 0.0) || !(t > 0.0)) fail(Errc::NonpositiveTime, "sub-aging function needs s >= 0, t > 0");
  if (s == 0.0) return 1.0;  // every factor is e^0 and the row sums to one
  const Eigen::VectorXd r = K.row(rho, ts.time_unit * t);
  double acc = 0.0;
  for (std::size_t x = 0; x < K.size(); ++x)
    acc += std::exp(-net.total_conductance(x) * ts.hold_unit * s / K.nu()[x]) * r(static_cast<Eigen::Index>(x));
  return std::clamp(acc, 0.0, 1.0);
}

enum class SurfaceMode { Aging, Subaging };

struct SurfacePoint {
  double s;
  double t;
  double value;
};

struct AgingSurface {
  SurfaceMode mode = SurfaceMode::Aging;
  std::vector<SurfacePoint> points;
};

/// Row-major evaluation over the s-grid (outer) and t-grid (inner).
inline AgingSurface scaled_surface(const SpectralKernel& K, const ElectricalNetwork& net, std::size_t rho, const std::vector<double>& s_grid,
                                   const std::vector<double>& t_grid, SurfaceMode mode, TimeScale ts) {
  AgingSurface out{mode, {}};
  for (double s : s_grid)
    for (double t : t_grid)
      out.points.push_back({s, t, mode == SurfaceMode::Aging ? aging_phi(K, rho, s, t, ts) : subaging_psi(K, net, rho, s, t, ts)});
  return out;
}

struct ExitCheck {
  double empirical = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double exact = 0.0;
  double bound = 0.0;
  double boundary_resistance = 0.0;
  double inner_mass = 0.0;
  bool holds = false;        // upper confidence limit within the bound
  bool exact_holds = false;  // exact probability within the bound
};

/// Exit-time estimate P_x(tau_B <= T) <= 4 delta/R + 4T/(nu(B(x,delta)) (R - delta)),
/// B = B_R(x,r) open, R = R(x, B^c).
inline ExitCheck exit_time_bound_check(const Generator& gen, const Eigen::MatrixXd& R, std::size_t x, double r, double delta, double T,
                                       const RngStream& rng, std::size_t n_paths, double confidence = 0.99) {
  const auto& net = gen.network();
  const double Rb = boundary_resistance(net, R, x, r);
  if (!(delta > 0.0) || !(delta < Rb)) fail(Errc::PreconditionViolated, "delta must lie in (0, R(x, B^c))");
  if (!(T >= 0.0)) fail(Errc::NonpositiveTime, "T must be nonnegative");
  const auto xi = static_cast<Eigen::Index>(x);
  std::vector<char> inside(gen.size(), 0);
  double inner = 0.0;
  for (std::size_t y = 0; y < gen.size(); ++y) {
    const double d = R(xi, static_cast<Eigen::Index>(y));
    inside[y] = in_open_ball(d, r);
    if (d < delta) inner += gen.nu()[y];
  }
  ExitCheck out;
  out.boundary_resistance = Rb;
  out.inner_mass = inner;
  out.bound = std::isinf(Rb) ? 0.0 : 4.0 * delta / Rb + 4.0 * T / (inner * (Rb - delta));
  std::size_t hits = 0;
  if (T > 0.0) {
    for (std::size_t k = 0; k < n_paths; ++k) {
      auto sub = rng.substream(k);
      hits += exits_before(gen, x, inside, T, sub);
    }
  }
  const auto ci = wilson_interval(hits, n_paths, confidence);
  out.empirical = n_paths ? static_cast<double>(hits) / static_cast<double>(n_paths) : 0.0;
  out.ci_low = ci.first;
  out.ci_high = ci.second;
  out.exact = T > 0.0 ? exit_probability(gen, x, inside, T) : 0.0;
  // With T = 0 or an empty ball complement the exit probability is exactly 0.
  out.holds = (T == 0.0 || std::isinf(Rb)) ? true : out.ci_high <= out.bound;
  out.exact_holds = out.exact <= out.bound + 1e-12;
  return out;
}

struct ReturnCheck {
  double diagonal = 0.0;
  double global_bound = 0.0;
  double local_ratio = 0.0;
  double exit_exact = 0.0;
  double exit_ci_high = 0.0;
  bool global_holds = false;
  bool local_holds_exact = false;
  bool local_holds_mc = false;
  bool positive = false;
};

/// P_t(x,x) >= nu(x)/nu(total) and P_t(x,x) >= nu(x)/nu(D(x,eps)) - P_x(tau_B(x,eps) <= t).
inline ReturnCheck return_probability_bounds_check(const SpectralKernel& K, const Generator& gen, const Eigen::MatrixXd& R, std::size_t x,
                                                   double t, double eps, const RngStream& rng, std::size_t n_paths,
                                                   double confidence = 0.99) {
  if (!(eps > 0.0)) fail(Errc::PreconditionViolated, "eps must be positive");
  const auto xi = static_cast<Eigen::Index>(x);
  ReturnCheck out;
  out.diagonal = K.diagonal(t)(xi);
  double total = 0.0, closed = 0.0;
  std::vector<char> inside(gen.size(), 0);
  for (std::size_t y = 0; y < gen.size(); ++y) {
    const double d = R(xi, static_cast<Eigen::Index>(y));
    total += gen.nu()[y];
    if (in_closed_ball(d, eps)) closed += gen.nu()[y];
    inside[y] = in_open_ball(d, eps);
  }
  out.global_bound = gen.nu()[x] / total;
  out.local_ratio = gen.nu()[x] / closed;
  out.exit_exact = t > 0.0 ? exit_probability(gen, x, inside, t) : 0.0;
  std::size_t hits = 0;
  if (t > 0.0) {
    for (std::size_t k = 0; k < n_paths; ++k) {
      auto sub = rng.substream(k);
      hits += exits_before(gen, x, inside, t, sub);
    }
  }
  out.exit_ci_high = n_paths ? wilson_interval(hits, n_paths, confidence).second : 1.0;
  const double tol = 1e-12;
  out.global_holds = out.diagonal >= out.global_bound - tol;
  out.local_holds_exact = out.diagonal >= out.local_ratio - out.exit_exact - tol;
  out.local_holds_mc = out.diagonal >= out.local_ratio - out.exit_ci_high - tol;
  out.positive = out.diagonal > 1e-300;
  return out;
}

struct DensityBoundCheck {
  double worst_ratio = 0.0;  // max over checked x of p(t,x,x) / bound
  bool holds = false;
};

/// p(t,x,x) <= 2r/t + sqrt(2)/nu(D(rho,r)) for every x in D(rho,r).
inline DensityBoundCheck density_bound_check(const SpectralKernel& K, const Eigen::MatrixXd& R, std::size_t rho, double r, double t) {
  if (!(t > 0.0)) fail(Errc::NonpositiveTime, "t must be positive");
  const auto ri = static_cast<Eigen::Index>(rho);
  double mass = 0.0;
  for (std::size_t y = 0; y < K.size(); ++y)
    if (in_closed_ball(R(ri, static_cast<Eigen::Index>(y)), r)) mass += K.nu()[y];
  const double bound = 2.0 * r / t + std::sqrt(2.0) / mass;
  const Eigen::VectorXd diag = K.diagonal(t);
  DensityBoundCheck out;
  for (std::size_t x = 0; x < K.size(); ++x) {
    if (!in_closed_ball(R(ri, static_cast<Eigen::Index>(x)), r)) continue;
    out.worst_ratio = std::max(out.worst_ratio, diag(static_cast<Eigen::Index>(x)) / K.nu()[x] / bound);
  }
  out.holds = out.worst_ratio <= 1.0 + 1e-12;
  return out;
}

/// |p(t,x,y) - p(t,x',y')| <= sqrt(p(t,x,x) R(y,y')/t) + sqrt(p(t,y',y') R(x,x')/t); returns the largest
/// excess of the left side over the right side across all quadruples (negative when it holds).
inline double modulus_check(const SpectralKernel& K, const Eigen::MatrixXd& R, double t) {
  const std::size_t n = K.size();
  std::vector<std::vector<double>> p(n, std::vector<double>(n));
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y) p[x][y] = K.density(x, y, t);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t xp = 0; xp < n; ++xp)
        for (std::size_t yp = 0; yp < n; ++yp) {
          const double lhs = std::abs(p[x][y] - p[xp][yp]);
          const double rhs = std::sqrt(p[x][x] * R(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(yp)) / t) +
                             std::sqrt(p[yp][yp] * R(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(xp)) / t);
          worst = std::max(worst, lhs - rhs);
        }
  return worst;
}

}  // namespace trapnet
