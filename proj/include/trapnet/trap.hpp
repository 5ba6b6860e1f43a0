#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#if defined(TRAPNET_HAVE_QUADMATH)
#include <quadmath.h>
#endif

#include "trapnet/error.hpp"
#include "trapnet/measure.hpp"
#include "trapnet/network.hpp"
#include "trapnet/rng.hpp"

namespace trapnet {

/// Pure Pareto law: P(xi > u) = (u_min / u)^alpha for u >= u_min.
struct TrapLaw {
  double alpha = 0.5;
  double u_min = 1.0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::PreconditionViolated, "alpha must lie in (0,1)");
    if (!(u_min > 0.0) || !std::isfinite(u_min)) fail(Errc::PreconditionViolated, "u_min must be positive");
  }
};

/// Space, mass and trap-depth normalizations (a_n, b_n, c_n).
struct Scale {
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
};

namespace detail {

#if defined(TRAPNET_HAVE_QUADMATH)
using wide_real = __float128;
inline wide_real wide_pow(wide_real x, wide_real y) { return powq(x, y); }
#else
using wide_real = long double;
inline wide_real wide_pow(wide_real x, wide_real y) { return std::pow(x, y); }
#endif

}  // namespace detail

/// Inverse-CDF transform of a uniform U in (0,1].
inline double pareto_quantile(const TrapLaw& law, double U) { return law.u_min * std::pow(U, -1.0 / law.alpha); }

inline double pareto_sample(const TrapLaw& law, RngStream& rng) { return pareto_quantile(law, rng.uniform()); }

/// P(xi > u), evaluated in extended precision and rounded once.
inline double pareto_tail(const TrapLaw& law, double u) {
  if (u < law.u_min) return 1.0;
  using W = detail::wide_real;
  return static_cast<double>(detail::wide_pow(static_cast<W>(law.u_min) / static_cast<W>(u), static_cast<W>(law.alpha)));
}

/// c_n = inf{u > 0 : P(xi > u) < 1/b_n} = u_min b_n^{1/alpha}.
inline double scaling_constant(const TrapLaw& law, double b_n) {
  law.validate();
  if (!(b_n >= 1.0) || !std::isfinite(b_n)) fail(Errc::InvalidScale, "b_n must be at least 1");
  return law.u_min * std::pow(b_n, 1.0 / law.alpha);
}

inline Scale make_scale(const TrapLaw& law, double a_n, double b_n) {
  if (!(a_n > 0.0) || !std::isfinite(a_n)) fail(Errc::InvalidScale, "a_n must be positive");
  return {a_n, b_n, scaling_constant(law, b_n)};
}

/// b_n P(c_n^{-1} xi > u). All intermediate steps are carried in extended
/// precision, so the result is the correctly rounded value of u^{-alpha}
/// whenever c_n u >= u_min.
inline double scaled_tail(const TrapLaw& law, double b_n, double u) {
  law.validate();
  if (!(b_n >= 1.0) || !std::isfinite(b_n)) fail(Errc::InvalidScale, "b_n must be at least 1");
  using W = detail::wide_real;
  const W alpha = law.alpha, umin = law.u_min, b = b_n;
  const W c = umin * detail::wide_pow(b, W(1) / alpha);
  const W x = c * static_cast<W>(u);
  if (x < umin) return static_cast<double>(b);
  return static_cast<double>(b * detail::wide_pow(umin / x, alpha));
}

/// u^{-alpha} rounded once from extended precision.
inline double power_tail(double alpha, double u) {
  using W = detail::wide_real;
  return static_cast<double>(detail::wide_pow(static_cast<W>(u), -static_cast<W>(alpha)));
}

/// Trap measure together with its network and scale.
struct TrapEnvironment {
  const ElectricalNetwork* network = nullptr;
  std::vector<double> nu;
  Scale scale;

  std::size_t size() const noexcept { return nu.size(); }
  double total_mass() const {
    double s = 0.0;
    for (double w : nu) s += w;
    return s;
  }
  DiscreteMeasure as_measure(SpacePtr carrier) const {
    DiscreteMeasure m(std::move(carrier));
    for (std::size_t i = 0; i < nu.size(); ++i) m.add(i, nu[i]);
    return m;
  }
};

/// i.i.d. Pareto weight at each vertex. The draw at a vertex comes from the
/// substream keyed by its id, so networks sharing ids share traps.
inline std::vector<double> sample_trap(const ElectricalNetwork& net, const TrapLaw& law, const RngStream& rng) {
  law.validate();
  std::vector<double> nu(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto sub = rng.substream(static_cast<std::uint64_t>(net.id(i)));
    nu[i] = pareto_sample(law, sub);
  }
  return nu;
}

inline TrapEnvironment make_environment(const ElectricalNetwork& net, std::vector<double> nu, Scale scale = {}) {
  if (nu.size() != net.size()) fail(Errc::SupportMismatch, "trap weights must cover every vertex");
  for (double w : nu)
    if (!(w > 0.0) || !std::isfinite(w)) fail(Errc::SupportMismatch, "trap weights must be positive");
  return {&net, std::move(nu), scale};
}

struct TrapPointProcesses {
  PointMeasure pi;
  PointMeasure pi_marked;
};

/// pi_n = sum_x delta(x, nu_x / c_n) and its marked version with mark mu(x).
inline TrapPointProcesses trap_point_process(const TrapEnvironment& env, SpacePtr carrier = nullptr) {
  TrapPointProcesses out{PointMeasure(carrier, false), PointMeasure(carrier, true)};
  for (std::size_t i = 0; i < env.nu.size(); ++i) {
    const double w = env.nu[i] / env.scale.c;
    out.pi.add(i, w);
    out.pi_marked.add_marked(i, env.network->total_conductance(i), w);
  }
  return out;
}

/// Poisson random measure with intensity mu(dx) alpha v^{-1-alpha} dv, restricted to v >= v_floor.
inline PointMeasure truncated_prm(const DiscreteMeasure& base, double alpha, double v_floor, RngStream& rng) {
  if (!(v_floor > 0.0) || !std::isfinite(v_floor)) fail(Errc::InvalidTruncation, "v_floor must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) fail(Errc::PreconditionViolated, "alpha must lie in (0,1)");
  PointMeasure out(base.carrier());
  const double rate = std::pow(v_floor, -alpha);
  for (const auto& [x, m] : base.atoms()) {
    const auto k = poisson(rng, m * rate);
    for (std::uint64_t j = 0; j < k; ++j) out.add(x, v_floor * std::pow(rng.uniform(), -1.0 / alpha));
  }
  return out;
}

/// Mean total mass of the atoms below the truncation level per unit base mass:
/// integral over (0, v_floor) of v alpha v^{-1-alpha} dv.
inline double prm_truncated_mass(double alpha, double v_floor) { return alpha / (1.0 - alpha) * std::pow(v_floor, 1.0 - alpha); }

/// Traps coupled to a shared limiting Poisson random measure.
///
/// A cell of base mass m whose largest atom weight is M has
/// P(M <= v) = exp(-m v^{-alpha}); pushing U = exp(-m M^{-alpha}) through the
/// Pareto quantile gives an exact Pareto draw per cell. Cells whose atoms all
/// fall below the truncation level get U uniform on (0, exp(-m v_floor^{-alpha})).
inline double quantile_coupled_trap(const TrapLaw& law, double cell_mass, double max_atom, double v_floor, RngStream& fallback) {
  double tail;  // 1 - U
  if (max_atom >= v_floor) {
    tail = -std::expm1(-cell_mass * std::pow(max_atom, -law.alpha));
  } else {
    const double cap = std::exp(-cell_mass * std::pow(v_floor, -law.alpha));
    tail = 1.0 - fallback.uniform() * cap;
  }
  if (!(tail > 0.0)) tail = std::numeric_limits<double>::min();
  return law.u_min * std::pow(tail, -1.0 / law.alpha);
}

}  // namespace trapnet
