#pragma once

#include <complex>

#include "gale/common.hpp"

namespace gale {

using Complex = std::complex<double>;

struct PhysicalConstants {
  double rho{1.225};  // air density, kg/m^3
  double p_inf{0.0};  // farfield static pressure, Pa (fixed 0)
};

/// Steady Bernoulli with zero farfield static pressure.
inline double pressure_from_velocity(const Vec2& u, double u_inf, double rho) {
  return 0.5 * rho * (u_inf * u_inf - (u.x * u.x + u.y * u.y));
}

// ---------------------------------------------------------------------------
// Body geometry through the conformal map z = zeta + b^2/zeta.  A cylinder is
// the identity map (b = 0) around a circle at the origin; a Joukowski foil
// maps a circle of radius `a` centered at `mu` passing through zeta = b.
// ---------------------------------------------------------------------------

class BodyShape {
 public:
  static BodyShape cylinder(double radius) {
    if (radius <= 0.0) throw ConfigError("cylinder radius must be positive");
    BodyShape s;
    s.b_ = 0.0;
    s.mu_ = {0.0, 0.0};
    s.a_ = radius;
    s.beta_ = 0.0;
    s.kutta_ = false;
    s.chord_ = 2.0 * radius;
    s.le_ = {-radius, 0.0};
    s.te_ = {radius, 0.0};
    return s;
  }

  /// thickness eps > 0, vertical camber mu_y, target chord in meters.
  static BodyShape joukowski(double eps, double mu_y, double chord) {
    if (eps <= 0.0) throw ConfigError("joukowski thickness must be positive");
    if (chord <= 0.0) throw ConfigError("chord must be positive");
    BodyShape s;
    s.b_ = 1.0;
    s.mu_ = {-eps, mu_y};
    s.a_ = std::abs(Complex(1.0, 0.0) - s.mu_);
    s.beta_ = std::atan2(mu_y, 1.0 + eps);
    s.kutta_ = true;

    // Leading edge by dense sampling of the mapped surface; everything is
    // linear in b, so rescale to hit the requested chord exactly.
    const int kSamples = 4096;
    double min_x = 2.0;
    double min_y = 0.0;
    for (int i = 0; i < kSamples; ++i) {
      double th = 2.0 * kPi * i / kSamples;
      Complex z = s.map(s.mu_ + s.a_ * std::polar(1.0, th));
      if (z.real() < min_x) {
        min_x = z.real();
        min_y = z.imag();
      }
    }
    double chord_unit = 2.0 - min_x;  // TE maps to z = 2b with b = 1
    double scale = chord / chord_unit;
    s.b_ *= scale;
    s.mu_ *= scale;
    s.a_ *= scale;
    s.chord_ = chord;
    s.le_ = {min_x * scale, min_y * scale};
    s.te_ = {2.0 * s.b_, 0.0};
    return s;
  }

  double chord() const { return chord_; }
  Vec2 leading_edge() const { return le_; }
  Vec2 trailing_edge() const { return te_; }
  Vec2 chord_mid() const { return (le_ + te_) * 0.5; }
  double circle_radius() const { return a_; }
  Complex circle_center() const { return mu_; }
  bool has_kutta() const { return kutta_; }

  /// Trailing-edge angle of the circle-plane preimage; the O-grid anchors a
  /// vertex here so wall faces never straddle the cusp.
  double theta_te() const { return -beta_; }

  /// Circulation fixed by the Kutta condition (zero for blunt bodies).
  double circulation(double u_inf, double alpha_rad) const {
    if (!kutta_) return 0.0;
    return 4.0 * kPi * u_inf * a_ * std::sin(alpha_rad + beta_);
  }

  Complex map(Complex zeta) const {
    if (b_ == 0.0) return zeta;
    return zeta + b_ * b_ / zeta;
  }

  Complex surface_point(double theta) const { return map(mu_ + a_ * std::polar(1.0, theta)); }

  /// Inverts the map, picking the branch outside the circle.
  Complex zeta_of(Complex z) const {
    if (b_ == 0.0) return z;
    Complex w = std::sqrt(z * z - 4.0 * b_ * b_);
    Complex c1 = 0.5 * (z + w);
    Complex c2 = 0.5 * (z - w);
    return std::abs(c1 - mu_) >= std::abs(c2 - mu_) ? c1 : c2;
  }

  /// Complex velocity u - iv at a circle-plane location.
  Complex circle_plane_velocity(Complex zeta, double u_inf, double alpha_rad) const {
    Complex rel = zeta - mu_;
    Complex e_m = std::polar(u_inf, -alpha_rad);
    Complex e_p = std::polar(u_inf, alpha_rad);
    Complex dw = e_m - e_p * (a_ * a_) / (rel * rel);
    double gamma = circulation(u_inf, alpha_rad);
    if (gamma != 0.0) dw += Complex(0.0, gamma / (2.0 * kPi)) / rel;
    Complex dz = b_ == 0.0 ? Complex(1.0, 0.0) : Complex(1.0, 0.0) - b_ * b_ / (zeta * zeta);
    return dw / dz;
  }

  /// Velocity vector exactly on the surface at circle angle theta.
  Vec2 surface_velocity(double theta, double u_inf, double alpha_rad) const {
    Complex w = circle_plane_velocity(mu_ + a_ * std::polar(1.0, theta), u_inf, alpha_rad);
    if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
      throw DomainError("surface velocity evaluated at the trailing-edge cusp");
    return {w.real(), -w.imag()};
  }

  bool contains(const Vec2& p) const {
    Complex zeta = zeta_of({p.x, p.y});
    return std::abs(zeta - mu_) < a_ * (1.0 - 1e-9);
  }

 private:
  double b_{0.0};
  Complex mu_{0.0, 0.0};
  double a_{1.0};
  double beta_{0.0};
  bool kutta_{false};
  double chord_{1.0};
  Vec2 le_{}, te_{};
};

/// Potential-flow velocity of uniform inflow past the body, with circulation
/// fixed by the Kutta condition for sharp trailing edges.
inline Vec2 potential_velocity(const BodyShape& shape, double u_inf, double alpha_deg, const Vec2& p) {
  Complex zeta = shape.zeta_of({p.x, p.y});
  double r = std::abs(zeta - shape.circle_center());
  if (r < shape.circle_radius() * (1.0 - 1e-9))
    throw DomainError("point (" + format_g17(p.x) + "," + format_g17(p.y) + ") lies inside the body");
  Complex w = shape.circle_plane_velocity(zeta, u_inf, deg_to_rad(alpha_deg));
  if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
    throw DomainError("velocity evaluation degenerate at the trailing edge");
  return {w.real(), -w.imag()};
}

}  // namespace gale
