#pragma once

#include <functional>
#include <vector>

#include <json.hpp>

#include "exflow/common.hpp"
#include "exflow/geometry.hpp"

namespace exflow {

/// Exterior Riemann map T from the outside of a Jordan curve onto the outside
/// of the unit disk, normalized by T(inf) = inf and T'(inf) > 0.
///
/// Representation: T(z) = phase * u * exp(sum_{m=0..N} c_m u^-m) where u is a
/// normalized pre-image of z. The pre-map is affine for blobby curves and an
/// inverse Joukowski transform for elongated ones, which keeps the collocation
/// system well conditioned; Im c_0 = 0 pins the rotation so that the
/// derivative at infinity is a positive real.
class ExteriorMap {
 public:
  ExteriorMap() = default;

  /// Least-squares fit of |T| = 1 on the curve samples. Throws if the system
  /// is ill conditioned or the residual exceeds residual_tol.
  static ExteriorMap fit(const JordanCurve& curve, int degree = 64, double residual_tol = 1e-6);

  Cx evaluate(Cx z) const;
  Cx derivative(Cx z) const;
  /// Damped Newton inversion seeded from the asymptotic z ~ w / beta.
  Cx inverse(Cx w) const;

  double beta() const { return std::exp(coeffs_.empty() ? 0.0 : coeffs_[0].real()) / prescale_; }
  double residual() const { return residual_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  const std::vector<Cx>& coeffs() const { return coeffs_; }

  nlohmann::json to_json() const;
  static ExteriorMap from_json(const nlohmann::json& j);

 private:
  Cx center_{0.0, 0.0};   // expansion / slit center
  Cx axis_{1.0, 0.0};     // unit principal direction (also the output phase)
  double foci_ = 0.0;     // half focal distance of the slit pre-map; 0 = affine
  double prescale_ = 1.0; // u normalization rho
  std::vector<Cx> coeffs_;
  double residual_ = 0.0;

  Cx pre(Cx z) const;                    // z -> u (normalized)
  Cx pre_derivative(Cx z, Cx u) const;   // du/dz
  Cx post(Cx u) const;                   // u -> z
  Cx series(Cx u) const;                 // S(u)
  Cx series_u_dS(Cx u) const;            // u S'(u) = sum -m c_m u^-m
  friend ExteriorMap fit_exterior_map_impl(const JordanCurve&, int, double);
};

/// Spec-level alias.
inline ExteriorMap fit_exterior_map(const JordanCurve& curve, int degree = 64,
                                    double residual_tol = 1e-6) {
  return ExteriorMap::fit(curve, degree, residual_tol);
}

inline Cx map_evaluate(const ExteriorMap& m, Cx x) { return m.evaluate(x); }
inline Cx map_derivative(const ExteriorMap& m, Cx x) { return m.derivative(x); }
inline Cx map_inverse(const ExteriorMap& m, Cx w) { return m.inverse(w); }

/// The inversion x -> x / |x|^2.
Cx inversion(Cx x);

struct CaratheodoryRow {
  int n = 0;
  double sup_map = 0.0;        // sup_K |T_n - T|
  double sup_derivative = 0.0; // sup_K |T_n' - T'|
  double sup_boundary_mod = 0.0;  // sup over interior-side points of ||T_n| - 1|
};

/// Pointwise deviation table of a map sequence against a reference map.
/// interior_side may be empty (the boundary-modulus column is then 0).
std::vector<CaratheodoryRow> caratheodory_check(
    const std::vector<std::pair<int, const ExteriorMap*>>& maps,
    const std::function<Cx(Cx)>& reference, const std::function<Cx(Cx)>& reference_derivative,
    const std::vector<Cx>& test_points, const std::vector<Cx>& interior_side = {});

/// Closed forms used as oracles and study references.
/// Exterior map of the segment [-1,1]: z + sqrt(z^2 - 1), branch cut on the
/// segment, ~ 2z at infinity.
Cx segment_exterior_map(Cx z);
Cx segment_exterior_map_derivative(Cx z);
/// Exterior map of the origin-centered ellipse with semiaxes a >= b:
/// (z + sqrt(z^2 - (a^2-b^2))) / (a + b).
Cx ellipse_exterior_map(Cx z, double a, double b);
Cx ellipse_exterior_map_derivative(Cx z, double a, double b);
/// Its inverse, the Joukowski form ((a+b) w + (a-b)/w) / 2.
Cx ellipse_exterior_map_inverse(Cx w, double a, double b);

}  // namespace exflow
