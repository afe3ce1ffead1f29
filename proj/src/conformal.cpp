#include "exflow/conformal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace exflow {

namespace {

// sqrt(z^2 - f^2) with branch cut exactly on the segment [-f, f], computed as
// z * sqrt(1 - (f/z)^2) so the function is ~ z at infinity.
Cx slit_sqrt(Cx z, double f) {
  if (f == 0.0) return z;
  return z * std::sqrt(Cx(1.0, 0.0) - (f / z) * (f / z));
}

}  // namespace

Cx ExteriorMap::pre(Cx z) const {
  const Cx v = std::conj(axis_) * (z - center_);
  const Cx u = 0.5 * (v + slit_sqrt(v, foci_));  // inverse Joukowski, monic at infinity... see post()
  return (foci_ == 0.0 ? v : u) / prescale_;
}

Cx ExteriorMap::pre_derivative(Cx z, Cx u_scaled) const {
  if (foci_ == 0.0) return std::conj(axis_) / prescale_;
  const Cx v = std::conj(axis_) * (z - center_);
  const Cx s = slit_sqrt(v, foci_);
  // du/dv = u/s for u = (v + s)/2.
  const Cx u = u_scaled * prescale_;
  return std::conj(axis_) * (u / s) / prescale_;
}

Cx ExteriorMap::post(Cx u_scaled) const {
  if (foci_ == 0.0) return center_ + axis_ * (prescale_ * u_scaled);
  const Cx u = prescale_ * u_scaled;
  const Cx v = u + (foci_ * foci_ / 4.0) / u;  // Joukowski back-map
  return center_ + axis_ * v;
}

Cx ExteriorMap::series(Cx u) const {
  // Horner in 1/u over c_N .. c_0.
  const Cx iu = 1.0 / u;
  Cx s(0, 0);
  for (std::size_t m = coeffs_.size(); m-- > 0;) s = s * iu + coeffs_[m];
  return s;
}

Cx ExteriorMap::series_u_dS(Cx u) const {
  const Cx iu = 1.0 / u;
  Cx s(0, 0);
  for (std::size_t m = coeffs_.size(); m-- > 1;)
    s = s * iu + (-static_cast<double>(m)) * coeffs_[m];
  return s * iu;
}

Cx ExteriorMap::evaluate(Cx z) const {
  const Cx u = pre(z);
  return axis_ * u * std::exp(series(u));
}

Cx ExteriorMap::derivative(Cx z) const {
  const Cx u = pre(z);
  return axis_ * std::exp(series(u)) * (Cx(1, 0) + series_u_dS(u)) * pre_derivative(z, u);
}

Cx ExteriorMap::inverse(Cx w) const {
  if (std::abs(w) <= 1.0)
    throw std::invalid_argument("map_inverse requires |w| > 1");
  // Newton on g(u) = axis * u * exp(S(u)) - w in the normalized plane.
  Cx u = std::conj(axis_) * w / std::exp(coeffs_.empty() ? Cx(0, 0) : coeffs_[0]);
  Cx g = axis_ * u * std::exp(series(u)) - w;
  for (int it = 0; it < 50; ++it) {
    if (std::abs(g) <= 1e-12 * std::max(1.0, std::abs(w))) return post(u);
    const Cx dg = axis_ * std::exp(series(u)) * (Cx(1, 0) + series_u_dS(u));
    const Cx step = g / dg;
    double damp = 1.0;
    Cx u_new = u - step;
    Cx g_new = axis_ * u_new * std::exp(series(u_new)) - w;
    int halvings = 0;
    while (std::abs(g_new) >= std::abs(g) && halvings < 12) {
      damp *= 0.5;
      u_new = u - damp * step;
      g_new = axis_ * u_new * std::exp(series(u_new)) - w;
      ++halvings;
    }
    u = u_new;
    g = g_new;
  }
  if (std::abs(g) <= 1e-9 * std::max(1.0, std::abs(w))) return post(u);
  std::ostringstream os;
  os << "map_inverse Newton failed to converge; last iterate (" << post(u).real() << ", "
     << post(u).imag() << "), |T(z)-w| = " << std::abs(g);
  throw std::runtime_error(os.str());
}

ExteriorMap ExteriorMap::fit(const JordanCurve& curve, int degree, double residual_tol) {
  const std::size_t m = curve.size();
  if (static_cast<int>(m) < 2 * degree + 2)
    throw std::invalid_argument("collocation count must be at least 2*degree+2");

  ExteriorMap map;

  // Principal axis and extents from the boundary second moments.
  Cx mean(0, 0);
  for (const Cx& p : curve.points) mean += p;
  mean /= static_cast<double>(m);
  double sxx = 0, sxy = 0, syy = 0;
  for (const Cx& p : curve.points) {
    const Cx d = p - mean;
    sxx += d.real() * d.real();
    sxy += d.real() * d.imag();
    syy += d.imag() * d.imag();
  }
  const double tr = sxx + syy, det = sxx * syy - sxy * sxy;
  const double lam = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  Cx axis(1, 0);
  if (std::abs(sxy) > 1e-14 * tr || sxx < syy) {
    Cx dir(lam - syy, sxy);
    if (std::abs(dir) < 1e-14 * std::sqrt(tr)) dir = Cx(0, 1);
    axis = dir / std::abs(dir);
  }
  double pa_min = 1e300, pa_max = -1e300, pb_min = 1e300, pb_max = -1e300;
  for (const Cx& p : curve.points) {
    const Cx d = std::conj(axis) * (p - mean);
    pa_min = std::min(pa_min, d.real());
    pa_max = std::max(pa_max, d.real());
    pb_min = std::min(pb_min, d.imag());
    pb_max = std::max(pb_max, d.imag());
  }
  const double ext_a = 0.5 * (pa_max - pa_min), ext_b = 0.5 * (pb_max - pb_min);
  map.center_ = mean + axis * Cx(0.5 * (pa_max + pa_min), 0.5 * (pb_max + pb_min));
  map.axis_ = axis;

  if (ext_a >= 1.25 * ext_b) {
    // Slit pre-map. Keep the cut strictly inside the curve.
    double f = std::sqrt(std::max(0.0, ext_a * ext_a - ext_b * ext_b));
    bool cut_inside = true;
    for (int s = 0; s <= 16 && cut_inside; ++s) {
      const Cx q = map.center_ + axis * Cx(f * (2.0 * s / 16.0 - 1.0), 0.0);
      cut_inside = curve.contains(q);
    }
    if (cut_inside && f > 0.0) map.foci_ = f;
  }
  if (map.foci_ == 0.0) map.axis_ = Cx(1, 0);  // affine pre-map needs no rotation

  // Normalize u so the collocation powers stay O(1).
  map.prescale_ = 1.0;
  std::vector<Cx> u(m);
  double log_rho = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    u[p] = map.pre(curve.points[p]);
    log_rho += std::log(std::abs(u[p]));
  }
  map.prescale_ = std::exp(log_rho / static_cast<double>(m));
  for (std::size_t p = 0; p < m; ++p) u[p] /= map.prescale_;

  // Least squares on log|T| = 0: columns are 1, Re u^-m, -Im u^-m.
  const int ncols = 2 * degree + 1;
  Eigen::MatrixXd a(m, ncols);
  Eigen::VectorXd b(m);
  for (std::size_t p = 0; p < m; ++p) {
    a(p, 0) = 1.0;
    Cx pw(1, 0);
    const Cx iu = 1.0 / u[p];
    for (int mm = 1; mm <= degree; ++mm) {
      pw *= iu;
      a(p, 2 * mm - 1) = pw.real();
      a(p, 2 * mm) = -pw.imag();
    }
    b(p) = -std::log(std::abs(u[p]));
  }

  Eigen::VectorXd col_scale(ncols);
  for (int c = 0; c < ncols; ++c) {
    col_scale(c) = a.col(c).norm();
    if (col_scale(c) == 0.0) col_scale(c) = 1.0;
    a.col(c) /= col_scale(c);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto& rdiag = qr.matrixR().diagonal();
  const double cond = std::abs(rdiag(0)) / std::max(1e-300, std::abs(rdiag(rdiag.size() - 1)));
  if (cond > 1e14) {
    std::ostringstream os;
    os << "ill-conditioned collocation system (condition estimate " << cond << ")";
    throw std::runtime_error(os.str());
  }
  Eigen::VectorXd x = qr.solve(b);
  for (int c = 0; c < ncols; ++c) x(c) /= col_scale(c);

  map.coeffs_.assign(degree + 1, Cx(0, 0));
  map.coeffs_[0] = Cx(x(0), 0.0);
  for (int mm = 1; mm <= degree; ++mm) map.coeffs_[mm] = Cx(x(2 * mm - 1), x(2 * mm));

  double res = 0.0;
  std::vector<double> args(m);
  for (std::size_t p = 0; p < m; ++p) {
    const Cx t = map.evaluate(curve.points[p]);
    res = std::max(res, std::abs(std::abs(t) - 1.0));
    args[p] = std::arg(t);
  }
  map.residual_ = res;
  if (res > residual_tol) {
    std::ostringstream os;
    os << "boundary fit residual " << res << " exceeds tolerance " << residual_tol;
    throw std::runtime_error(os.str());
  }

  // Univalence spot checks: the boundary image must wind exactly once and the
  // argument must be monotone along the samples.
  double total = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    double d = args[(p + 1) % m] - args[p];
    while (d <= -kPi) d += kTwoPi;
    while (d > kPi) d -= kTwoPi;
    if (d <= 0.0) throw std::runtime_error("fitted map is not univalent on the boundary");
    total += d;
  }
  if (std::abs(total - kTwoPi) > 1e-6)
    throw std::runtime_error("fitted boundary image does not wind once around the disk");

  return map;
}

nlohmann::json ExteriorMap::to_json() const {
  nlohmann::json j;
  j["beta"] = beta();
  j["center"] = {center_.real(), center_.imag()};
  j["axis"] = {axis_.real(), axis_.imag()};
  j["foci"] = foci_;
  j["prescale"] = prescale_;
  j["residual"] = residual_;
  auto& c = j["coeffs"] = nlohmann::json::array();
  for (const Cx& v : coeffs_) c.push_back({v.real(), v.imag()});
  return j;
}

ExteriorMap ExteriorMap::from_json(const nlohmann::json& j) {
  ExteriorMap m;
  m.center_ = Cx(j.at("center")[0], j.at("center")[1]);
  m.axis_ = Cx(j.at("axis")[0], j.at("axis")[1]);
  m.foci_ = j.at("foci");
  m.prescale_ = j.at("prescale");
  m.residual_ = j.at("residual");
  for (const auto& v : j.at("coeffs")) m.coeffs_.emplace_back(v[0], v[1]);
  return m;
}

Cx inversion(Cx x) {
  const double r2 = abs2(x);
  if (r2 == 0.0) throw std::invalid_argument("inversion undefined at the origin");
  return x / r2;
}

std::vector<CaratheodoryRow> caratheodory_check(
    const std::vector<std::pair<int, const ExteriorMap*>>& maps,
    const std::function<Cx(Cx)>& reference, const std::function<Cx(Cx)>& reference_derivative,
    const std::vector<Cx>& test_points, const std::vector<Cx>& interior_side) {
  std::vector<CaratheodoryRow> rows;
  rows.reserve(maps.size());
  for (const auto& [n, map] : maps) {
    CaratheodoryRow row;
    row.n = n;
    for (const Cx& x : test_points) {
      const Cx t = map->evaluate(x);
      if (std::abs(t) <= 1.0) {
        std::ostringstream os;
        os << "test point (" << x.real() << ", " << x.imag()
           << ") is not exterior to approximant n = " << n;
        throw std::invalid_argument(os.str());
      }
      row.sup_map = std::max(row.sup_map, std::abs(t - reference(x)));
      row.sup_derivative =
          std::max(row.sup_derivative, std::abs(map->derivative(x) - reference_derivative(x)));
    }
    for (const Cx& x : interior_side)
      row.sup_boundary_mod = std::max(row.sup_boundary_mod, std::abs(std::abs(map->evaluate(x)) - 1.0));
    rows.push_back(row);
  }
  return rows;
}

Cx segment_exterior_map(Cx z) { return z + slit_sqrt(z, 1.0); }

Cx segment_exterior_map_derivative(Cx z) {
  const Cx s = slit_sqrt(z, 1.0);
  return Cx(1, 0) + z / s;
}

Cx ellipse_exterior_map(Cx z, double a, double b) {
  const double f = std::sqrt(std::max(0.0, a * a - b * b));
  return (z + slit_sqrt(z, f)) / (a + b);
}

Cx ellipse_exterior_map_derivative(Cx z, double a, double b) {
  const double f = std::sqrt(std::max(0.0, a * a - b * b));
  const Cx s = slit_sqrt(z, f);
  return (Cx(1, 0) + z / s) / (a + b);
}

Cx ellipse_exterior_map_inverse(Cx w, double a, double b) {
  return 0.5 * ((a + b) * w + (a - b) / w);
}

}  // namespace exflow
