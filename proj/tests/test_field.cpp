#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "exflow/field.hpp"

using namespace exflow;

namespace {

std::shared_ptr<const std::vector<ExteriorMap>> fit_maps(const std::vector<JordanCurve>& curves,
                                                         double tol = 1e-8) {
  auto maps = std::make_shared<std::vector<ExteriorMap>>();
  for (const auto& c : curves) maps->push_back(ExteriorMap::fit(c, 64, tol));
  return maps;
}

// Assembles a decomposition with prescribed alpha (bypassing the quadrature).
StreamDecomposition make_decomp(std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                const DomainApproximation& approx, const VortexBlobs& blobs,
                                std::vector<double> gamma, std::vector<double> alpha) {
  StreamDecomposition d;
  d.maps = maps;
  auto fields = std::make_shared<std::vector<HarmonicExpansion>>();
  for (std::size_t i = 0; i < approx.curves.size(); ++i)
    fields->push_back(solve_harmonic_multi(approx, static_cast<int>(i), maps));
  d.harmonic_fields = fields;
  d.correction = solve_correction_multi(approx, maps, blobs);
  d.gamma = std::move(gamma);
  d.alpha = std::move(alpha);
  d.images = KernelImages::build(maps->front(), blobs);
  return d;
}

double contour_circulation(const std::function<Cx(Cx)>& u, Cx center, double radius,
                           int m = 1024) {
  double circ = 0.0;
  for (int i = 0; i < m; ++i) {
    const double th = kTwoPi * i / m;
    const Cx x = center + radius * Cx(std::cos(th), std::sin(th));
    const Cx tangent(-std::sin(th), std::cos(th));
    const Cx v = u(x);
    circ += v.real() * tangent.real() + v.imag() * tangent.imag();
  }
  return circ * radius * kTwoPi / m;
}

}  // namespace

TEST_CASE("kernel stream vanishes for zero strengths") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  VortexBlobs blobs;
  blobs.positions = {Cx(2, 0), Cx(0, 3)};
  blobs.strengths = {0.0, 0.0};
  CHECK(kernel_psi0_single(map, blobs, Cx(3, 1)) == 0.0);
  CHECK(kernel_grad_single(map, blobs, Cx(3, 1)) == Cx(0, 0));
}

TEST_CASE("kernel stream value against the image formula") {
  // unit disk, T = identity, blob 2*pi at (2, 0), x = (3, 0):
  // psi = ln(|3-2| / (|3-0.5| * 2)) = ln(1/5)
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  VortexBlobs blobs;
  blobs.positions = {Cx(2, 0)};
  blobs.strengths = {kTwoPi};
  blobs.core = 0.05;
  CHECK(kernel_psi0_single(map, blobs, Cx(3, 0)) ==
        doctest::Approx(std::log(0.2)).epsilon(1e-10));
  CHECK_THROWS_AS(kernel_psi0_single(map, blobs, Cx(0.5, 0)), std::invalid_argument);
}

TEST_CASE("disk kernel is rotation equivariant") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  VortexBlobs blobs;
  blobs.positions = {Cx(2, 0)};
  blobs.strengths = {1.0};
  const Cx x(0, 3);
  const double base = kernel_psi0_single(map, blobs, x);
  const Cx gbase = kernel_grad_single(map, blobs, x);
  for (double th : {0.3, 1.1, 2.7}) {
    const Cx rot(std::cos(th), std::sin(th));
    VortexBlobs rblobs = blobs;
    rblobs.positions[0] *= rot;
    CHECK(kernel_psi0_single(map, rblobs, rot * x) == doctest::Approx(base).epsilon(1e-10));
    CHECK(std::abs(kernel_grad_single(map, rblobs, rot * x) - gbase * rot) < 1e-10);
  }
}

TEST_CASE("kernel stream vanishes on the boundary") {
  const JordanCurve curve = JordanCurve::ellipse(Cx(0, 0), 2.0, 1.0);
  const ExteriorMap map = ExteriorMap::fit(curve, 64, 1e-8);
  VortexBlobs blobs;
  blobs.positions = {Cx(3, 1), Cx(-1, 2.5)};
  blobs.strengths = {1.5, -0.7};
  double worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double th = kTwoPi * (i + 0.37) / 64;
    const Cx z(2.0 * std::cos(th), 1.0 * std::sin(th));
    worst = std::max(worst, std::abs(kernel_psi0_cached(
                                map, KernelImages::build(map, blobs), blobs.strengths, z)));
  }
  CHECK(worst <= 10.0 * std::max(map.residual(), 1e-12) * blobs.l1_strength());
}

TEST_CASE("single-obstacle harmonic stream") {
  const ExteriorMap unit = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  CHECK(harmonic_psi_single(unit, Cx(2, 0)) ==
        doctest::Approx(std::log(2.0) / kTwoPi).epsilon(1e-12));
  const ExteriorMap r3 = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 3.0));
  CHECK(harmonic_psi_single(r3, Cx(0, 5)) ==
        doctest::Approx(std::log(5.0 / 3.0) / kTwoPi).epsilon(1e-10));
  CHECK_THROWS_AS(harmonic_psi_single(unit, Cx(0.2, 0)), std::invalid_argument);
}

TEST_CASE("multi-obstacle harmonic fields") {
  std::vector<JordanCurve> curves = {JordanCurve::circle(Cx(-3, 0), 1.0),
                                     JordanCurve::circle(Cx(3, 0), 1.0)};
  curves[0].owner = 0;
  curves[1].owner = 1;
  const DomainApproximation approx(curves);
  auto maps = fit_maps(curves);

  const HarmonicExpansion psi0 = solve_harmonic_multi(approx, 0, maps);
  const HarmonicExpansion psi1 = solve_harmonic_multi(approx, 1, maps);
  CHECK(psi0.fit_residual < 1e-10);

  SUBCASE("circulations are the Kronecker delta") {
    auto u0 = [&](Cx x) { return perp(psi0.gradient(x)); };
    CHECK(contour_circulation(u0, Cx(-3, 0), 1.5) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(contour_circulation(u0, Cx(3, 0), 1.5) == doctest::Approx(0.0).epsilon(1e-8));
    auto u1 = [&](Cx x) { return perp(psi1.gradient(x)); };
    CHECK(contour_circulation(u1, Cx(-3, 0), 1.5) == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(contour_circulation(u1, Cx(3, 0), 1.5) == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("boundary values: zero on own curve, one constant on the other") {
    double worst_own = 0.0, lo = 1e300, hi = -1e300;
    for (int i = 0; i < 96; ++i) {
      const double th = kTwoPi * (i + 0.21) / 96;
      const Cx on_own = Cx(-3, 0) + Cx(std::cos(th), std::sin(th));
      const Cx on_other = Cx(3, 0) + Cx(std::cos(th), std::sin(th));
      worst_own = std::max(worst_own, std::abs(psi0.value(on_own)));
      lo = std::min(lo, psi0.value(on_other));
      hi = std::max(hi, psi0.value(on_other));
    }
    CHECK(worst_own < 1e-8);
    CHECK(hi - lo < 1e-6);
    CHECK(psi0.boundary_constants[1] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-4));
  }
  SUBCASE("single obstacle solve reduces to the log of the map") {
    std::vector<JordanCurve> one = {JordanCurve::ellipse(Cx(0, 0), 2.0, 1.0)};
    const DomainApproximation ap1(one);
    auto maps1 = fit_maps(one);
    const HarmonicExpansion psi = solve_harmonic_multi(ap1, 0, maps1);
    for (const Cx z : {Cx(3, 0), Cx(0, 2), Cx(-2.4, 1.5)})
      CHECK(psi.value(z) ==
            doctest::Approx(harmonic_psi_single(maps1->front(), z)).epsilon(1e-8));
  }
}

TEST_CASE("multi-obstacle correction") {
  std::vector<JordanCurve> curves = {JordanCurve::circle(Cx(-3, 0), 1.0),
                                     JordanCurve::circle(Cx(3, 0), 1.0)};
  const DomainApproximation approx(curves);
  auto maps = fit_maps(curves);

  SUBCASE("zero for no vorticity") {
    VortexBlobs none;
    CHECK(solve_correction_multi(approx, maps, none).empty());
  }
  SUBCASE("zero for a single obstacle") {
    std::vector<JordanCurve> one = {JordanCurve::circle(Cx(0, 0), 1.0)};
    const DomainApproximation ap1(one);
    VortexBlobs blobs;
    blobs.positions = {Cx(2, 2)};
    blobs.strengths = {1.0};
    CHECK(solve_correction_multi(ap1, fit_maps(one), blobs).empty());
  }
  SUBCASE("matches minus the kernel trace and obeys the maximum principle") {
    VortexBlobs blobs;
    blobs.positions = {Cx(0, 10)};
    blobs.strengths = {1.0};
    const HarmonicExpansion corr = solve_correction_multi(approx, maps, blobs);
    CHECK(corr.fit_residual < 1e-8);

    const KernelImages img = KernelImages::build(maps->front(), blobs);
    double boundary_sup = 0.0;
    for (const auto& c : approx.curves)
      for (const Cx& p : c.points)
        boundary_sup =
            std::max(boundary_sup, std::abs(kernel_psi0_cached(maps->front(), img,
                                                               blobs.strengths, p)));
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> span(-8.0, 8.0);
    double interior_sup = 0.0;
    for (int i = 0; i < 500; ++i) {
      const Cx x(span(rng), span(rng));
      if (!approx.exterior_point(x)) continue;
      interior_sup = std::max(interior_sup, std::abs(corr.value(x)));
    }
    CHECK(interior_sup <= 1.05 * boundary_sup);
    CHECK(boundary_sup > 0.0);
  }
}

TEST_CASE("alpha from the weak circulation") {
  std::vector<JordanCurve> one = {JordanCurve::circle(Cx(0, 0), 1.0)};
  const DomainApproximation approx(one);
  auto maps = fit_maps(one);
  const auto disk = SingularObstacle::disk(Cx(0, 0), 1.0, 0);
  const std::vector<Cutoff> cutoffs = {Cutoff(disk, 0.5)};

  SUBCASE("no vorticity: alpha equals gamma") {
    VortexBlobs none;
    StreamDecomposition d = make_decomp(maps, approx, none, {2.5}, {});
    const auto alpha = compute_alpha(d, none, cutoffs, 32);
    CHECK(alpha[0] == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("kernel circulation equals minus the total strength") {
    // Residue count for the image kernel: each blob contributes one image of
    // strength -Gamma_j inside the disk, so the boundary circulation of
    // grad-perp psi0 is -sum Gamma_j and alpha = gamma + sum Gamma_j.
    VortexBlobs blobs;
    blobs.positions = {Cx(2.5, 0), Cx(-1.3, 2.2)};
    blobs.strengths = {1.0, 0.5};
    blobs.core = 0.05;
    StreamDecomposition d = make_decomp(maps, approx, blobs, {kTwoPi}, {});

    auto u0 = [&](Cx x) { return perp(d.psi0_gradient(blobs, x)); };
    CHECK(contour_circulation(u0, Cx(0, 0), 1.2) == doctest::Approx(-1.5).epsilon(1e-8));

    const auto alpha = compute_alpha(d, blobs, cutoffs, 64);
    CHECK(alpha[0] == doctest::Approx(kTwoPi + 1.5).epsilon(1e-4));
  }
  SUBCASE("unresolved quadrature grid is rejected") {
    VortexBlobs none;
    StreamDecomposition d = make_decomp(maps, approx, none, {0.0}, {});
    CHECK_THROWS_AS(compute_alpha(d, none, cutoffs, 2), std::invalid_argument);
  }
}

TEST_CASE("velocity of the pure circulation field") {
  std::vector<JordanCurve> one = {JordanCurve::circle(Cx(0, 0), 1.0)};
  const DomainApproximation approx(one);
  auto maps = fit_maps(one);
  VortexBlobs none;
  StreamDecomposition d = make_decomp(maps, approx, none, {kTwoPi}, {kTwoPi});
  const Cx u = velocity(d, none, Cx(2, 0));
  CHECK(u.real() == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(u.imag() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK_THROWS_AS(velocity(d, none, Cx(0.5, 0.5)), std::invalid_argument);
}

TEST_CASE("image dynamics of one blob outside the unit disk") {
  // zero total circulation: images are -Gamma at 1/d and +Gamma at the
  // center, so the blob advances at -Gamma / (2 pi d (d^2 - 1)).
  std::vector<JordanCurve> one = {JordanCurve::circle(Cx(0, 0), 1.0)};
  const DomainApproximation approx(one);
  auto maps = fit_maps(one);
  const double gamma_blob = kTwoPi, d0 = 2.0;
  VortexBlobs blobs;
  blobs.positions = {Cx(d0, 0)};
  blobs.strengths = {gamma_blob};
  blobs.core = 0.05;
  // alpha = 0 - (-Gamma) = Gamma exactly (residue count above)
  StreamDecomposition d = make_decomp(maps, approx, blobs, {0.0}, {gamma_blob});
  const Cx u = velocity(d, blobs, blobs.positions[0]);
  CHECK(u.real() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(u.imag() ==
        doctest::Approx(-gamma_blob / (kTwoPi * d0 * (d0 * d0 - 1.0))).epsilon(1e-9));
  CHECK(u.imag() == doctest::Approx(-1.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("velocity is tangent on the boundary") {
  const JordanCurve curve = JordanCurve::ellipse(Cx(0, 0), 2.0, 1.0);
  const DomainApproximation approx({curve});
  auto maps = fit_maps({curve});
  VortexBlobs blobs;
  blobs.positions = {Cx(3, 1), Cx(-2, -2), Cx(0, 2.5)};
  blobs.strengths = {1.0, -0.6, 0.3};
  blobs.core = 0.05;
  StreamDecomposition d = make_decomp(maps, approx, blobs, {1.0}, {1.7});
  double max_normal = 0.0, max_speed = 0.0;
  for (std::size_t i = 0; i < curve.size(); i += 3) {
    const Cx u = velocity_unchecked(d, blobs, curve.points[i]);
    const Cx nv = curve.outward_normal(i);
    max_normal = std::max(max_normal, std::abs(u.real() * nv.real() + u.imag() * nv.imag()));
    max_speed = std::max(max_speed, std::abs(u));
  }
  CHECK(max_normal <= 1e-3 * max_speed);
}

TEST_CASE("single-obstacle velocity agrees with the mapped image system") {
  // Dual route: point vortices in the disk plane (blob at w_j, image -Gamma
  // at w_j*, +Gamma at 0 for the zero-circulation gauge), pulled back by
  // u(x) = u_w(T(x)) * conj(T'(x)).
  const JordanCurve curve = JordanCurve::ellipse(Cx(0, 0), 1.5, 0.9);
  const DomainApproximation approx({curve});
  auto maps = fit_maps({curve});
  const ExteriorMap& map = maps->front();
  VortexBlobs blobs;
  blobs.positions = {Cx(2.5, 0.5), Cx(-1, 1.8)};
  blobs.strengths = {1.2, -0.4};
  blobs.core = 1e-9;
  const double total = blobs.total_strength();
  StreamDecomposition d = make_decomp(maps, approx, blobs, {0.0}, {total});

  VortexBlobs wplane;
  wplane.core = 1e-12;
  for (std::size_t j = 0; j < blobs.size(); ++j) {
    const Cx w = map.evaluate(blobs.positions[j]);
    wplane.positions.push_back(w);
    wplane.strengths.push_back(blobs.strengths[j]);
    wplane.positions.push_back(w / abs2(w));
    wplane.strengths.push_back(-blobs.strengths[j]);
  }
  wplane.positions.push_back(Cx(0, 0));
  wplane.strengths.push_back(total);

  for (const Cx x : {Cx(3, 2), Cx(-2.5, 0.3), Cx(0.4, 1.4), Cx(5, -4)}) {
    const Cx route_a = velocity(d, blobs, x);
    const Cx route_b =
        fullplane_biot_savart(wplane, map.evaluate(x)) * std::conj(map.derivative(x));
    CHECK(std::abs(route_a - route_b) < 1e-8 * std::max(1.0, std::abs(route_a)));
  }
}

TEST_CASE("full-plane Biot-Savart") {
  SUBCASE("unit point vortex") {
    VortexBlobs blobs;
    blobs.positions = {Cx(0, 0)};
    blobs.strengths = {kTwoPi};
    blobs.core = 0.05;
    const Cx u = fullplane_biot_savart(blobs, Cx(1, 0));
    CHECK(u.real() == doctest::Approx(0.0));
    CHECK(u.imag() == doctest::Approx(1.0));
  }
  SUBCASE("vortex pair advects itself at Gamma/(2 pi d)") {
    VortexBlobs blobs;
    blobs.positions = {Cx(0, 0.5), Cx(0, -0.5)};
    blobs.strengths = {kTwoPi, -kTwoPi};
    blobs.core = 0.05;
    const Cx u_top = fullplane_biot_savart(blobs, blobs.positions[0]);
    const Cx u_bot = fullplane_biot_savart(blobs, blobs.positions[1]);
    CHECK(std::abs(u_top - Cx(1, 0)) < 1e-14);
    CHECK(std::abs(u_bot - Cx(1, 0)) < 1e-14);
  }
  SUBCASE("far field looks like one vortex carrying the total strength") {
    VortexBlobs blobs;
    blobs.positions = {Cx(0.3, 0), Cx(-0.2, 0.4), Cx(0, -0.3)};
    blobs.strengths = {1.0, 0.7, -0.4};
    blobs.core = 0.05;
    const double total = blobs.total_strength();
    for (double r : {20.0, 40.0, 80.0}) {
      const Cx x(r, 0.3 * r);
      const Cx mono = total / (kTwoPi * abs2(x)) * perp(x);
      CHECK(std::abs(fullplane_biot_savart(blobs, x) - mono) < 2.0 / (r * r));
    }
  }
}

TEST_CASE("velocity field is divergence free and irrotational away from blobs") {
  const JordanCurve curve = JordanCurve::ellipse(Cx(0, 0), 2.0, 1.0);
  const DomainApproximation approx({curve});
  auto maps = fit_maps({curve});
  VortexBlobs blobs;
  blobs.positions = {Cx(3, 1), Cx(0, -2.5)};
  blobs.strengths = {1.0, 0.8};
  blobs.core = 0.05;
  StreamDecomposition d = make_decomp(maps, approx, blobs, {1.0}, {2.8});

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> span(-5.0, 5.0);
  const double h = 1e-4;
  int tested = 0;
  while (tested < 20) {
    const Cx x(span(rng), span(rng));
    if (!approx.exterior_point(x)) continue;
    bool near_blob = false;
    for (const Cx& b : blobs.positions) near_blob = near_blob || std::abs(x - b) < 3 * blobs.core;
    if (near_blob) continue;
    ++tested;
    auto u = [&](Cx p) { return velocity_unchecked(d, blobs, p); };
    const double div = (u(x + Cx(h, 0)).real() - u(x - Cx(h, 0)).real() +
                        u(x + Cx(0, h)).imag() - u(x - Cx(0, h)).imag()) /
                       (2 * h);
    const double curl = (u(x + Cx(h, 0)).imag() - u(x - Cx(h, 0)).imag() -
                         u(x + Cx(0, h)).real() + u(x - Cx(0, h)).real()) /
                        (2 * h);
    const double speed = std::abs(u(x));
    CHECK(std::abs(div) <= 1e-5 * std::max(speed, 0.1) / h);
    CHECK(std::abs(curl) <= 1e-5 * std::max(speed, 0.1) / h);
  }
}
