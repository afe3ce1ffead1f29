#include <doctest.h>

#include <cmath>
#include <random>

#include "exflow/conformal.hpp"

using namespace exflow;

namespace {

double contour_circulation(const std::function<Cx(Cx)>& grad_psi, Cx center, double radius,
                           int m = 512) {
  // trapezoid rule for the circulation of grad-perp psi along a circle
  double circ = 0.0;
  for (int i = 0; i < m; ++i) {
    const double th = kTwoPi * i / m;
    const Cx x = center + radius * Cx(std::cos(th), std::sin(th));
    const Cx tangent(-std::sin(th), std::cos(th));
    const Cx u = perp(grad_psi(x));
    circ += (u.real() * tangent.real() + u.imag() * tangent.imag());
  }
  return circ * radius * kTwoPi / m;
}

}  // namespace

TEST_CASE("unit circle fits to the identity map") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  CHECK(map.beta() == doctest::Approx(1.0).epsilon(1e-12));
  for (const Cx& c : map.coeffs()) CHECK(std::abs(c) < 1e-12);
  const Cx t = map.evaluate(Cx(3, 0));
  CHECK(t.real() == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(std::abs(t.imag()) < 1e-12);
}

TEST_CASE("radius-2 circle fits to the dilation z/2") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 2.0));
  CHECK(map.beta() == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(std::abs(map.derivative(Cx(3, 1)) - Cx(0.5, 0)) < 1e-10);
  CHECK(std::abs(map.derivative(Cx(-5, 2)) - Cx(0.5, 0)) < 1e-10);
}

TEST_CASE("ellipse map matches the Joukowski closed form") {
  const double a = 2.0, b = 1.0;
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::ellipse(Cx(0, 0), a, b), 64, 1e-8);
  CHECK(map.beta() == doctest::Approx(2.0 / (a + b)).epsilon(1e-6));

  SUBCASE("round trip through the closed-form inverse on |w| = 1.5") {
    for (int i = 0; i < 32; ++i) {
      const double th = kTwoPi * i / 32;
      const Cx w = 1.5 * Cx(std::cos(th), std::sin(th));
      const Cx z = ellipse_exterior_map_inverse(w, a, b);
      CHECK(std::abs(map.evaluate(z) - w) < 1e-8);
    }
  }
  SUBCASE("map_inverse at w = (2, 0) gives the Joukowski point") {
    const Cx z = map.inverse(Cx(2, 0));
    CHECK(z.real() == doctest::Approx(3.25).epsilon(1e-8));
    CHECK(std::abs(z.imag()) < 1e-8);
  }
  SUBCASE("values agree with the closed form off the boundary") {
    for (int i = 0; i < 16; ++i) {
      const double th = kTwoPi * (i + 0.3) / 16;
      const Cx z = Cx(3.0 * std::cos(th), 2.5 * std::sin(th));
      CHECK(std::abs(map.evaluate(z) - ellipse_exterior_map(z, a, b)) < 1e-7);
      CHECK(std::abs(map.derivative(z) - ellipse_exterior_map_derivative(z, a, b)) < 1e-6);
    }
  }
}

TEST_CASE("boundary modulus on fresh samples stays near one") {
  const double a = 2.0, b = 1.0;
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::ellipse(Cx(0, 0), a, b), 64, 1e-8);
  double worst = 0.0;
  for (int i = 0; i < 999; ++i) {
    const double th = kTwoPi * (i + 0.5) / 999;
    const Cx z(a * std::cos(th), b * std::sin(th));
    worst = std::max(worst, std::abs(std::abs(map.evaluate(z)) - 1.0));
  }
  CHECK(worst <= 10.0 * std::max(map.residual(), 1e-15));
}

TEST_CASE("inverse composed with evaluate is the identity") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::ellipse(Cx(0.5, -0.25), 1.5, 0.8));
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> angle(0.0, kTwoPi), rad(2.0, 6.0);
  for (int i = 0; i < 40; ++i) {
    const double th = angle(rng);
    const Cx z = Cx(0.5, -0.25) + rad(rng) * Cx(std::cos(th), std::sin(th));
    CHECK(std::abs(map.inverse(map.evaluate(z)) - z) < 1e-10);
  }
}

TEST_CASE("unit circulation of the harmonic log around the curve") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::ellipse(Cx(0, 0), 2.0, 1.0));
  auto grad = [&](Cx x) { return std::conj(map.derivative(x) / map.evaluate(x)) / kTwoPi; };
  CHECK(contour_circulation(grad, Cx(0, 0), 3.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("inversion map") {
  CHECK(inversion(Cx(2, 0)) == Cx(0.5, 0));
  for (int i = 0; i < 8; ++i) {
    const double th = kTwoPi * i / 8;
    const Cx z(std::cos(th), std::sin(th));
    CHECK(std::abs(inversion(z) - z) < 1e-15);
  }
  CHECK(std::abs(inversion(inversion(Cx(0.3, -0.4))) - Cx(0.3, -0.4)) < 1e-15);
  CHECK_THROWS_AS(inversion(Cx(0, 0)), std::invalid_argument);
}

TEST_CASE("caratheodory deviations for shrinking circles") {
  std::vector<ExteriorMap> maps;
  std::vector<std::pair<int, const ExteriorMap*>> seq;
  const std::vector<int> ns = {4, 8, 16, 32};
  for (int n : ns) maps.push_back(ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0 + 1.0 / n)));
  for (std::size_t i = 0; i < ns.size(); ++i) seq.emplace_back(ns[i], &maps[i]);

  std::vector<Cx> k_pts;
  for (int i = 0; i < 64; ++i) {
    const double th = kTwoPi * i / 64;
    k_pts.push_back(2.0 * Cx(std::cos(th), std::sin(th)));
  }
  const auto rows = caratheodory_check(
      seq, [](Cx z) { return z; }, [](Cx) { return Cx(1, 0); }, k_pts);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // closed form: T_n(z) = z / (1 + 1/n), so sup deviation on |x| = 2 is 2/(n+1)
    CHECK(rows[i].sup_map == doctest::Approx(2.0 / (ns[i] + 1)).epsilon(1e-6));
    if (i > 0) CHECK(rows[i].sup_map < rows[i - 1].sup_map);
  }
}

TEST_CASE("caratheodory deviations vanish for a constant sequence") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
  std::vector<std::pair<int, const ExteriorMap*>> seq = {{1, &map}, {2, &map}};
  std::vector<Cx> k_pts = {Cx(2, 0), Cx(0, 3), Cx(-2, 1)};
  const auto rows = caratheodory_check(
      seq, [&](Cx z) { return map.evaluate(z); }, [&](Cx z) { return map.derivative(z); }, k_pts);
  for (const auto& r : rows) {
    CHECK(r.sup_map == 0.0);
    CHECK(r.sup_derivative == 0.0);
  }
}

TEST_CASE("caratheodory: flat ellipses approach the segment map") {
  std::vector<ExteriorMap> maps;
  std::vector<std::pair<int, const ExteriorMap*>> seq;
  const std::vector<int> ns = {4, 8, 16, 32};
  for (int n : ns)
    maps.push_back(ExteriorMap::fit(JordanCurve::ellipse(Cx(0, 0), 1.0, 1.0 / n), 64, 1e-4));
  for (std::size_t i = 0; i < ns.size(); ++i) seq.emplace_back(ns[i], &maps[i]);

  std::vector<Cx> k_pts;
  for (int i = 0; i < 48; ++i) {
    const double th = kTwoPi * i / 48;
    k_pts.push_back(2.0 * Cx(std::cos(th), std::sin(th)));
  }
  const auto rows =
      caratheodory_check(seq, segment_exterior_map, segment_exterior_map_derivative, k_pts);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].sup_map < rows[i - 1].sup_map);
  // dominant deviation term is |T|/n from the 1/(a+b) normalization: ~3.7/32
  CHECK(rows.back().sup_map < 0.15);

  std::vector<Cx> bad = {Cx(0.5, 0.0)};  // inside every approximant
  CHECK_THROWS_AS(
      caratheodory_check(seq, segment_exterior_map, segment_exterior_map_derivative, bad),
      std::invalid_argument);
}

TEST_CASE("fit validates its inputs") {
  SUBCASE("too few collocation points") {
    CHECK_THROWS_AS(ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0, 64), 64),
                    std::invalid_argument);
  }
  SUBCASE("inverse requires |w| > 1") {
    const ExteriorMap map = ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0));
    CHECK_THROWS_AS(map.inverse(Cx(0.5, 0)), std::invalid_argument);
  }
}

TEST_CASE("map serialization round trip") {
  const ExteriorMap map = ExteriorMap::fit(JordanCurve::ellipse(Cx(0.3, 0.1), 2.0, 0.9));
  const ExteriorMap back = ExteriorMap::from_json(map.to_json());
  CHECK(back.beta() == doctest::Approx(map.beta()).epsilon(1e-14));
  for (const Cx z : {Cx(3, 1), Cx(-2, 2), Cx(0.3, 4)}) {
    CHECK(std::abs(back.evaluate(z) - map.evaluate(z)) < 1e-14);
    CHECK(std::abs(back.derivative(z) - map.derivative(z)) < 1e-14);
  }
}
