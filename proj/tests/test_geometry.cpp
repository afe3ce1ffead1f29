#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "exflow/geometry.hpp"

using namespace exflow;

namespace {
std::vector<Cx> circle_pts(Cx c, double r, int m) {
  std::vector<Cx> pts;
  for (int i = 0; i < m; ++i) {
    const double th = kTwoPi * i / m;
    pts.push_back(c + r * Cx(std::cos(th), std::sin(th)));
  }
  return pts;
}
}  // namespace

TEST_CASE("disk approximant is the dilated circle") {
  const auto disk = SingularObstacle::disk(Cx(0, 0), 1.0);
  const JordanCurve c = approximation_sequence(disk, 8);
  for (const Cx& p : c.points) CHECK(std::abs(p) == doctest::Approx(1.0 + 1.0 / 8).epsilon(1e-12));
  CHECK(c.signed_area() > 0.0);
  CHECK(c.n_index == 8);
}

TEST_CASE("segment approximant sits at offset 1/n") {
  const auto seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
  for (int n : {8, 16}) {
    const JordanCurve c = approximation_sequence(seg, n);
    const double d = hausdorff_distance(c.points, seg.samples);
    CHECK(d == doctest::Approx(1.0 / n).epsilon(0.10));
    for (const Cx& p : seg.samples) CHECK(c.contains(p));
  }
}

TEST_CASE("approximants are nested across n") {
  const auto seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
  const JordanCurve outer = approximation_sequence(seg, 8);
  const JordanCurve inner = approximation_sequence(seg, 9);
  for (const Cx& p : inner.points) CHECK(outer.contains(p));

  const auto koch = SingularObstacle::koch_flake(Cx(0, 0), 1.0, 3);
  const JordanCurve kouter = approximation_sequence(koch, 6);
  const JordanCurve kinner = approximation_sequence(koch, 7);
  for (const Cx& p : kinner.points) CHECK(kouter.contains(p));
}

TEST_CASE("koch flake approximants converge in Hausdorff distance") {
  // the flake perimeter is long; sample the curves densely enough that the
  // measured distance reflects the offset, not the curve resolution
  const auto koch = SingularObstacle::koch_flake(Cx(0, 0), 1.0, 3);
  const double d10 =
      hausdorff_distance(approximation_sequence(koch, 10, 1024).points, koch.samples);
  const double d100 =
      hausdorff_distance(approximation_sequence(koch, 100, 2048).points, koch.samples);
  CHECK(d10 > d100);
  CHECK(d100 < 0.02);
}

TEST_CASE("compact sets away from the obstacle end up exterior to the curves") {
  const auto seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
  for (int n : {4, 8, 16}) {
    const JordanCurve c = approximation_sequence(seg, n);
    for (const Cx& p : circle_pts(Cx(0, 0), 3.0, 32)) CHECK(!c.contains(p));
  }
}

TEST_CASE("degenerate obstacles are rejected") {
  CHECK_THROWS_WITH_AS(SingularObstacle::segment(Cx(1, 1), Cx(1, 1)),
                       "obstacle reduced to a point", std::invalid_argument);
  CHECK_THROWS_AS(SingularObstacle::point_cloud({Cx(2, 2), Cx(2, 2), Cx(2, 2)}),
                  std::invalid_argument);
  const auto disk = SingularObstacle::disk(Cx(0, 0), 1.0);
  CHECK_THROWS_AS(approximation_sequence(disk, 0), std::invalid_argument);
}

TEST_CASE("hausdorff distance basics") {
  const auto a = circle_pts(Cx(0, 0), 1.0, 720);
  CHECK(hausdorff_distance(a, a) == 0.0);

  const auto b = circle_pts(Cx(0, 0), 1.25, 720);
  CHECK(hausdorff_distance(a, b) == doctest::Approx(0.25).epsilon(1e-3));

  CHECK_THROWS_AS(hausdorff_distance({}, a), std::invalid_argument);
}

TEST_CASE("hausdorff distance of square boundary vs circle") {
  // Unit square (side 1) boundary vs unit circle, both centered: the farthest
  // mismatch is a side midpoint at distance 1 - 1/2 from the circle.
  std::vector<Cx> square;
  for (int i = 0; i < 400; ++i) {
    const double t = 4.0 * i / 400;
    Cx p;
    if (t < 1)
      p = Cx(-0.5 + t, -0.5);
    else if (t < 2)
      p = Cx(0.5, -0.5 + (t - 1));
    else if (t < 3)
      p = Cx(0.5 - (t - 2), 0.5);
    else
      p = Cx(-0.5, 0.5 - (t - 3));
    square.push_back(p);
  }
  const auto circle = circle_pts(Cx(0, 0), 1.0, 720);
  CHECK(hausdorff_distance(square, circle) == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("hausdorff distance satisfies the triangle inequality") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  std::uniform_int_distribution<int> count(3, 40);
  auto random_set = [&]() {
    std::vector<Cx> pts(count(rng));
    for (Cx& p : pts) p = Cx(coord(rng), coord(rng));
    return pts;
  };
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_set(), b = random_set(), c = random_set();
    const double ab = hausdorff_distance(a, b);
    const double bc = hausdorff_distance(b, c);
    const double ac = hausdorff_distance(a, c);
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab == doctest::Approx(hausdorff_distance(b, a)));
  }
}

TEST_CASE("capacity estimate trends") {
  SUBCASE("shrinking disks head to zero capacity") {
    const double c1 = capacity_estimate(SingularObstacle::disk(Cx(0, 0), 0.2), 1.0, 0.05);
    const double c2 = capacity_estimate(SingularObstacle::disk(Cx(0, 0), 0.05), 1.0, 0.0125);
    CHECK(c1 > c2);
    CHECK(c2 > 0.0);
  }
  SUBCASE("segment capacity is bounded away from zero under refinement") {
    const auto seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
    const double c1 = capacity_estimate(seg, 2.0, 0.08);
    const double c2 = capacity_estimate(seg, 2.0, 0.04);
    CHECK(c1 > 1.0);
    CHECK(c2 > 1.0);
    CHECK(c2 <= c1 * 1.02);  // refinement does not inflate the surrogate
  }
  SUBCASE("monotone in the set at fixed grid") {
    const double small = capacity_estimate(SingularObstacle::disk(Cx(0, 0), 0.5), 2.0, 0.05);
    const double large = capacity_estimate(SingularObstacle::disk(Cx(0, 0), 1.0), 2.0, 0.05);
    CHECK(small <= large);
    CHECK(small >= 0.0);
  }
  SUBCASE("coarse grid is rejected") {
    CHECK_THROWS_WITH_AS(capacity_estimate(SingularObstacle::disk(Cx(0, 0), 0.5), 1.0, 1.0),
                         "grid too coarse", std::invalid_argument);
  }
}

TEST_CASE("cutoff fields") {
  const auto left = SingularObstacle::disk(Cx(-3, 0), 1.0, 0);
  const auto right = SingularObstacle::disk(Cx(3, 0), 1.0, 1);
  const std::vector<SingularObstacle> all = {left, right};
  const Cutoff chi(left, 0.5, all);

  SUBCASE("one on its own obstacle, zero on the other") {
    for (const Cx& p : left.samples) CHECK(chi(p) == 1.0);
    for (const Cx& p : right.samples) CHECK(chi(p) == 0.0);
  }
  SUBCASE("monotone radial profile") {
    double prev = 1.0;
    for (double d = 0.5; d <= 1.0; d += 0.01) {
      const double v = chi(Cx(-3 + 1.0 + d, 0));
      CHECK(v <= prev + 1e-12);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      prev = v;
    }
    CHECK(chi(Cx(-3 + 1.5, 0)) == 1.0);
    CHECK(chi(Cx(-3 + 2.001, 0)) == 0.0);
  }
  SUBCASE("overlapping cutoffs are rejected") {
    CHECK_THROWS_WITH_AS(Cutoff(left, 2.1, all), "cutoffs overlap", std::invalid_argument);
  }
}

TEST_CASE("jordan curve invariants") {
  auto pts = circle_pts(Cx(0, 0), 1.0, 64);
  std::reverse(pts.begin(), pts.end());  // clockwise input
  const JordanCurve c(pts);
  CHECK(c.signed_area() > 0.0);  // normalized to counterclockwise
  CHECK(c.contains(Cx(0, 0)));
  CHECK(!c.contains(Cx(2, 0)));
  CHECK(std::abs(c.centroid()) < 1e-12);

  // bowtie with a proper self-crossing and nonzero net area
  const std::vector<Cx> corners = {Cx(0, 0), Cx(3.1, 1), Cx(3, 0), Cx(0, 2)};
  std::vector<Cx> bowtie;
  for (int e = 0; e < 4; ++e)
    for (int s = 0; s < 3; ++s)
      bowtie.push_back(corners[e] + (s / 3.0) * (corners[(e + 1) % 4] - corners[e]));
  CHECK_THROWS_WITH_AS(JordanCurve{bowtie}, "curve is not simple (self-intersection)",
                       std::invalid_argument);
}

TEST_CASE("domain approximation validates disjointness") {
  std::vector<JordanCurve> ok = {JordanCurve::circle(Cx(-3, 0), 1.0),
                                 JordanCurve::circle(Cx(3, 0), 1.0)};
  const DomainApproximation approx(std::move(ok));
  CHECK(approx.pairwise_separation == doctest::Approx(4.0).epsilon(1e-3));
  CHECK(approx.exterior_point(Cx(0, 0)));
  CHECK(!approx.exterior_point(Cx(3, 0)));

  std::vector<JordanCurve> nested = {JordanCurve::circle(Cx(0, 0), 1.0),
                                     JordanCurve::circle(Cx(0, 0), 2.0)};
  CHECK_THROWS_AS(DomainApproximation(std::move(nested)), std::invalid_argument);
}
