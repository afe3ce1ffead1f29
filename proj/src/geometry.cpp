#include "exflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace exflow {

namespace {

double dist_point_segment(Cx x, Cx a, Cx b) {
  const Cx ab = b - a;
  const double len2 = abs2(ab);
  if (len2 == 0.0) return std::abs(x - a);
  double t = ((x.real() - a.real()) * ab.real() + (x.imag() - a.imag()) * ab.imag()) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(x - (a + t * ab));
}

Cx closest_on_segment(Cx x, Cx a, Cx b) {
  const Cx ab = b - a;
  const double len2 = abs2(ab);
  if (len2 == 0.0) return a;
  double t = ((x.real() - a.real()) * ab.real() + (x.imag() - a.imag()) * ab.imag()) / len2;
  return a + std::clamp(t, 0.0, 1.0) * ab;
}

bool point_in_polygon(Cx x, const std::vector<Cx>& poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Cx pi = poly[i], pj = poly[j];
    if ((pi.imag() > x.imag()) != (pj.imag() > x.imag())) {
      const double xc =
          pj.real() + (x.imag() - pj.imag()) / (pi.imag() - pj.imag()) * (pi.real() - pj.real());
      if (x.real() < xc) inside = !inside;
    }
  }
  return inside;
}

std::vector<Cx> densify_chain(const std::vector<Cx>& verts, bool closed, int target) {
  double total = 0.0;
  const std::size_t n = verts.size();
  const std::size_t nseg = closed ? n : n - 1;
  for (std::size_t i = 0; i < nseg; ++i) total += std::abs(verts[(i + 1) % n] - verts[i]);
  std::vector<Cx> out;
  out.reserve(target + n);
  for (std::size_t i = 0; i < nseg; ++i) {
    const Cx a = verts[i], b = verts[(i + 1) % n];
    const double len = std::abs(b - a);
    const int k = std::max(1, static_cast<int>(std::ceil(len / total * target)));
    for (int s = 0; s < k; ++s) out.push_back(a + (static_cast<double>(s) / k) * (b - a));
  }
  if (!closed) out.push_back(verts.back());
  return out;
}

// Distance to a polyline chain (nearest over segments).
double dist_chain(Cx x, const std::vector<Cx>& verts, bool closed) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = verts.size();
  const std::size_t nseg = closed ? n : n - 1;
  for (std::size_t i = 0; i < nseg; ++i)
    best = std::min(best, dist_point_segment(x, verts[i], verts[(i + 1) % n]));
  return best;
}

Cx closest_on_chain(Cx x, const std::vector<Cx>& verts, bool closed) {
  double best = std::numeric_limits<double>::infinity();
  Cx bestp = verts[0];
  const std::size_t n = verts.size();
  const std::size_t nseg = closed ? n : n - 1;
  for (std::size_t i = 0; i < nseg; ++i) {
    const Cx p = closest_on_segment(x, verts[i], verts[(i + 1) % n]);
    const double d = std::abs(x - p);
    if (d < best) {
      best = d;
      bestp = p;
    }
  }
  return bestp;
}

}  // namespace

// ---------------------------------------------------------------------------
// SingularObstacle

SingularObstacle SingularObstacle::segment(Cx a, Cx b, int id, int npts) {
  if (std::abs(b - a) == 0.0) throw std::invalid_argument("obstacle reduced to a point");
  SingularObstacle o;
  o.kind = ObstacleKind::kSegment;
  o.id = id;
  o.vertices = {a, b};
  o.samples = densify_chain(o.vertices, false, npts);
  return o;
}

SingularObstacle SingularObstacle::polyline(std::vector<Cx> verts, int id, int npts) {
  if (verts.size() < 2) throw std::invalid_argument("polyline needs at least two vertices");
  SingularObstacle o;
  o.kind = ObstacleKind::kPolyline;
  o.id = id;
  o.vertices = std::move(verts);
  o.samples = densify_chain(o.vertices, false, npts);
  if (o.diameter() == 0.0) throw std::invalid_argument("obstacle reduced to a point");
  return o;
}

SingularObstacle SingularObstacle::koch_flake(Cx center, double scale, int level, int id) {
  if (scale <= 0.0) throw std::invalid_argument("koch flake scale must be positive");
  if (level < 0 || level > 6) throw std::invalid_argument("koch flake level out of range");
  // Equilateral triangle, bumps grown outward each generation.
  std::vector<Cx> poly;
  for (int k = 0; k < 3; ++k) {
    const double th = kPi / 2.0 + kTwoPi * k / 3.0;
    poly.push_back(center + scale * Cx(std::cos(th), std::sin(th)));
  }
  // Triangle above is counterclockwise; outward bump is on the right of each
  // directed edge.
  for (int g = 0; g < level; ++g) {
    std::vector<Cx> next;
    next.reserve(poly.size() * 4);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Cx a = poly[i], b = poly[(i + 1) % poly.size()];
      const Cx d = (b - a) / 3.0;
      const Cx p1 = a + d, p2 = a + 2.0 * d;
      const Cx tip = p1 + d * Cx(std::cos(-kPi / 3.0), std::sin(-kPi / 3.0));
      next.push_back(a);
      next.push_back(p1);
      next.push_back(tip);
      next.push_back(p2);
    }
    poly = std::move(next);
  }
  SingularObstacle o;
  o.kind = ObstacleKind::kKochFlake;
  o.id = id;
  o.center = center;
  o.radius = scale;
  o.vertices = std::move(poly);
  o.samples = densify_chain(o.vertices, true, std::max<int>(1200, 2 * o.vertices.size()));
  return o;
}

SingularObstacle SingularObstacle::disk(Cx center, double radius, int id, int npts) {
  if (radius <= 0.0) throw std::invalid_argument("obstacle reduced to a point");
  SingularObstacle o;
  o.kind = ObstacleKind::kDisk;
  o.id = id;
  o.center = center;
  o.radius = radius;
  o.samples.reserve(npts);
  for (int i = 0; i < npts; ++i) {
    const double th = kTwoPi * i / npts;
    o.samples.push_back(center + radius * Cx(std::cos(th), std::sin(th)));
  }
  return o;
}

SingularObstacle SingularObstacle::ellipse(Cx center, double a, double b, int id, int npts) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("obstacle reduced to a point");
  SingularObstacle o;
  o.kind = ObstacleKind::kEllipse;
  o.id = id;
  o.center = center;
  o.semi_a = a;
  o.semi_b = b;
  o.samples.reserve(npts);
  for (int i = 0; i < npts; ++i) {
    const double th = kTwoPi * i / npts;
    o.samples.push_back(center + Cx(a * std::cos(th), b * std::sin(th)));
  }
  return o;
}

SingularObstacle SingularObstacle::point_cloud(std::vector<Cx> pts, int id) {
  if (pts.empty()) throw std::invalid_argument("empty point cloud");
  SingularObstacle o;
  o.kind = ObstacleKind::kPointCloud;
  o.id = id;
  o.samples = std::move(pts);
  if (o.diameter() == 0.0) throw std::invalid_argument("obstacle reduced to a point");
  return o;
}

double SingularObstacle::distance(Cx x) const {
  switch (kind) {
    case ObstacleKind::kDisk:
      return std::max(0.0, std::abs(x - center) - radius);
    case ObstacleKind::kEllipse: {
      const Cx r = x - center;
      if (sq(r.real() / semi_a) + sq(r.imag() / semi_b) <= 1.0) return 0.0;
      return dist_chain(x, samples, true);
    }
    case ObstacleKind::kKochFlake:
      if (point_in_polygon(x, vertices)) return 0.0;
      return dist_chain(x, vertices, true);
    case ObstacleKind::kSegment:
    case ObstacleKind::kPolyline:
      return dist_chain(x, vertices, false);
    case ObstacleKind::kPointCloud: {
      double best = std::numeric_limits<double>::infinity();
      for (const Cx& p : samples) best = std::min(best, std::abs(x - p));
      return best;
    }
  }
  return 0.0;
}

Cx SingularObstacle::distance_direction(Cx x) const {
  Cx nearest;
  switch (kind) {
    case ObstacleKind::kDisk: {
      const Cx r = x - center;
      const double rr = std::abs(r);
      if (rr <= radius || rr == 0.0) return Cx(0, 0);
      return r / rr;
    }
    case ObstacleKind::kEllipse: {
      const Cx r = x - center;
      if (sq(r.real() / semi_a) + sq(r.imag() / semi_b) <= 1.0) return Cx(0, 0);
      nearest = closest_on_chain(x, samples, true);
      break;
    }
    case ObstacleKind::kKochFlake:
      if (point_in_polygon(x, vertices)) return Cx(0, 0);
      nearest = closest_on_chain(x, vertices, true);
      break;
    case ObstacleKind::kSegment:
    case ObstacleKind::kPolyline:
      nearest = closest_on_chain(x, vertices, false);
      break;
    case ObstacleKind::kPointCloud: {
      double best = std::numeric_limits<double>::infinity();
      nearest = samples[0];
      for (const Cx& p : samples) {
        const double d = std::abs(x - p);
        if (d < best) {
          best = d;
          nearest = p;
        }
      }
      break;
    }
  }
  const Cx r = x - nearest;
  const double rr = std::abs(r);
  return rr > 0.0 ? r / rr : Cx(0, 0);
}

bool SingularObstacle::contains_within(Cx x, double tol) const { return distance(x) <= tol; }

double SingularObstacle::diameter() const {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : samples) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  return std::hypot(hi_x - lo_x, hi_y - lo_y);
}

// ---------------------------------------------------------------------------
// JordanCurve

namespace {

bool segments_intersect(Cx a, Cx b, Cx c, Cx d) {
  auto cross = [](Cx u, Cx v) { return u.real() * v.imag() - u.imag() * v.real(); };
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

}  // namespace

JordanCurve::JordanCurve(std::vector<Cx> pts, int owner_, int n_index_)
    : points(std::move(pts)), owner(owner_), n_index(n_index_) {
  if (points.size() < 8) throw std::invalid_argument("curve needs at least 8 samples");
  if (std::abs(signed_area()) < 1e-14)
    throw std::invalid_argument("degenerate curve (zero enclosed area)");
  if (signed_area() < 0.0) std::reverse(points.begin(), points.end());
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : points) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  bbox_lo = Cx(lo_x, lo_y);
  bbox_hi = Cx(hi_x, hi_y);
  // Simplicity at sample resolution: no duplicate samples, no crossing
  // between non-adjacent edges.
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (points[i] == points[j])
        throw std::invalid_argument("curve is not simple (self-intersection)");
      if (j >= i + 2 && !(i == 0 && j == n - 1) &&
          segments_intersect(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n]))
        throw std::invalid_argument("curve is not simple (self-intersection)");
    }
  }
}

double JordanCurve::signed_area() const {
  double s = 0.0;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Cx a = points[i], b = points[(i + 1) % n];
    s += a.real() * b.imag() - b.real() * a.imag();
  }
  return 0.5 * s;
}

Cx JordanCurve::centroid() const {
  // Area centroid of the enclosed region.
  double a6 = 0.0;
  Cx c(0, 0);
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Cx p = points[i], q = points[(i + 1) % n];
    const double w = p.real() * q.imag() - q.real() * p.imag();
    a6 += w;
    c += w * (p + q);
  }
  return c / (3.0 * a6);
}

double JordanCurve::length() const {
  double s = 0.0;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) s += std::abs(points[(i + 1) % n] - points[i]);
  return s;
}

bool JordanCurve::contains(Cx x) const {
  if (x.real() < bbox_lo.real() || x.real() > bbox_hi.real() || x.imag() < bbox_lo.imag() ||
      x.imag() > bbox_hi.imag())
    return false;
  return point_in_polygon(x, points);
}

Cx JordanCurve::outward_normal(std::size_t i) const {
  const std::size_t n = points.size();
  const Cx t = points[(i + 1) % n] - points[(i + n - 1) % n];
  const Cx nv = -perp(t);  // CCW curve: outward normal is tangent rotated -90
  const double len = std::abs(nv);
  return len > 0 ? nv / len : Cx(0, 0);
}

double JordanCurve::arclength_weight(std::size_t i) const {
  const std::size_t n = points.size();
  return 0.5 * std::abs(points[(i + 1) % n] - points[(i + n - 1) % n]);
}

JordanCurve JordanCurve::circle(Cx c, double r, int m) {
  std::vector<Cx> pts;
  pts.reserve(m);
  for (int i = 0; i < m; ++i) {
    const double th = kTwoPi * i / m;
    pts.push_back(c + r * Cx(std::cos(th), std::sin(th)));
  }
  return JordanCurve(std::move(pts));
}

JordanCurve JordanCurve::ellipse(Cx c, double a, double b, int m) {
  // Arclength-uniform samples; uniform angle would crowd flat ellipses.
  const int fine = 8192;
  std::vector<double> cum(fine + 1, 0.0);
  auto pt = [&](double th) { return Cx(a * std::cos(th), b * std::sin(th)); };
  for (int i = 0; i < fine; ++i)
    cum[i + 1] = cum[i] + std::abs(pt(kTwoPi * (i + 1) / fine) - pt(kTwoPi * i / fine));
  std::vector<Cx> pts;
  pts.reserve(m);
  int j = 0;
  for (int i = 0; i < m; ++i) {
    const double target = cum[fine] * i / m;
    while (j < fine && cum[j + 1] < target) ++j;
    const double frac = (target - cum[j]) / std::max(1e-300, cum[j + 1] - cum[j]);
    const double th = kTwoPi * (j + frac) / fine;
    pts.push_back(c + pt(th));
  }
  return JordanCurve(std::move(pts));
}

// ---------------------------------------------------------------------------
// DomainApproximation

DomainApproximation::DomainApproximation(std::vector<JordanCurve> cs) : curves(std::move(cs)) {
  pairwise_separation = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    for (std::size_t j = i + 1; j < curves.size(); ++j) {
      if (curves[i].contains(curves[j].points[0]) || curves[j].contains(curves[i].points[0]))
        throw std::invalid_argument("approximant curves are nested, not disjoint");
      for (const Cx& p : curves[i].points)
        for (const Cx& q : curves[j].points)
          pairwise_separation = std::min(pairwise_separation, std::abs(p - q));
    }
  }
  if (curves.size() < 2) pairwise_separation = std::numeric_limits<double>::infinity();
  if (pairwise_separation <= 0.0)
    throw std::invalid_argument("approximant curves touch (zero separation)");
}

bool DomainApproximation::exterior_point(Cx x) const {
  for (const auto& c : curves)
    if (c.contains(x)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// approximation_sequence: level set of a log-sum-exp mollified distance.
//
// d_k(x) = -ln(sum_j exp(-k |x - p_j|)) / k underestimates the sample
// distance by at most ln(J)/k. With k_n ~ n^2 the level sets {d_k = 1/n} are
// smooth, contain the obstacle, and are strictly nested across n.

namespace {

// Uniform hash grid over a point set for nearest-neighbor and ball queries.
struct PointBins {
  double cell = 1.0;
  double x0 = 0.0, y0 = 0.0;
  int nx = 1, ny = 1;
  std::vector<std::vector<int>> bins;
  const std::vector<Cx>* pts = nullptr;

  explicit PointBins(const std::vector<Cx>& p, double cell_size) : cell(cell_size), pts(&p) {
    double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
    for (const Cx& q : p) {
      lo_x = std::min(lo_x, q.real());
      hi_x = std::max(hi_x, q.real());
      lo_y = std::min(lo_y, q.imag());
      hi_y = std::max(hi_y, q.imag());
    }
    x0 = lo_x;
    y0 = lo_y;
    nx = std::max(1, static_cast<int>((hi_x - lo_x) / cell) + 1);
    ny = std::max(1, static_cast<int>((hi_y - lo_y) / cell) + 1);
    bins.resize(static_cast<std::size_t>(nx) * ny);
    for (int i = 0; i < static_cast<int>(p.size()); ++i) {
      const int bx = std::clamp(static_cast<int>((p[i].real() - x0) / cell), 0, nx - 1);
      const int by = std::clamp(static_cast<int>((p[i].imag() - y0) / cell), 0, ny - 1);
      bins[static_cast<std::size_t>(by) * nx + bx].push_back(i);
    }
  }

  double nearest(Cx x) const {
    const int bx = std::clamp(static_cast<int>((x.real() - x0) / cell), 0, nx - 1);
    const int by = std::clamp(static_cast<int>((x.imag() - y0) / cell), 0, ny - 1);
    double best2 = std::numeric_limits<double>::infinity();
    const int rmax = std::max(nx, ny);
    for (int ring = 0; ring <= rmax; ++ring) {
      // Once a hit exists, one extra ring guarantees correctness.
      if (best2 < sq(cell * (ring - 1)) && ring > 1) break;
      for (int dy = -ring; dy <= ring; ++dy) {
        for (int dx = -ring; dx <= ring; ++dx) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          const int ix = bx + dx, iy = by + dy;
          if (ix < 0 || iy < 0 || ix >= nx || iy >= ny) continue;
          for (int i : bins[static_cast<std::size_t>(iy) * nx + ix])
            best2 = std::min(best2, abs2(x - (*pts)[i]));
        }
      }
    }
    return std::sqrt(best2);
  }

  template <class Fn>
  void for_ball(Cx x, double r, Fn&& fn) const {
    const int bx0 = std::clamp(static_cast<int>((x.real() - r - x0) / cell), 0, nx - 1);
    const int bx1 = std::clamp(static_cast<int>((x.real() + r - x0) / cell), 0, nx - 1);
    const int by0 = std::clamp(static_cast<int>((x.imag() - r - y0) / cell), 0, ny - 1);
    const int by1 = std::clamp(static_cast<int>((x.imag() + r - y0) / cell), 0, ny - 1);
    const double r2 = r * r;
    for (int iy = by0; iy <= by1; ++iy)
      for (int ix = bx0; ix <= bx1; ++ix)
        for (int i : bins[static_cast<std::size_t>(iy) * nx + ix])
          if (abs2(x - (*pts)[i]) <= r2) fn((*pts)[i]);
  }
};

struct LseField {
  const std::vector<Cx>* pts;
  double kappa;
  const PointBins* bins;

  double value(Cx x) const {
    const double dmin = bins->nearest(x);
    double s = 0.0;
    bins->for_ball(x, dmin + 40.0 / kappa, [&](Cx p) {
      s += std::exp(-kappa * (std::abs(x - p) - dmin));
    });
    return dmin - std::log(s) / kappa;
  }

  Cx gradient(Cx x) const {
    const double dmin = bins->nearest(x);
    double s = 0.0;
    Cx g(0, 0);
    bins->for_ball(x, dmin + 40.0 / kappa, [&](Cx p) {
      const double d = std::abs(x - p);
      const double w = std::exp(-kappa * (d - dmin));
      s += w;
      if (d > 0) g += (w / d) * (x - p);
    });
    return g / s;
  }
};

// Marching squares on f = level: returns the loop with the largest area.
std::vector<Cx> trace_level_loop(const LseField& f, double level, Cx lo, Cx hi, double g) {
  const int nx = static_cast<int>(std::ceil((hi.real() - lo.real()) / g)) + 1;
  const int ny = static_cast<int>(std::ceil((hi.imag() - lo.imag()) / g)) + 1;
  std::vector<double> val(static_cast<std::size_t>(nx) * ny);
  std::vector<Cx> node(static_cast<std::size_t>(nx) * ny);
  parallel_for(static_cast<std::size_t>(nx) * ny, [&](std::size_t b, std::size_t e) {
    for (std::size_t q = b; q < e; ++q) {
      const int i = static_cast<int>(q % nx), j = static_cast<int>(q / nx);
      const Cx x(lo.real() + i * g, lo.imag() + j * g);
      node[q] = x;
      val[q] = f.value(x) - level;
    }
  });
  auto at = [&](int i, int j) { return val[static_cast<std::size_t>(j) * nx + i]; };
  auto pos = [&](int i, int j) { return node[static_cast<std::size_t>(j) * nx + i]; };

  // Edge key: (edge id) -> interpolated crossing point. Horizontal edges get
  // id 2*(j*nx+i), vertical 2*(j*nx+i)+1.
  auto hkey = [&](int i, int j) { return 2 * (static_cast<long>(j) * nx + i); };
  auto vkey = [&](int i, int j) { return 2 * (static_cast<long>(j) * nx + i) + 1; };
  std::map<long, Cx> cross;
  std::multimap<long, long> links;  // undirected segment graph on edge keys

  auto interp = [&](Cx a, Cx b, double fa, double fb) {
    const double t = fa / (fa - fb);
    return a + t * (b - a);
  };

  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      const double f00 = at(i, j), f10 = at(i + 1, j), f01 = at(i, j + 1), f11 = at(i + 1, j + 1);
      std::vector<long> keys;
      if ((f00 < 0) != (f10 < 0)) {
        cross[hkey(i, j)] = interp(pos(i, j), pos(i + 1, j), f00, f10);
        keys.push_back(hkey(i, j));
      }
      if ((f01 < 0) != (f11 < 0)) {
        cross[hkey(i, j + 1)] = interp(pos(i, j + 1), pos(i + 1, j + 1), f01, f11);
        keys.push_back(hkey(i, j + 1));
      }
      if ((f00 < 0) != (f01 < 0)) {
        cross[vkey(i, j)] = interp(pos(i, j), pos(i, j + 1), f00, f01);
        keys.push_back(vkey(i, j));
      }
      if ((f10 < 0) != (f11 < 0)) {
        cross[vkey(i + 1, j)] = interp(pos(i + 1, j), pos(i + 1, j + 1), f10, f11);
        keys.push_back(vkey(i + 1, j));
      }
      if (keys.size() == 2) {
        links.emplace(keys[0], keys[1]);
        links.emplace(keys[1], keys[0]);
      } else if (keys.size() == 4) {
        // Saddle cell: resolve by center value.
        const Cx c = 0.25 * (pos(i, j) + pos(i + 1, j) + pos(i, j + 1) + pos(i + 1, j + 1));
        const double fc = f.value(c) - level;
        // Pair edges so the negative region stays connected through the center.
        long h0 = hkey(i, j), h1 = hkey(i, j + 1), v0 = vkey(i, j), v1 = vkey(i + 1, j);
        if ((fc < 0) == (f00 < 0)) {
          links.emplace(h0, v1);
          links.emplace(v1, h0);
          links.emplace(h1, v0);
          links.emplace(v0, h1);
        } else {
          links.emplace(h0, v0);
          links.emplace(v0, h0);
          links.emplace(h1, v1);
          links.emplace(v1, h1);
        }
      }
    }
  }

  // Walk loops.
  std::map<long, bool> used;
  std::vector<Cx> best;
  double best_area = -1.0;
  for (const auto& [k0, v0] : links) {
    if (used[k0]) continue;
    std::vector<long> loop;
    long cur = k0, prev = -1;
    while (true) {
      loop.push_back(cur);
      used[cur] = true;
      auto range = links.equal_range(cur);
      long next = -1;
      for (auto it = range.first; it != range.second; ++it) {
        if (it->second != prev && !used[it->second]) {
          next = it->second;
          break;
        }
      }
      if (next == -1) {
        // closed if any neighbor is the start
        break;
      }
      prev = cur;
      cur = next;
    }
    if (loop.size() < 8) continue;
    std::vector<Cx> pts;
    pts.reserve(loop.size());
    for (long k : loop) pts.push_back(cross.at(k));
    double area = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Cx a = pts[i], b = pts[(i + 1) % pts.size()];
      area += a.real() * b.imag() - b.real() * a.imag();
    }
    area = std::abs(0.5 * area);
    if (area > best_area) {
      best_area = area;
      best = std::move(pts);
    }
  }
  if (best.empty()) throw std::runtime_error("level-set tracing found no closed contour");
  return best;
}

std::vector<Cx> resample_closed(const std::vector<Cx>& poly, int m) {
  const std::size_t n = poly.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + std::abs(poly[(i + 1) % n] - poly[i]);
  std::vector<Cx> out;
  out.reserve(m);
  std::size_t j = 0;
  for (int i = 0; i < m; ++i) {
    const double target = cum[n] * i / m;
    while (j + 1 < n + 1 && cum[j + 1] < target) ++j;
    const double frac = (target - cum[j]) / std::max(1e-300, cum[j + 1] - cum[j]);
    out.push_back(poly[j % n] + frac * (poly[(j + 1) % n] - poly[j % n]));
  }
  return out;
}

}  // namespace

JordanCurve approximation_sequence(const SingularObstacle& obstacle, int n, int m_points) {
  if (n < 1) throw std::invalid_argument("approximation index must be >= 1");
  if (obstacle.diameter() == 0.0) throw std::invalid_argument("obstacle reduced to a point");
  const double delta = 1.0 / n;

  // Analytic dilations for the round kinds (exact containment and nesting).
  if (obstacle.kind == ObstacleKind::kDisk) {
    return JordanCurve(JordanCurve::circle(obstacle.center, obstacle.radius + delta, m_points).points,
                       obstacle.id, n);
  }
  if (obstacle.kind == ObstacleKind::kEllipse) {
    return JordanCurve(
        JordanCurve::ellipse(obstacle.center, obstacle.semi_a + delta, obstacle.semi_b + delta, m_points)
            .points,
        obstacle.id, n);
  }

  const double kappa = 2.0 * std::log(static_cast<double>(obstacle.samples.size()) + 8.0) *
                       static_cast<double>(n) * static_cast<double>(n);
  const PointBins bins(obstacle.samples, std::max(delta, obstacle.diameter() / 64.0));
  LseField f{&obstacle.samples, kappa, &bins};

  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : obstacle.samples) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  const Cx lo(lo_x - 2.0 * delta, lo_y - 2.0 * delta);
  const Cx hi(hi_x + 2.0 * delta, hi_y + 2.0 * delta);
  const double g = delta / 6.0;

  std::vector<Cx> poly = trace_level_loop(f, delta, lo, hi, g);
  std::vector<Cx> pts = resample_closed(poly, m_points);

  // Project each sample onto the exact level set along the field gradient.
  for (Cx& x : pts) {
    for (int it = 0; it < 4; ++it) {
      const double v = f.value(x) - delta;
      if (std::abs(v) < 1e-13) break;
      const Cx gr = f.gradient(x);
      const double g2 = abs2(gr);
      if (g2 < 1e-12) break;
      x -= (v / g2) * gr;
    }
  }
  return JordanCurve(std::move(pts), obstacle.id, n);
}

// ---------------------------------------------------------------------------
// hausdorff_distance

double hausdorff_distance(const std::vector<Cx>& a, const std::vector<Cx>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("hausdorff_distance of empty set");
  auto one_sided = [](const std::vector<Cx>& u, const std::vector<Cx>& v) {
    double worst = 0.0;
    for (const Cx& p : u) {
      double best = std::numeric_limits<double>::infinity();
      for (const Cx& q : v) best = std::min(best, abs2(p - q));
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

// ---------------------------------------------------------------------------
// capacity_estimate: conjugate gradient on the grid quadratic form.

namespace {

// Matrix-free CG for (stiffness + h^2 mass) on masked nodes. cls: 0 free,
// 1 clamped to one, 2 clamped to zero.
struct CapacityGrid {
  int nx, ny;
  double h;
  std::vector<char> cls;

  double val(const std::vector<double>& v, int i, int j) const {
    if (i < 0 || j < 0 || i >= nx || j >= ny) return 0.0;
    const std::size_t q = static_cast<std::size_t>(j) * nx + i;
    if (cls[q] == 1) return 1.0;
    if (cls[q] == 2) return 0.0;
    return v[q];
  }

  void apply(const std::vector<double>& v, std::vector<double>& out, bool boundary_rhs) const {
    const double h2 = h * h;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t q = static_cast<std::size_t>(j) * nx + i;
        if (cls[q] != 0) {
          out[q] = 0.0;
          continue;
        }
        const double c = v[q];
        double acc = (h2 + 4.0) * c;
        if (boundary_rhs) {
          // RHS assembly: -A*g for the clamped data g.
          acc = 0.0;
          auto add = [&](int ii, int jj) {
            if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) return;
            const std::size_t r = static_cast<std::size_t>(jj) * nx + ii;
            if (cls[r] == 1) acc += 1.0;
          };
          add(i - 1, j);
          add(i + 1, j);
          add(i, j - 1);
          add(i, j + 1);
          out[q] = acc;
          continue;
        }
        auto sub = [&](int ii, int jj) {
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) {
            return;  // zero outside the box
          }
          const std::size_t r = static_cast<std::size_t>(jj) * nx + ii;
          if (cls[r] == 0) acc -= v[r];
        };
        sub(i - 1, j);
        sub(i + 1, j);
        sub(i, j - 1);
        sub(i, j + 1);
        out[q] = acc;
      }
    }
  }
};

}  // namespace

double capacity_estimate(const SingularObstacle& e, double enclosing_radius, double h) {
  if (h <= 0.0) throw std::invalid_argument("grid spacing must be positive");
  if (h >= enclosing_radius) throw std::invalid_argument("grid too coarse");
  const double r = enclosing_radius;
  const int nx = static_cast<int>(std::ceil(2.0 * r / h)) + 1;
  const int ny = nx;
  const double x0 = -r, y0 = -r;

  CapacityGrid grid{nx, ny, h, {}};
  grid.cls.assign(static_cast<std::size_t>(nx) * ny, 0);
  std::size_t ones = 0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Cx x(x0 + i * h, y0 + j * h);
      const std::size_t q = static_cast<std::size_t>(j) * nx + i;
      if (std::abs(x) >= r) {
        grid.cls[q] = 2;
      } else if (e.contains_within(x, 2.0 * h)) {
        grid.cls[q] = 1;
        ++ones;
      }
    }
  }
  if (ones == 0) throw std::invalid_argument("grid too coarse to see the obstacle");

  const std::size_t nn = grid.cls.size();
  std::vector<double> v(nn, 0.0), b(nn, 0.0), rres(nn), p(nn), ap(nn);
  grid.apply(v, b, true);

  // CG on A v = b.
  grid.apply(v, ap, false);
  for (std::size_t q = 0; q < nn; ++q) rres[q] = b[q] - ap[q];
  p = rres;
  double rr = 0.0;
  for (double x : rres) rr += x * x;
  const double rr0 = rr;
  const int maxit = 20000;
  for (int it = 0; it < maxit && rr > 1e-20 * std::max(1.0, rr0); ++it) {
    grid.apply(p, ap, false);
    double pap = 0.0;
    for (std::size_t q = 0; q < nn; ++q) pap += p[q] * ap[q];
    if (pap <= 0.0) break;
    const double alpha = rr / pap;
    for (std::size_t q = 0; q < nn; ++q) {
      v[q] += alpha * p[q];
      rres[q] -= alpha * ap[q];
    }
    double rr_new = 0.0;
    for (double x : rres) rr_new += x * x;
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t q = 0; q < nn; ++q) p[q] = rres[q] + beta * p[q];
  }

  // Energy of the full grid function (clamped values included).
  double energy = 0.0;
  const double h2 = h * h;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double c = grid.val(v, i, j);
      energy += h2 * c * c;
      const double rgt = grid.val(v, i + 1, j);
      const double top = grid.val(v, i, j + 1);
      if (i + 1 < nx) energy += sq(rgt - c);
      if (j + 1 < ny) energy += sq(top - c);
    }
  }
  return energy;
}

// ---------------------------------------------------------------------------
// Cutoff

namespace {
// Cubic smoothstep on [0,1].
double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}
double smoothstep_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return 6.0 * t * (1.0 - t);
}
}  // namespace

Cutoff::Cutoff(SingularObstacle obstacle, double eps) : obstacle_(std::move(obstacle)), eps_(eps) {
  if (eps_ <= 0.0) throw std::invalid_argument("cutoff width must be positive");
}

Cutoff::Cutoff(SingularObstacle obstacle, double eps, const std::vector<SingularObstacle>& all)
    : Cutoff(std::move(obstacle), eps) {
  for (const auto& other : all) {
    if (other.id == obstacle_.id) continue;
    if (2.0 * eps_ >= obstacle_separation(obstacle_, other))
      throw std::invalid_argument("cutoffs overlap");
  }
}

double Cutoff::operator()(Cx x) const {
  const double d = obstacle_.distance(x);
  if (d <= eps_) return 1.0;
  if (d >= 2.0 * eps_) return 0.0;
  return smoothstep((2.0 * eps_ - d) / eps_);
}

Cx Cutoff::gradient(Cx x) const {
  const double d = obstacle_.distance(x);
  if (d <= eps_ || d >= 2.0 * eps_) return Cx(0, 0);
  const double t = (2.0 * eps_ - d) / eps_;
  return (-smoothstep_deriv(t) / eps_) * obstacle_.distance_direction(x);
}

double obstacle_separation(const SingularObstacle& a, const SingularObstacle& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const Cx& p : a.samples) best = std::min(best, b.distance(p));
  for (const Cx& p : b.samples) best = std::min(best, a.distance(p));
  return best;
}

}  // namespace exflow
