#pragma once

#include <string>
#include <vector>

#include "exflow/common.hpp"

namespace exflow {

enum class ObstacleKind { kSegment, kPolyline, kKochFlake, kDisk, kEllipse, kPointCloud };

/// A compact, connected obstacle that may be singular (a segment, a fractal
/// boundary, ...). Stored as a dense point sampling plus the defining
/// parameters of the built-in kinds, which give exact distance queries.
struct SingularObstacle {
  ObstacleKind kind = ObstacleKind::kPointCloud;
  std::vector<Cx> samples;   // dense sampling of the set (boundary for filled kinds)
  int id = 0;

  Cx center{0.0, 0.0};
  double radius = 0.0;       // disk
  double semi_a = 0.0, semi_b = 0.0;  // ellipse
  std::vector<Cx> vertices;  // polyline chain / koch polygon (closed)

  static SingularObstacle segment(Cx a, Cx b, int id = 0, int npts = 600);
  static SingularObstacle polyline(std::vector<Cx> verts, int id = 0, int npts = 600);
  static SingularObstacle koch_flake(Cx center, double scale, int level, int id = 0);
  static SingularObstacle disk(Cx center, double radius, int id = 0, int npts = 720);
  static SingularObstacle ellipse(Cx center, double a, double b, int id = 0, int npts = 720);
  static SingularObstacle point_cloud(std::vector<Cx> pts, int id = 0);

  /// Euclidean distance to the compact set (0 inside filled kinds).
  double distance(Cx x) const;
  /// Unit vector pointing from the nearest set point toward x (0 inside).
  Cx distance_direction(Cx x) const;
  /// True if x lies within tol of the set (filled kinds include the interior).
  bool contains_within(Cx x, double tol) const;
  double diameter() const;
};

/// Closed counterclockwise boundary curve of one smooth approximant.
/// The constructor enforces the invariants: at least 8 points, simple at
/// sample resolution, positively oriented (input is reversed if needed).
struct JordanCurve {
  std::vector<Cx> points;
  int owner = 0;
  int n_index = 0;
  Cx bbox_lo{0.0, 0.0}, bbox_hi{0.0, 0.0};

  JordanCurve() = default;
  JordanCurve(std::vector<Cx> pts, int owner = 0, int n_index = 0);

  std::size_t size() const { return points.size(); }
  double signed_area() const;
  Cx centroid() const;
  double length() const;
  bool contains(Cx x) const;            // even-odd crossing test
  Cx outward_normal(std::size_t i) const;
  double arclength_weight(std::size_t i) const;

  static JordanCurve circle(Cx c, double r, int m = 256);
  static JordanCurve ellipse(Cx c, double a, double b, int m = 256);
};

/// All approximant curves at a common index n.
struct DomainApproximation {
  std::vector<JordanCurve> curves;
  double pairwise_separation = 0.0;  // min sample distance between distinct curves

  DomainApproximation() = default;
  explicit DomainApproximation(std::vector<JordanCurve> cs);

  std::size_t obstacle_count() const { return curves.size(); }
  bool exterior_point(Cx x) const;
};

/// Smooth closed curve enclosing the obstacle at offset ~1/n. Level set of a
/// log-sum-exp mollified distance, so curves at successive n are nested.
JordanCurve approximation_sequence(const SingularObstacle& obstacle, int n, int m_points = 256);

/// max(sup_a dist(a,B), sup_b dist(b,A)) over finite samplings.
double hausdorff_distance(const std::vector<Cx>& a, const std::vector<Cx>& b);

/// Grid surrogate for the Sobolev H^1 capacity of E: minimum of the discrete
/// H^1 norm squared over grid functions v = 1 on cells meeting a 2h
/// neighborhood of E and v = 0 outside B(0, enclosing_radius).
double capacity_estimate(const SingularObstacle& e, double enclosing_radius, double h);

/// Cutoff chi^i: 1 within eps of the obstacle, 0 beyond 2 eps, cubic
/// smoothstep of the mollified distance in between.
class Cutoff {
 public:
  Cutoff(SingularObstacle obstacle, double eps);
  /// Validates 2*eps against the pairwise separation of `all`.
  Cutoff(SingularObstacle obstacle, double eps, const std::vector<SingularObstacle>& all);

  double operator()(Cx x) const;
  Cx gradient(Cx x) const;
  double eps() const { return eps_; }
  const SingularObstacle& obstacle() const { return obstacle_; }

 private:
  SingularObstacle obstacle_;
  double eps_;
};

/// Minimum distance between two obstacles' samplings.
double obstacle_separation(const SingularObstacle& a, const SingularObstacle& b);

}  // namespace exflow
