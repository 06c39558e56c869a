#include "zsnav/contour.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace zsnav {

Kde2::Kde2(const Matrix& pts) : points(pts) {
  const Index n = pts.rows();
  require(n >= 1 && pts.cols() == 2, "KDE needs an n x 2 sample");
  const Eigen::RowVector2d mean = pts.colwise().mean();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  if (n > 1) {
    const Matrix c = pts.rowwise() - mean;
    cov = c.transpose() * c / static_cast<double>(n - 1);
  }
  const double factor2 = std::pow(static_cast<double>(n), -1.0 / 3.0);
  cov *= factor2;
  const double scale = std::max(cov.trace(), 1e-12);
  if (cov.determinant() <= 1e-10 * scale * scale) cov += 1e-3 * scale * Eigen::Matrix2d::Identity();
  inv = cov.inverse();
  norm = 1.0 / (static_cast<double>(n) * 2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
  bandwidth = std::sqrt(std::max(cov(0, 0), cov(1, 1)));
}

double Kde2::operator()(const Point2& at) const {
  double s = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    const double dx = at.x() - points(i, 0), dy = at.y() - points(i, 1);
    const double q = inv(0, 0) * dx * dx + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy * dy;
    if (q < 80.0) s += std::exp(-0.5 * q);
  }
  return s * norm;
}

namespace {

using EdgeKey = long long;

}  // namespace

std::vector<Polygon> marching_squares(const Matrix& values, double x0, double y0, double dx, double dy,
                                      double level) {
  const Index nx = values.rows(), ny = values.cols();
  std::vector<Polygon> out;
  if (nx < 2 || ny < 2) return out;

  // Horizontal edge (i,j)-(i+1,j): 2*(i*ny+j); vertical edge (i,j)-(i,j+1): 2*(i*ny+j)+1.
  auto hkey = [&](Index i, Index j) { return EdgeKey{2 * (i * ny + j)}; };
  auto vkey = [&](Index i, Index j) { return EdgeKey{2 * (i * ny + j) + 1}; };
  auto crossing = [&](EdgeKey key) {
    const Index cell = key / 2;
    const Index i = cell / ny, j = cell % ny;
    const Index i2 = (key & 1) ? i : i + 1;
    const Index j2 = (key & 1) ? j + 1 : j;
    const double va = values(i, j), vb = values(i2, j2);
    const double t = vb == va ? 0.5 : std::clamp((level - va) / (vb - va), 0.0, 1.0);
    return Point2(x0 + (static_cast<double>(i) + t * static_cast<double>(i2 - i)) * dx,
                  y0 + (static_cast<double>(j) + t * static_cast<double>(j2 - j)) * dy);
  };

  std::vector<std::pair<EdgeKey, EdgeKey>> segments;
  for (Index i = 0; i + 1 < nx; ++i)
    for (Index j = 0; j + 1 < ny; ++j) {
      const double v[4] = {values(i, j), values(i + 1, j), values(i + 1, j + 1), values(i, j + 1)};
      const bool in[4] = {v[0] >= level, v[1] >= level, v[2] >= level, v[3] >= level};
      // e0 bottom, e1 right, e2 top, e3 left
      const EdgeKey e[4] = {hkey(i, j), vkey(i + 1, j), hkey(i, j + 1), vkey(i, j)};
      const int code = in[0] | in[1] << 1 | in[2] << 2 | in[3] << 3;
      if (code == 0 || code == 15) continue;
      if (code == 5 || code == 10) {
        const bool center = 0.25 * (v[0] + v[1] + v[2] + v[3]) >= level;
        // cut off corners 1 and 3, or corners 0 and 2
        const bool cut13 = (code == 5) == center;
        if (cut13) {
          segments.emplace_back(e[0], e[1]);
          segments.emplace_back(e[2], e[3]);
        } else {
          segments.emplace_back(e[3], e[0]);
          segments.emplace_back(e[1], e[2]);
        }
        continue;
      }
      EdgeKey ends[2];
      int k = 0;
      for (int s = 0; s < 4; ++s)
        if (in[s] != in[(s + 1) % 4]) ends[k++] = e[s];
      segments.emplace_back(ends[0], ends[1]);
    }

  std::unordered_map<EdgeKey, std::vector<size_t>> at;
  at.reserve(segments.size() * 2);
  for (size_t s = 0; s < segments.size(); ++s) {
    at[segments[s].first].push_back(s);
    at[segments[s].second].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  for (size_t s0 = 0; s0 < segments.size(); ++s0) {
    if (used[s0]) continue;
    used[s0] = true;
    Polygon poly{crossing(segments[s0].first)};
    const EdgeKey start = segments[s0].first;
    EdgeKey cur = segments[s0].second;
    while (cur != start) {
      poly.push_back(crossing(cur));
      size_t next = segments.size();
      for (size_t cand : at[cur])
        if (!used[cand]) {
          next = cand;
          break;
        }
      if (next == segments.size()) break;  // open chain; only possible when the field touches the border
      used[next] = true;
      cur = segments[next].first == cur ? segments[next].second : segments[next].first;
    }
    poly.push_back(poly.front());
    if (poly.size() >= 4) out.push_back(std::move(poly));
  }
  return out;
}

bool point_in_polygon(const Polygon& poly, const Point2& p) {
  bool inside = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) && p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

bool point_in_contour(const ClassContour& contour, const Point2& p) {
  bool inside = false;
  for (const auto& poly : contour.polygons)
    if (point_in_polygon(poly, p)) inside = !inside;
  return inside;
}

double layout_diameter(const Matrix& points) {
  double best = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    for (Index j = i + 1; j < points.rows(); ++j) best = std::max(best, (points.row(i) - points.row(j)).squaredNorm());
  return std::sqrt(best);
}

namespace {

double fraction_inside(const ClassContour& c, const Matrix& points) {
  if (points.rows() == 0) return 0.0;
  Index in = 0;
  for (Index i = 0; i < points.rows(); ++i) in += point_in_contour(c, points.row(i).transpose());
  return static_cast<double>(in) / static_cast<double>(points.rows());
}

ClassContour circle_contour(int cls, const Matrix& points, double diameter) {
  ClassContour c;
  c.class_index = cls;
  c.degenerate = true;
  const Point2 center = points.rows() ? Point2(points.colwise().mean().transpose()) : Point2::Zero();
  const double r = diameter > 0.0 ? 0.02 * diameter : 1e-6;
  Polygon poly;
  constexpr int kVertices = 64;
  for (int k = 0; k < kVertices; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kVertices;
    poly.emplace_back(center.x() + r * std::cos(a), center.y() + r * std::sin(a));
  }
  poly.push_back(poly.front());
  c.polygons.push_back(std::move(poly));
  c.mass_covered = fraction_inside(c, points);
  return c;
}

}  // namespace

ClassContour density_contour(int cls, const Matrix& points, double diameter, const ContourOptions& opt) {
  require(opt.mass_target > 0.0 && opt.mass_target <= 1.0, "mass_target must lie in (0, 1]");
  require(opt.grid >= 8, "contour grid must be at least 8");
  const Index n = points.rows();
  if (n < 3) return circle_contour(cls, points, diameter);
  const Eigen::Array2d lo = points.colwise().minCoeff().transpose().array();
  const Eigen::Array2d hi = points.colwise().maxCoeff().transpose().array();
  if ((hi - lo).maxCoeff() <= 0.0) return circle_contour(cls, points, diameter);

  const Kde2 kde(points);
  std::vector<double> at_points(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) at_points[static_cast<size_t>(i)] = kde(points.row(i).transpose());
  std::sort(at_points.begin(), at_points.end(), std::greater<>());
  const auto k = static_cast<size_t>(std::clamp<double>(std::ceil(opt.mass_target * static_cast<double>(n) - 1e-9),
                                                        1.0, static_cast<double>(n)));
  const double level = k < at_points.size() ? 0.5 * (at_points[k - 1] + at_points[k]) : 0.5 * at_points[k - 1];

  const double pad = 3.0 * kde.bandwidth;
  const int g = opt.grid;
  const double x0 = lo.x() - pad, y0 = lo.y() - pad;
  const double dx = (hi.x() - lo.x() + 2 * pad) / (g - 1), dy = (hi.y() - lo.y() + 2 * pad) / (g - 1);
  Matrix field = Matrix::Zero(g, g);
  for (int i = 1; i + 1 < g; ++i)
    for (int j = 1; j + 1 < g; ++j) field(i, j) = kde(Point2(x0 + i * dx, y0 + j * dy));

  ClassContour c;
  c.class_index = cls;
  c.density_level = level;
  c.polygons = marching_squares(field, x0, y0, dx, dy, level);
  c.mass_covered = fraction_inside(c, points);
  return c;
}

double contour_iou(const ClassContour& a, const ClassContour& b, int resolution) {
  Eigen::Array2d lo = Eigen::Array2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Array2d hi = -lo;
  auto any_vertex = [](const ClassContour& c) {
    return std::any_of(c.polygons.begin(), c.polygons.end(), [](const Polygon& p) { return !p.empty(); });
  };
  if (!any_vertex(a) || !any_vertex(b)) return 0.0;
  for (const auto* c : {&a, &b})
    for (const auto& poly : c->polygons)
      for (const auto& p : poly) {
        lo = lo.min(p.array());
        hi = hi.max(p.array());
      }
  const double sx = (hi.x() - lo.x()) / resolution, sy = (hi.y() - lo.y()) / resolution;
  long both = 0, either = 0;
  for (int i = 0; i < resolution; ++i)
    for (int j = 0; j < resolution; ++j) {
      const Point2 p(lo.x() + (i + 0.5) * sx, lo.y() + (j + 0.5) * sy);
      const bool ia = point_in_contour(a, p), ib = point_in_contour(b, p);
      both += ia && ib;
      either += ia || ib;
    }
  return either ? static_cast<double>(both) / static_cast<double>(either) : 0.0;
}

}  // namespace zsnav
