#pragma once

#include "zsnav/common.hpp"

#include <vector>

namespace zsnav {

using Polygon = std::vector<Point2>;  // closed: front() == back()

struct ClassContour {
  int class_index = -1;
  std::vector<Polygon> polygons;
  double density_level = 0.0;
  double mass_covered = 0.0;  // fraction of the class points inside
  bool degenerate = false;    // circular fallback for < 3 points
};

struct ContourOptions {
  double mass_target = 0.80;
  int grid = 256;
};

// Gaussian KDE with Scott's factor applied to the sample covariance.
struct Kde2 {
  Matrix points;        // n x 2
  Eigen::Matrix2d inv;  // inverse kernel covariance
  double norm = 0.0;    // 1 / (n * 2 pi sqrt(det))
  double bandwidth = 0.0;

  explicit Kde2(const Matrix& pts);
  double operator()(const Point2& at) const;
};

// Iso-lines of a scalar field sampled on a regular grid; values(i, j) sits at (x0 + i*dx, y0 + j*dy).
// Cells are classified with value >= level as inside; saddles are split by the cell-center average.
std::vector<Polygon> marching_squares(const Matrix& values, double x0, double y0, double dx, double dy,
                                      double level);

bool point_in_polygon(const Polygon& poly, const Point2& p);
// Even-odd over all polygons, so holes count as outside.
bool point_in_contour(const ClassContour& contour, const Point2& p);

// Largest distance between any two rows of an n x 2 matrix.
double layout_diameter(const Matrix& points);

// `points` are the class's 2-D points; `diameter` sizes the degenerate fallback circle.
ClassContour density_contour(int class_index, const Matrix& points, double diameter, const ContourOptions& options);

// Intersection over union of the two contour regions, estimated by rasterization.
double contour_iou(const ClassContour& a, const ClassContour& b, int resolution = 256);

}  // namespace zsnav
