#include "zsnav/map.hpp"

#include "zsnav/linalg.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace zsnav {

Index SemanticLayout::row_of(int cls) const {
  const auto it = std::lower_bound(classes.begin(), classes.end(), cls);
  return it != classes.end() && *it == cls ? it - classes.begin() : -1;
}

Matrix SemanticLayout::class_points(int cls) const {
  std::vector<Index> rows;
  for (size_t i = 0; i < instance_classes.size(); ++i)
    if (instance_classes[i] == cls) rows.push_back(static_cast<Index>(i));
  return select_rows(instance_points, rows);
}

SemanticLayout base_layout(const MutualSpace& space, const FeatureDataset& ds, const ExemplarSet& exemplars,
                           std::uint64_t seed, const LayoutOptions& opt, const Progress& progress,
                           const std::atomic<bool>* cancel) {
  require(opt.per_class_cap >= 1, "per-class cap must be positive");
  SemanticLayout out;
  std::mt19937_64 rng(seed);
  for (int c : exemplars.classes) {
    std::vector<Index> rows = ds.instances_of(c);
    if (static_cast<int>(rows.size()) > opt.per_class_cap) {
      for (size_t i = 0; i < static_cast<size_t>(opt.per_class_cap); ++i) {
        std::uniform_int_distribution<size_t> pick(i, rows.size() - 1);
        std::swap(rows[i], rows[pick(rng)]);
      }
      rows.resize(static_cast<size_t>(opt.per_class_cap));
      std::sort(rows.begin(), rows.end());
    }
    for (Index r : rows) {
      out.instance_rows.push_back(r);
      out.instance_classes.push_back(c);
    }
  }
  const Index n = static_cast<Index>(out.instance_rows.size());
  const Index total = n + exemplars.size();
  if (total < 5) fail(ErrorKind::invalid_argument, "layout needs at least 5 points, got " + std::to_string(total));

  out.anchor_high.resize(total, space.dim());
  out.anchor_high.topRows(n) = project_rows(space, select_rows(ds.instances, out.instance_rows));
  out.anchor_high.bottomRows(exemplars.size()) = exemplars.points;

  const Matrix low = tsne_embed(out.anchor_high, opt.tsne, progress, cancel);
  out.instance_points = low.topRows(n);
  out.exemplar_points = low.bottomRows(exemplars.size());
  out.classes = exemplars.classes;
  out.diameter = layout_diameter(low);
  return out;
}

SemanticLayout reproject_prototypes(const SemanticLayout& layout, const ExemModel& model,
                                    const ClassAttributeMatrix& matrix, const Matrix* previous,
                                    const AnchoredOptions& opt, const Progress& progress,
                                    const std::atomic<bool>* cancel) {
  if (model.n_regressors() == 0) fail(ErrorKind::phase, "prototype reprojection needs a trained model");
  const Index ns = static_cast<Index>(layout.classes.size());
  IntMatrix protos(ns, matrix.n_attributes());
  for (Index i = 0; i < ns; ++i) protos.row(i) = matrix.values().row(layout.classes[static_cast<size_t>(i)]);
  const Matrix high = model.predict_rows(protos);

  Matrix init;
  if (previous && previous->rows() == ns && previous->cols() == 2) {
    init = *previous;
  } else {
    const double off = 0.01 * (layout.diameter > 0.0 ? layout.diameter : 1.0);
    init = layout.exemplar_points.rowwise() + Eigen::RowVector2d(off, off);
  }
  Matrix anchors_low(layout.anchor_high.rows(), 2);
  anchors_low << layout.instance_points, layout.exemplar_points;

  const AnchoredResult res = anchored_reproject(layout.anchor_high, anchors_low, high, init, opt, progress, cancel);
  SemanticLayout out = layout;
  out.prototype_points = res.movable;
  out.prototype_high = high;
  out.kl_initial = res.kl_initial;
  out.kl_final = res.kl_final;
  return out;
}

std::vector<ClassContour> compute_contours(const SemanticLayout& layout, const ContourOptions& opt) {
  std::vector<ClassContour> out;
  out.reserve(layout.classes.size());
  for (int c : layout.classes) out.push_back(density_contour(c, layout.class_points(c), layout.diameter, opt));
  return out;
}

const char* to_string(PatternLabel label) {
  switch (label) {
    case PatternLabel::p1: return "P1";
    case PatternLabel::p2: return "P2";
    case PatternLabel::p3: return "P3";
    case PatternLabel::p4: return "P4";
    case PatternLabel::p5: return "P5";
    case PatternLabel::overlap: return "OVERLAP";
    case PatternLabel::aligned: return "ALIGNED";
  }
  return "?";
}

namespace {

PairPattern swapped(PairPattern p) {
  std::swap(p.class_a, p.class_b);
  PatternEvidence& e = p.evidence;
  std::swap(e.a_in_a, e.b_in_b);
  std::swap(e.a_in_b, e.b_in_a);
  return p;
}

}  // namespace

PairPattern classify_pattern(int a, int b, const PatternEvidence& ev, double iou_threshold) {
  PairPattern p{a, b, PatternLabel::p3, ev};
  auto label = [&](PatternLabel l, bool swap) {
    PairPattern out = swap ? swapped(p) : p;
    out.label = l;
    return out;
  };
  if (ev.iou > iou_threshold) return label(PatternLabel::overlap, false);
  if (ev.a_in_b && ev.b_in_a) return label(PatternLabel::p5, false);
  if (ev.prototypes_equal) {
    const bool in_a = ev.a_in_a || ev.b_in_a, in_b = ev.a_in_b || ev.b_in_b;
    if (!in_a && !in_b) return label(PatternLabel::p1, false);
    if (in_a != in_b) return label(PatternLabel::p2, in_b);
  }
  if (ev.a_in_a && ev.b_in_a) return label(PatternLabel::p4, false);
  if (ev.a_in_b && ev.b_in_b) return label(PatternLabel::p4, true);
  if (ev.a_in_a && ev.b_in_b) return label(PatternLabel::aligned, false);
  return label(PatternLabel::p3, false);
}

PairPattern detect_pair_pattern(int a, int b, const ClassContour& ca, const ClassContour& cb, const Point2& pa,
                                const Point2& pb, const ClassAttributeMatrix& matrix, double iou_threshold) {
  require(a >= 0 && a < matrix.n_classes() && b >= 0 && b < matrix.n_classes(), "pattern class out of range");
  if (matrix.n_attributes() == 0) fail(ErrorKind::phase, "pattern detection needs at least one attribute");
  if (ca.polygons.empty() || cb.polygons.empty()) fail(ErrorKind::not_found, "missing contour geometry");
  PatternEvidence ev;
  ev.prototypes_equal = matrix.rows_equal(a, b);
  const Point2 qa = ev.prototypes_equal ? Point2(0.5 * (pa + pb)) : pa;
  const Point2 qb = ev.prototypes_equal ? qa : pb;
  ev.a_in_a = point_in_contour(ca, qa);
  ev.a_in_b = point_in_contour(cb, qa);
  ev.b_in_a = point_in_contour(ca, qb);
  ev.b_in_b = point_in_contour(cb, qb);
  ev.iou = contour_iou(ca, cb);
  return classify_pattern(a, b, ev, iou_threshold);
}

std::vector<Index> nearest_instances(const Matrix& projected, std::span<const Index> pool, const Vector& query,
                                     Index k) {
  require(query.size() == projected.cols(), "query dimension differs from the mutual space");
  require(k >= 0, "k must be non-negative");
  std::vector<std::pair<double, size_t>> d(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) d[i] = {(projected.row(pool[i]).transpose() - query).squaredNorm(), i};
  const size_t kk = std::min(static_cast<size_t>(k), d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  std::vector<Index> out(kk);
  for (size_t i = 0; i < kk; ++i) out[i] = pool[d[i].second];
  return out;
}

}  // namespace zsnav
