#include <doctest.h>

#include "oracles.hpp"
#include "zsnav/linalg.hpp"
#include "zsnav/map.hpp"

#include <random>

using namespace zsnav;

namespace {

struct World {
  SyntheticData syn;
  MutualSpace space;
  ExemplarSet exemplars;
  Matrix projected;

  World(std::uint64_t seed, int classes, int seen, int per_class, double noise = 0.1) {
    SyntheticParams p;
    p.seed = seed;
    p.n_classes = classes;
    p.n_seen = seen;
    p.gt_attributes = 8;
    p.dim = 32;
    p.per_class = per_class;
    p.noise = noise;
    syn = generate_synthetic(p);
    space = fit_pca(select_rows(syn.dataset.instances, syn.dataset.training_indices()), 16).space;
    exemplars = compute_exemplars(space, syn.dataset);
    projected = project_rows(space, syn.dataset.instances);
  }
};

ClassContour square(int cls, double x, double y, double side) {
  ClassContour c;
  c.class_index = cls;
  c.polygons.push_back({Point2(x, y), Point2(x + side, y), Point2(x + side, y + side), Point2(x, y + side), Point2(x, y)});
  return c;
}

ClassAttributeMatrix two_classes(bool equal) {
  IntMatrix v(2, 2);
  v << 1, 0, 1, (equal ? 0 : 1);
  return ClassAttributeMatrix(v, {"u", "v"});
}

}  // namespace

TEST_CASE("base layout separates classes and is deterministic") {
  const World w(1, 6, 5, 40);
  LayoutOptions opt;
  const SemanticLayout a = base_layout(w.space, w.syn.dataset, w.exemplars, 3, opt);
  CHECK(a.instance_points.rows() == 5 * 40);
  CHECK(a.exemplar_points.rows() == 5);
  CHECK(a.classes == w.syn.dataset.seen_classes);
  CHECK_FALSE(a.has_prototypes());
  CHECK(oracle::silhouette(a.instance_points, a.instance_classes) > 0.5);
  const SemanticLayout b = base_layout(w.space, w.syn.dataset, w.exemplars, 3, opt);
  CHECK(a.instance_points == b.instance_points);
  CHECK(a.exemplar_points == b.exemplar_points);
  int inside = 0;
  for (int c : a.classes) inside += oracle::in_convex_hull(a.class_points(c), a.exemplar_points.row(a.row_of(c)).transpose());
  CHECK(inside >= 0.9 * static_cast<double>(a.classes.size()));
  CHECK(a.diameter == doctest::Approx(layout_diameter((Matrix(205, 2) << a.instance_points, a.exemplar_points).finished())));
}

TEST_CASE("base layout subsamples with the per-class cap") {
  const World w(2, 5, 4, 30);
  LayoutOptions opt;
  opt.per_class_cap = 10;
  opt.tsne.iterations = 100;
  const SemanticLayout a = base_layout(w.space, w.syn.dataset, w.exemplars, 7, opt);
  CHECK(a.instance_rows.size() == 40);
  for (size_t i = 0; i < a.instance_rows.size(); ++i)
    CHECK(w.syn.dataset.class_of[static_cast<size_t>(a.instance_rows[i])] == a.instance_classes[i]);
  const SemanticLayout b = base_layout(w.space, w.syn.dataset, w.exemplars, 8, opt);
  CHECK(a.instance_rows != b.instance_rows);
  opt.per_class_cap = 1;
  ExemplarSet few = w.exemplars;
  few.classes.resize(2);
  few.points.conservativeResize(2, Eigen::NoChange);
  CHECK_THROWS_AS(base_layout(w.space, w.syn.dataset, few, 1, opt), Error);
}

TEST_CASE("prototype reprojection keeps anchors and lowers KL") {
  const World w(3, 6, 5, 30);
  LayoutOptions opt;
  opt.tsne.iterations = 500;
  const SemanticLayout base = base_layout(w.space, w.syn.dataset, w.exemplars, 1, opt);
  const ClassAttributeMatrix m(w.syn.ground_truth.values, w.syn.ground_truth.attribute_names);
  const ExemModel model = train_exem(m, w.exemplars, ExemHyper{});
  SemanticLayout cur = base;
  for (int i = 0; i < 15; ++i) {
    const Matrix prev = cur.prototype_points;
    cur = reproject_prototypes(cur, model, m, cur.has_prototypes() ? &prev : nullptr);
    CHECK(cur.instance_points == base.instance_points);
    CHECK(cur.exemplar_points == base.exemplar_points);
    CHECK(cur.kl_final <= cur.kl_initial);
    CHECK(cur.prototype_points.rows() == 5);
  }
  CHECK(cur.prototype_high == model.predict_rows(select_rows(m.values(), std::vector<Index>{0, 1, 2, 3, 4})));
}

TEST_CASE("a prototype at its exemplar lands next to it") {
  const World w(4, 6, 5, 30);
  const SemanticLayout base = base_layout(w.space, w.syn.dataset, w.exemplars, 1, LayoutOptions{});
  Matrix anchors_low(base.anchor_high.rows(), 2);
  anchors_low << base.instance_points, base.exemplar_points;
  const Matrix init = base.exemplar_points.rowwise() + Eigen::RowVector2d(0.01 * base.diameter, 0.01 * base.diameter);
  const AnchoredResult r = anchored_reproject(base.anchor_high, anchors_low, w.exemplars.points, init, AnchoredOptions{});
  for (Index c = 0; c < 5; ++c) CHECK((r.movable.row(c) - base.exemplar_points.row(c)).norm() <= 0.05 * base.diameter);
}

TEST_CASE("contours per class are closed and cover most points") {
  const World w(5, 5, 4, 60);
  const SemanticLayout base = base_layout(w.space, w.syn.dataset, w.exemplars, 1, LayoutOptions{});
  const auto contours = compute_contours(base);
  REQUIRE(contours.size() == 4);
  for (size_t i = 0; i < contours.size(); ++i) {
    CHECK(contours[i].class_index == base.classes[i]);
    CHECK(contours[i].mass_covered >= 0.75);
    CHECK(contours[i].mass_covered <= 1.0);
    for (const auto& p : contours[i].polygons) CHECK(p.front() == p.back());
  }
}

TEST_CASE("pattern fixtures") {
  const ClassContour ca = square(0, 0, 0, 1), cb = square(1, 3, 0, 1);
  const Point2 in_a(0.5, 0.5), in_b(3.5, 0.5), out(10, 10);
  const ClassAttributeMatrix eq = two_classes(true), ne = two_classes(false);

  auto detect = [&](const Point2& pa, const Point2& pb, const ClassAttributeMatrix& m,
                    const ClassContour& b = square(1, 3, 0, 1)) { return detect_pair_pattern(0, 1, ca, b, pa, pb, m); };

  CHECK(detect(Point2(2, 0.5), Point2(2, 0.5), eq).label == PatternLabel::p1);
  const PairPattern p2 = detect(Point2(0.4, 0.5), Point2(0.6, 0.5), eq);
  CHECK(p2.label == PatternLabel::p2);
  CHECK(p2.class_a == 0);
  const PairPattern p2s = detect(Point2(3.4, 0.5), Point2(3.6, 0.5), eq);
  CHECK(p2s.label == PatternLabel::p2);
  CHECK(p2s.class_a == 1);
  CHECK(detect(out, in_b, ne).label == PatternLabel::p3);
  const PairPattern p4 = detect(in_a, Point2(0.2, 0.2), ne);
  CHECK(p4.label == PatternLabel::p4);
  CHECK(p4.class_a == 0);
  const PairPattern p4s = detect(in_b, Point2(3.2, 0.2), ne);
  CHECK(p4s.label == PatternLabel::p4);
  CHECK(p4s.class_a == 1);
  CHECK(detect(in_b, in_a, ne).label == PatternLabel::p5);
  CHECK(detect(in_a, in_b, ne, square(1, 0.1, 0.1, 1)).label == PatternLabel::overlap);
  CHECK(detect(in_a, in_b, ne).label == PatternLabel::aligned);
  CHECK(detect(in_a, in_b, ne).evidence.iou == 0.0);

  CHECK_THROWS_AS(detect_pair_pattern(0, 1, ca, ClassContour{}, in_a, in_b, ne), Error);
  CHECK_THROWS_AS(detect_pair_pattern(0, 1, ca, cb, in_a, in_b, ClassAttributeMatrix(2)), Error);
  CHECK_THROWS_AS(detect_pair_pattern(0, 5, ca, cb, in_a, in_b, ne), Error);
}

TEST_CASE("pattern decision table is total over all evidence") {
  for (int code = 0; code < 64; ++code) {
    PatternEvidence ev;
    ev.a_in_a = code & 1;
    ev.a_in_b = code & 2;
    ev.b_in_a = code & 4;
    ev.b_in_b = code & 8;
    ev.prototypes_equal = code & 16;
    ev.iou = code & 32 ? 0.6 : 0.1;
    const PairPattern p = classify_pattern(3, 4, ev);
    const PairPattern q = classify_pattern(3, 4, ev);
    CHECK(p.label == q.label);
    CHECK(std::string(to_string(p.label)).size() >= 2);
    CHECK(((p.class_a == 3 && p.class_b == 4) || (p.class_a == 4 && p.class_b == 3)));
    // Written out from the table, reading P(A)/P(B) from the returned orientation.
    const PatternEvidence& e = p.evidence;
    PatternLabel expect;
    if (ev.iou > 0.3) {
      expect = PatternLabel::overlap;
    } else if (ev.a_in_b && ev.b_in_a) {
      expect = PatternLabel::p5;
    } else if (ev.prototypes_equal && !(ev.a_in_a || ev.b_in_a) && !(ev.a_in_b || ev.b_in_b)) {
      expect = PatternLabel::p1;
    } else if (ev.prototypes_equal && (ev.a_in_a || ev.b_in_a) != (ev.a_in_b || ev.b_in_b)) {
      expect = PatternLabel::p2;
      CHECK((e.a_in_a || e.b_in_a));
    } else if ((ev.a_in_a && ev.b_in_a) || (ev.a_in_b && ev.b_in_b)) {
      expect = PatternLabel::p4;
      CHECK((e.a_in_a && e.b_in_a));
    } else if (ev.a_in_a && ev.b_in_b) {
      expect = PatternLabel::aligned;
    } else {
      expect = PatternLabel::p3;
    }
    CHECK(p.label == expect);
  }
}

TEST_CASE("nearest instances agree with a brute-force scan") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  const Matrix pts = Matrix::NullaryExpr(1000, 6, [&]() { return std::round(4 * g(rng)) / 4; });  // many ties
  std::vector<Index> pool;
  for (Index i = 0; i < 1000; i += 1) pool.push_back(i);
  for (int t = 0; t < 50; ++t) {
    const Vector q = pts.row(static_cast<Index>(rng() % 1000)).transpose();
    const Index k = 1 + static_cast<Index>(rng() % 20);
    CHECK(nearest_instances(pts, pool, q, k) == oracle::brute_knn(pts, pool, q, k));
  }
  CHECK(nearest_instances(pts, std::vector<Index>{3, 5}, pts.row(0).transpose(), 10).size() == 2);
  CHECK_THROWS_AS(nearest_instances(pts, pool, Vector::Zero(2), 1), Error);
}

TEST_CASE("collapsed clusters: nearest instance of an exemplar is its own class") {
  const World w(6, 6, 5, 8, 0.0);
  const auto train = w.syn.dataset.training_indices();
  for (size_t i = 0; i < w.exemplars.classes.size(); ++i) {
    const auto nn = nearest_instances(w.projected, train, w.exemplars.points.row(static_cast<Index>(i)).transpose(), 1);
    REQUIRE(nn.size() == 1);
    CHECK(w.syn.dataset.class_of[static_cast<size_t>(nn[0])] == w.exemplars.classes[i]);
  }
}
