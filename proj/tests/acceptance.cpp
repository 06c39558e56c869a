// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "oracles.hpp"
#include "zsnav/linalg.hpp"
#include "zsnav/serialize.hpp"
#include "zsnav/server.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace zsnav;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failed = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failed += !pass;
}

void skip(const std::string& name, const std::string& why) { std::cout << "SKIP " << name << ": " << why << std::endl; }

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// rbf kernel written out independently of the library.
Matrix oracle_kernel(const Matrix& p, double gamma) {
  Matrix k(p.rows(), p.rows());
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.rows(); ++j) k(i, j) = std::exp(-gamma * (p.row(i) - p.row(j)).squaredNorm());
  return k;
}

// ---------------------------------------------------------------------------

void pca_criterion() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  Matrix x(200, 50);
  for (Index j = 0; j < 50; ++j)
    for (Index i = 0; i < 200; ++i) x(i, j) = std::pow(0.92, static_cast<double>(j)) * g(rng);
  const Matrix mix = Eigen::HouseholderQR<Matrix>(Matrix::NullaryExpr(50, 50, [&]() { return g(rng); })).householderQ();
  x = x * mix;

  const Index d = 20;
  const auto t0 = Clock::now();
  const PcaResult r = fit_pca(x, d);
  const double secs = seconds_since(t0);

  const Matrix c = x.rowwise() - x.colwise().mean();
  const oracle::Eigen e = oracle::jacobi_eigen(c.transpose() * c / 199.0);
  double eig_err = 0.0;
  Matrix ref(d, 50);
  for (Index i = 0; i < d; ++i) {
    eig_err = std::max(eig_err, std::abs(r.space.variances(i) - e.values(49 - i)));
    ref.row(i) = e.vectors.col(49 - i).transpose();
  }
  const double angle = oracle::max_principal_angle(r.space.projection, ref);
  report("pca", eig_err <= 1e-8 && angle < 1e-6 && secs < 1.0,
         "200x50, d=20: max eigenvalue error " + num(eig_err) + " (<= 1e-8), max principal angle " + num(angle) +
             " (< 1e-6), " + num(secs) + " s (< 1 s)");
}

void svr_criterion() {
  double worst_obj = 0.0, worst_kkt = 0.0;
  int fits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticParams p;
    p.seed = seed;
    p.n_classes = 6;
    p.n_seen = 5;
    p.gt_attributes = 3;
    p.dim = 12;
    p.per_class = 10;
    const SyntheticData syn = generate_synthetic(p);
    const auto& ds = syn.dataset;
    const MutualSpace space = fit_pca(select_rows(ds.instances, ds.training_indices()), 4).space;
    const ExemplarSet ex = compute_exemplars(space, ds);
    const ClassAttributeMatrix m(syn.ground_truth.values, syn.ground_truth.attribute_names);
    ExemHyper hyper;
    hyper.c = seed % 2 ? 10.0 : 0.5;
    const ExemModel model = train_exem(m, ex, hyper);
    Matrix protos(5, 3);
    for (Index i = 0; i < 5; ++i) protos.row(i) = m.values().row(ex.classes[static_cast<size_t>(i)]).cast<double>();
    const Matrix k = oracle_kernel(protos, model.gamma());
    for (Index j = 0; j < model.dim(); ++j) {
      const Vector z = ex.points.col(j);
      const double eps = model.epsilons()(j);
      const oracle::SvrSolution ref = oracle::svr_face_enumeration(k, z, hyper.c, eps);
      const SvrFit& fit = model.fits()[static_cast<size_t>(j)];
      worst_obj = std::max(worst_obj, std::abs(oracle::svr_objective(k, z, eps, fit.coef) - ref.objective));
      worst_kkt = std::max(worst_kkt, oracle::svr_kkt_gap(k, z, hyper.c, eps, fit.coef));
      ++fits;
    }
  }
  report("svr", worst_obj <= 1e-4 && worst_kkt <= 1e-4,
         std::to_string(fits) + " per-dimension fits on 5 classes x 3 attributes: max objective gap " + num(worst_obj) +
             " (<= 1e-4), max KKT violation " + num(worst_kkt) + " (<= 1e-4)");
}

void nearest_exemplar_criterion() {
  SyntheticParams p;
  p.seed = 11;
  p.n_classes = 20;
  p.n_seen = 15;
  p.gt_attributes = 8;
  p.dim = 40;
  p.per_class = 60;
  const SyntheticData syn = generate_synthetic(p);
  const auto& ds = syn.dataset;
  const MutualSpace space = fit_pca(select_rows(ds.instances, ds.training_indices()), 16).space;
  const ExemplarSet ex = compute_exemplars(space, ds);
  const ClassAttributeMatrix m(syn.ground_truth.values, syn.ground_truth.attribute_names);
  const ExemModel model = train_exem(m, ex, ExemHyper{});
  std::vector<int> all(static_cast<size_t>(ds.n_classes()));
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> pick(0, ds.size() - 1);
  int agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index row = pick(rng);
    const std::vector<int>& cands = t % 2 ? ds.unseen_classes : all;
    const int got = classify(model, space, ds.instances.row(row).transpose(), cands, m);
    Vector x(space.dim());
    for (Index a = 0; a < space.dim(); ++a) {
      double s = 0.0;
      for (Index b = 0; b < ds.dim(); ++b) s += space.projection(a, b) * (ds.instances(row, b) - space.mean(b));
      x(a) = s;
    }
    int best = -1;
    double best_d = 0.0;
    for (int c : cands) {
      const Vector e = model.predict(m.prototype(c));
      double s = 0.0;
      for (Index j = 0; j < x.size(); ++j) s += (x(j) - e(j)) * (x(j) - e(j));
      if (best < 0 || s < best_d) best = c, best_d = s;
    }
    agree += got == best;
  }
  report("nearest-exemplar", agree == 1000, std::to_string(agree) + "/1000 agree with a brute-force scan (= 100%)");
}

void s3vm_criterion() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  auto exemplars = [&](int n, int d) {
    ExemplarSet ex;
    ex.points = Matrix::NullaryExpr(n, d, [&]() { return g(rng); });
    for (int i = 0; i < n; ++i) ex.classes.push_back(i);
    return ex;
  };
  auto fixed_labels = [&](int n, int count) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LabelMap fixed{{order[0], 1}, {order[1], -1}};
    for (int i = 2; i < count; ++i) fixed[order[static_cast<size_t>(i)]] = rng() % 2 ? 1 : -1;
    return fixed;
  };

  int optimal = 0;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int n = 8 + static_cast<int>(rng() % 7);
    const int d = 2 + static_cast<int>(rng() % 4);
    const ExemplarSet ex = exemplars(n, d);
    const LabelMap fixed = fixed_labels(n, 2 + static_cast<int>(rng() % 2));
    std::vector<int> fv(static_cast<size_t>(n), 0);
    for (const auto& [c, l] : fixed) fv[static_cast<size_t>(c)] = l;
    const DraftAttribute draft = recommend_labels(ex, fixed, {});
    const oracle::Enumerated best = oracle::exhaustive_max_margin(ex.points, fv);
    const double achieved = oracle::hull_distance(ex.points, draft.recommended);
    const double rel = best.margin > 0 ? (best.margin - achieved) / best.margin : 0.0;
    worst = std::max(worst, rel);
    optimal += best.good && rel <= 1e-6;
  }
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 3 + static_cast<int>(rng() % 12);
    const int d = 1 + static_cast<int>(rng() % 6);
    const ExemplarSet ex = exemplars(n, d);
    const LabelMap fixed = fixed_labels(n, 2 + static_cast<int>(rng() % (n - 1)));
    const DraftAttribute draft = recommend_labels(ex, fixed, {});
    for (const auto& [c, l] : fixed) violations += draft.label_of(c) != l;
  }
  report("s3vm", optimal == 20 && violations == 0,
         std::to_string(optimal) + "/20 instances at the exhaustive maximum margin (worst relative shortfall " +
             num(worst) + ", tolerance 1e-6); " + std::to_string(violations) +
             " fixed-label violations in 1000 trials (= 0)");
}

void anchored_criterion() {
  SyntheticParams p;
  p.seed = 3;
  p.n_classes = 8;
  p.n_seen = 6;
  p.gt_attributes = 8;
  p.dim = 32;
  p.per_class = 30;
  const SyntheticData syn = generate_synthetic(p);
  const auto& ds = syn.dataset;
  const MutualSpace space = fit_pca(select_rows(ds.instances, ds.training_indices()), 16).space;
  const ExemplarSet ex = compute_exemplars(space, ds);
  const ClassAttributeMatrix m(syn.ground_truth.values, syn.ground_truth.attribute_names);
  const ExemModel model = train_exem(m, ex, ExemHyper{});
  const SemanticLayout base = base_layout(space, ds, ex, 1, LayoutOptions{});

  bool anchors_same = true, kl_ok = true;
  double worst_kl_rise = 0.0;
  SemanticLayout cur = base;
  for (int i = 0; i < 15; ++i) {
    const Matrix prev = cur.prototype_points;
    cur = reproject_prototypes(cur, model, m, cur.has_prototypes() ? &prev : nullptr);
    anchors_same = anchors_same && cur.instance_points == base.instance_points && cur.exemplar_points == base.exemplar_points;
    kl_ok = kl_ok && cur.kl_final <= cur.kl_initial;
    worst_kl_rise = std::max(worst_kl_rise, cur.kl_final - cur.kl_initial);
  }

  // Prototypes whose high-dimensional point is exactly the exemplar.
  Matrix anchors_low(base.anchor_high.rows(), 2);
  anchors_low << base.instance_points, base.exemplar_points;
  const Matrix init = base.exemplar_points.rowwise() + Eigen::RowVector2d(0.02 * base.diameter, -0.02 * base.diameter);
  const AnchoredResult r = anchored_reproject(base.anchor_high, anchors_low, ex.points, init, AnchoredOptions{});
  double worst_frac = 0.0;
  for (Index c = 0; c < ex.points.rows(); ++c)
    worst_frac = std::max(worst_frac, (r.movable.row(c) - base.exemplar_points.row(c)).norm() / base.diameter);

  report("anchored-reprojection", anchors_same && kl_ok && worst_frac <= 0.05,
         std::string("anchors bit-identical over 15 reprojections: ") + (anchors_same ? "yes" : "no") +
             "; final KL <= initial KL in every run: " + (kl_ok ? "yes" : "no (max rise " + num(worst_kl_rise) + ")") +
             "; prototype-at-exemplar offset " + num(100 * worst_frac) + "% of diameter (<= 5%)");
}

void contour_criterion() {
  double lo = 1.0, hi = 0.0;
  bool ok = true;
  int contours = 0;
  for (double target : {0.5, 0.7, 0.8, 0.9}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::mt19937_64 rng(seed * 31 + static_cast<std::uint64_t>(target * 10));
      std::normal_distribution<double> g;
      Eigen::Matrix2d l;
      l << 1.0 + 0.3 * seed, 0.0, 0.4 * (static_cast<double>(seed) - 2.0), 0.8;
      Matrix pts(400, 2);
      for (Index i = 0; i < 400; ++i) pts.row(i) = (l * Eigen::Vector2d(g(rng), g(rng))).transpose();
      ContourOptions opt;
      opt.mass_target = target;
      const ClassContour c = density_contour(0, pts, layout_diameter(pts), opt);
      int inside = 0;
      for (Index i = 0; i < 400; ++i) inside += point_in_contour(c, pts.row(i).transpose());
      const double mass = inside / 400.0;
      lo = std::min(lo, mass - target);
      hi = std::max(hi, mass - target);
      ok = ok && mass >= target - 0.05 && mass <= target + 0.10;
      ++contours;
    }
  }
  report("contours", ok,
         std::to_string(contours) + " seeded Gaussian classes at targets 0.5/0.7/0.8/0.9: mass minus target in [" +
             num(lo, 3) + ", " + num(hi, 3) + "] (allowed [-0.05, +0.10])");
}

ClassContour square(int cls, double x, double y, double side) {
  ClassContour c;
  c.class_index = cls;
  c.polygons.push_back({Point2(x, y), Point2(x + side, y), Point2(x + side, y + side), Point2(x, y + side), Point2(x, y)});
  return c;
}

void pattern_criterion() {
  IntMatrix same(2, 2), diff(2, 2);
  same << 1, 0, 1, 0;
  diff << 1, 0, 1, 1;
  const ClassAttributeMatrix eq(same, {"u", "v"}), ne(diff, {"u", "v"});
  const ClassContour a = square(0, 0, 0, 1), b = square(1, 3, 0, 1), b_over = square(1, 0.1, 0.1, 1);
  struct Case {
    const char* what;
    Point2 pa, pb;
    const ClassAttributeMatrix* m;
    const ClassContour* cb;
    PatternLabel expect;
  };
  const Case cases[] = {
      {"equal prototypes outside both", Point2(2, 0.5), Point2(2, 0.5), &eq, &b, PatternLabel::p1},
      {"equal prototypes inside A", Point2(0.4, 0.5), Point2(0.6, 0.5), &eq, &b, PatternLabel::p2},
      {"prototype A outside everything", Point2(10, 10), Point2(3.5, 0.5), &ne, &b, PatternLabel::p3},
      {"both prototypes in A", Point2(0.5, 0.5), Point2(0.2, 0.2), &ne, &b, PatternLabel::p4},
      {"prototypes swapped", Point2(3.5, 0.5), Point2(0.5, 0.5), &ne, &b, PatternLabel::p5},
      {"contours overlap", Point2(0.5, 0.5), Point2(3.5, 0.5), &ne, &b_over, PatternLabel::overlap},
      {"each prototype in its own contour", Point2(0.5, 0.5), Point2(3.5, 0.5), &ne, &b, PatternLabel::aligned},
  };
  int right = 0;
  std::string wrong;
  for (const auto& c : cases) {
    const PairPattern got = detect_pair_pattern(0, 1, a, *c.cb, c.pa, c.pb, *c.m);
    if (got.label == c.expect) ++right;
    else wrong += std::string(" [") + c.what + ": got " + to_string(got.label) + "]";
  }
  report("pattern-detector", right == 7, std::to_string(right) + "/7 fixtures classified correctly" + wrong);
}

// ---------------------------------------------------------------------------

struct Bench {
  std::vector<double> final_acc;
  std::vector<double> mean_curve;  // mean test accuracy over attribute counts 1..15
};

void benchmark_criterion() {
  const int seeds = 10, attrs = 15;
  Bench hint, random;
  const auto t0 = Clock::now();
  for (int s = 0; s < seeds; ++s) {
    SyntheticParams p;
    p.seed = static_cast<std::uint64_t>(s);
    p.n_classes = 50;
    p.n_seen = 40;
    p.gt_attributes = 20;
    p.dim = 256;
    p.per_class = 50;
    p.noise = 0.1;
    const SyntheticData syn = generate_synthetic(p);
    auto ds = std::make_shared<const FeatureDataset>(syn.dataset);
    for (OracleMode mode : {OracleMode::hint_guided, OracleMode::random}) {
      SessionConfig cfg;
      cfg.d = 64;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.compute_layout = false;
      Session session(ds, cfg);
      const auto rows = run_oracle_session(session, syn.ground_truth, attrs, mode, cfg.seed);
      Bench& b = mode == OracleMode::hint_guided ? hint : random;
      b.final_acc.push_back(rows.back().test_acc.value_or(0.0));
      double area = 0.0;
      for (const auto& r : rows) area += r.test_acc.value_or(0.0);
      b.mean_curve.push_back(area / static_cast<double>(rows.size()));
    }
  }
  const double secs = seconds_since(t0);
  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  const double h = mean(hint.final_acc), r = mean(random.final_acc);
  report("oracle-benchmark", h >= 60.0 && h >= r && secs < 600.0,
         "10 seeds, 50 classes (40 seen), D=256, d=64, 15 attributes: hint-guided mean test accuracy " + num(h) +
             "% (>= 60%), random-attribute mean " + num(r) + "% (hint-guided >= random), " + num(secs, 3) +
             " s (< 600 s); mean accuracy over attribute counts 1..15: hint-guided " + num(mean(hint.mean_curve)) +
             "%, random " + num(mean(random.mean_curve)) + "%");
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

void replay_criterion() {
  const fs::path root = fs::temp_directory_path() / "zsnav_acceptance_replay";
  fs::remove_all(root);
  int logs = 0, exact = 0;
  auto check = [&](const Session& s, const std::string& tag) {
    const fs::path dir = root / tag, again = root / (tag + "_replayed");
    s.save(dir);
    const Session r = Session::replay(s.dataset_ptr(), SessionLog::from_jsonl(slurp(dir / "session_log.jsonl")));
    r.save(again);
    ++logs;
    exact += slurp(dir / "matrix.csv") == slurp(again / "matrix.csv") &&
             slurp(dir / "metrics.csv") == slurp(again / "metrics.csv");
  };

  for (int s = 0; s < 3; ++s) {
    SyntheticParams p;
    p.seed = 100 + static_cast<std::uint64_t>(s);
    p.n_classes = 20;
    p.n_seen = 15;
    p.gt_attributes = 12;
    p.dim = 64;
    p.per_class = 20;
    const SyntheticData syn = generate_synthetic(p);
    auto ds = std::make_shared<const FeatureDataset>(syn.dataset);
    for (OracleMode mode : {OracleMode::hint_guided, OracleMode::random}) {
      SessionConfig cfg;
      cfg.d = 24;
      cfg.seed = p.seed;
      cfg.compute_layout = false;
      Session session(ds, cfg);
      run_oracle_session(session, syn.ground_truth, 8, mode, cfg.seed);
      check(session, "s" + std::to_string(s) + "_" + to_string(mode));
    }
  }

  // An interactive log with feedback, reversal, a cancelled commit, undo and layouts, driven through the API.
  {
    SyntheticParams p;
    p.seed = 200;
    p.n_classes = 12;
    p.n_seen = 9;
    p.gt_attributes = 8;
    p.dim = 32;
    p.per_class = 15;
    const SyntheticData syn = generate_synthetic(p);
    auto ds = std::make_shared<const FeatureDataset>(syn.dataset);
    SessionConfig cfg;
    cfg.d = 16;
    cfg.seed = 9;
    cfg.layout.tsne.iterations = 250;
    cfg.layout.tsne.exaggeration_iterations = 100;
    cfg.layout.contour.grid = 64;
    cfg.anchored.iterations = 80;
    const fs::path dir = root / "interactive";
    {
      ApiService api(std::make_unique<Session>(ds, cfg), dir);
      auto post = [&](const std::string& path, const Json& body) { return api.handle({"POST", path, {}, body.dump(), ""}); };
      auto name = [&](int c) { return ds->class_names[static_cast<size_t>(c)]; };
      for (Index a = 0; a < 4; ++a) {
        Json fixed = Json::object(), unseen = Json::object();
        for (int c : ds->seen_classes) {
          const int v = syn.ground_truth.values(c, a) ? 1 : -1;
          if (fixed.size() < 2 && !fixed.contains(name(c)) &&
              std::none_of(fixed.begin(), fixed.end(), [&](const Json& x) { return x.get<int>() == v; }))
            fixed[name(c)] = v;
        }
        for (int c : ds->unseen_classes) unseen[name(c)] = syn.ground_truth.values(c, a);
        if (fixed.size() < 2) continue;
        post("/api/draft", Json{{"fixed", fixed}});
        post("/api/draft/reverse", Json::object());
        Json edits = Json::object();
        for (int c : ds->seen_classes) edits[name(c)] = syn.ground_truth.values(c, a) ? 1 : -1;
        post("/api/draft/feedback", Json{{"edits", edits}});
        post("/api/commit", Json{{"name", "a" + std::to_string(a)}, {"unseen_labels", unseen}});
        api.wait_idle();
        if (a == 2) post("/api/undo", Json::object());
      }
      api.flush();
    }
    const Session r = Session::replay(ds, SessionLog::from_jsonl(slurp(dir / "session_log.jsonl")));
    r.save(root / "interactive_replayed");
    ++logs;
    exact += slurp(dir / "matrix.csv") == slurp(root / "interactive_replayed" / "matrix.csv") &&
             slurp(dir / "metrics.csv") == slurp(root / "interactive_replayed" / "metrics.csv");
  }
  report("replay-determinism", exact == logs,
         std::to_string(exact) + "/" + std::to_string(logs) +
             " session logs replay to byte-identical matrix.csv and metrics.csv");
  fs::remove_all(root);
}

void awa2_criterion() {
  const char* dir_env = std::getenv("ZSNAV_AWA2_DIR");
  if (!dir_env || !*dir_env) {
    skip("awa2-evaluate", "set ZSNAV_AWA2_DIR to a directory with features.bin or features.csv, split.json and matrix.csv");
    return;
  }
  const fs::path dir(dir_env);
  const fs::path features = fs::exists(dir / "features.bin") ? dir / "features.bin" : dir / "features.csv";
  const auto t0 = Clock::now();
  auto ds = std::make_shared<const FeatureDataset>(load_feature_table(features, read_split(dir / "split.json")));
  const GroundTruthMatrix aligned = align_ground_truth(read_binary_table(dir / "matrix.csv"), *ds);
  const ClassAttributeMatrix matrix(aligned.values, aligned.attribute_names);
  const PcaResult pca = fit_pca(select_rows(ds->instances, ds->training_indices()), std::min<Index>(500, ds->dim()));
  const ExemplarSet ex = compute_exemplars(pca.space, *ds);
  const ExemModel model = train_exem(matrix, ex, ExemHyper{});
  const Accuracy acc = evaluate(model, pca.space, *ds, matrix);
  const double test = acc.test.value_or(0.0);
  report("awa2-evaluate", std::abs(test - 57.079) <= 5.0,
         "test accuracy " + num(test) + "% vs 57.079% (+-5), " + std::to_string(matrix.n_attributes()) + " attributes, " +
             num(seconds_since(t0), 3) + " s");
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const std::pair<const char*, void (*)()> criteria[] = {
      {"pca", pca_criterion},
      {"svr", svr_criterion},
      {"nearest-exemplar", nearest_exemplar_criterion},
      {"s3vm", s3vm_criterion},
      {"anchored-reprojection", anchored_criterion},
      {"contours", contour_criterion},
      {"pattern-detector", pattern_criterion},
      {"oracle-benchmark", benchmark_criterion},
      {"replay-determinism", replay_criterion},
      {"awa2-evaluate", awa2_criterion},
  };
  for (const auto& [name, run] : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(name, false, std::string("threw: ") + e.what());
    }
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << failed << " failing, " << num(seconds_since(t0), 3) << " s total"
            << std::endl;
  return failed ? 1 : 0;
}
