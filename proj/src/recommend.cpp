#include "zsnav/recommend.hpp"

#include "zsnav/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace zsnav {

int DraftAttribute::label_of(int cls) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), cls);
  if (it == classes.end() || *it != cls) fail(ErrorKind::invalid_argument, "class is not part of the draft");
  return recommended[static_cast<size_t>(it - classes.begin())];
}

LabelMap DraftAttribute::recommended_map() const {
  LabelMap out;
  for (size_t i = 0; i < classes.size(); ++i) out[classes[i]] = recommended[i];
  return out;
}

IntVector DraftAttribute::as_column() const {
  IntVector col(static_cast<Index>(recommended.size()));
  for (size_t i = 0; i < recommended.size(); ++i) col(static_cast<Index>(i)) = recommended[i] > 0 ? 1 : 0;
  return col;
}

bool matches_labeling(const std::vector<int>& labels, const IntVector& column01) {
  if (static_cast<Index>(labels.size()) != column01.size()) return false;
  bool same = true, complement = true;
  for (size_t i = 0; i < labels.size(); ++i) {
    const int bit = labels[i] > 0 ? 1 : 0;
    same = same && bit == column01(static_cast<Index>(i));
    complement = complement && bit != column01(static_cast<Index>(i));
  }
  return same || complement;
}

bool balance_feasible(const std::vector<int>& labels, const std::vector<bool>& is_fixed) {
  int n_free = 0, pos = 0, neg = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (is_fixed[i]) continue;
    ++n_free;
    (labels[i] > 0 ? pos : neg)++;
  }
  return n_free < 2 || (pos > 0 && neg > 0);
}

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct HardFit {
  Vector coef;  // w = points' * coef
  double bias = 0.0;
  double w_norm = 0.0;
  bool separable = false;
  double margin() const { return separable && w_norm > 0 ? 2.0 / w_norm : 0.0; }
};

HardFit hard_margin(const Matrix& gram, const std::vector<int>& labels, const RecommendOptions& opt) {
  IntVector y(static_cast<Index>(labels.size()));
  for (size_t i = 0; i < labels.size(); ++i) y(static_cast<Index>(i)) = labels[i];
  const SvcFit fit = fit_svc(gram, y, opt.hard_margin_c, opt.hard_margin_smo);
  HardFit h;
  h.coef = fit.coef;
  h.bias = fit.bias;
  h.w_norm = fit.w_norm;
  const Vector f = gram * fit.coef;
  h.separable = true;
  for (Index i = 0; i < y.size(); ++i)
    if (y(i) * (f(i) + fit.bias) < 1.0 - 1e-6) h.separable = false;
  return h;
}

// Whitening by a single scalar keeps every decision scale-equivariant.
struct Normalized {
  Matrix points;
  Vector center;
  double scale = 1.0;
  Matrix gram;
};

Normalized normalize(const Matrix& raw) {
  Normalized n;
  n.center = column_mean(raw);
  n.points = raw.rowwise() - n.center.transpose();
  const double rms = std::sqrt(n.points.squaredNorm() / static_cast<double>(std::max<Index>(raw.rows(), 1)));
  n.scale = rms > 0.0 ? rms : 1.0;
  n.points /= n.scale;
  n.gram = n.points * n.points.transpose();
  return n;
}

// Continuous S3VM relaxation; returns decision values for every point.
Vector solve_relaxation(const Matrix& x, const std::vector<int>& labels, const std::vector<bool>& is_fixed,
                        const RecommendOptions& opt) {
  const Index n = x.rows();
  const Index d = x.cols();
  std::vector<Index> lab, unl;
  double target = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (is_fixed[static_cast<size_t>(i)]) {
      lab.push_back(i);
      target += labels[static_cast<size_t>(i)];
    } else {
      unl.push_back(i);
    }
  }
  target /= static_cast<double>(lab.size());
  const bool balanced = opt.balance && !unl.empty();

  // Balance: b = target - w' mean_U, i.e. f(x) = w'(x - mean_U) + target. Otherwise b is a free variable.
  Vector anchor = Vector::Zero(d);
  if (balanced) {
    for (Index j : unl) anchor += x.row(j).transpose();
    anchor /= static_cast<double>(unl.size());
  }
  const Matrix xc = x.rowwise() - anchor.transpose();
  const Index n_var = balanced ? d : d + 1;
  const double cl = opt.labeled_cost / static_cast<double>(lab.size());
  const double cu = unl.empty() ? 0.0 : opt.unlabeled_cost / static_cast<double>(unl.size());
  const double gh = opt.hinge_sharpness;
  const double su = opt.unlabeled_sharpness;

  auto decision = [&](const Vector& v) -> Vector {
    Vector f = xc * v.head(d);
    f.array() += balanced ? target : v(d);
    return f;
  };

  double lambda = 0.0;
  const Objective objective = [&](const Vector& v, Vector& grad) {
    const Vector f = decision(v);
    double value = 0.5 * v.head(d).squaredNorm();
    Vector df = Vector::Zero(n);
    for (Index i : lab) {
      const double y = labels[static_cast<size_t>(i)];
      const double z = gh * (1.0 - y * f(i));
      value += cl * softplus(z) / gh;
      df(i) = -cl * y * sigmoid(z);
    }
    for (Index j : unl) {
      const double e = std::exp(-su * f(j) * f(j));
      value += lambda * cu * e;
      df(j) = lambda * cu * (-2.0 * su * f(j) * e);
    }
    grad.resize(n_var);
    grad.head(d) = v.head(d) + xc.transpose() * df;
    if (!balanced) grad(d) = df.sum();
    return value;
  };

  Vector v = Vector::Zero(n_var);
  v = minimize_lbfgs(objective, v, opt.lbfgs).x;  // supervised start
  for (double stage : opt.anneal) {
    lambda = stage;
    v = minimize_lbfgs(objective, v, opt.lbfgs).x;
  }
  return decision(v);
}

struct Scored {
  std::vector<int> labels;
  bool good = false;
  double margin = 0.0;
};

Scored score(const Normalized& nz, std::vector<int> labels, const std::vector<bool>& is_fixed, const RecommendOptions& opt) {
  Scored s;
  s.margin = hard_margin(nz.gram, labels, opt).margin();
  s.good = s.margin > 0.0 && (!opt.balance || balance_feasible(labels, is_fixed));
  s.labels = std::move(labels);
  return s;
}

bool better(const Scored& a, const Scored& b) {
  if (a.good != b.good) return a.good;
  return a.margin > b.margin * (1.0 + 1e-9) + 1e-15;
}

Scored label_switching(const Normalized& nz, Scored current, const std::vector<bool>& is_fixed, const RecommendOptions& opt) {
  const size_t n = current.labels.size();
  for (size_t pass = 0; pass <= n; ++pass) {
    Scored best = current;
    for (size_t j = 0; j < n; ++j) {
      if (is_fixed[j]) continue;
      auto labels = current.labels;
      labels[j] = -labels[j];
      Scored cand = score(nz, std::move(labels), is_fixed, opt);
      if (better(cand, best)) best = std::move(cand);
    }
    if (best.labels == current.labels) break;
    current = std::move(best);
  }
  return current;
}

// Depth-first branch and bound. The margin of a partial labeling bounds every completion,
// since adding points can only shrink the gap between the two hulls.
class ExactSearch {
 public:
  ExactSearch(const Normalized& nz, const std::vector<int>& pinned, const std::vector<bool>& is_fixed,
              const std::vector<IntVector>& excluded, const RecommendOptions& opt)
      : nz_(nz), pinned_(pinned), is_fixed_(is_fixed), excluded_(excluded), opt_(opt) {}

  std::optional<Scored> run(const std::vector<int>& guide, const Vector& confidence, std::optional<Scored> incumbent) {
    best_ = std::move(incumbent);
    order_.clear();
    for (size_t i = 0; i < pinned_.size(); ++i)
      if (!is_fixed_[i]) order_.push_back(i);
    std::stable_sort(order_.begin(), order_.end(), [&](size_t a, size_t b) {
      return std::abs(confidence(static_cast<Index>(a))) > std::abs(confidence(static_cast<Index>(b)));
    });
    labels_ = pinned_;
    guide_ = guide;
    active_.assign(pinned_.size(), false);
    for (size_t i = 0; i < pinned_.size(); ++i) active_[i] = is_fixed_[i];
    descend(0);
    return best_;
  }

 private:
  double partial_margin() const {
    std::vector<Index> rows;
    std::vector<int> sub;
    for (size_t i = 0; i < labels_.size(); ++i)
      if (active_[i]) rows.push_back(static_cast<Index>(i)), sub.push_back(labels_[i]);
    Matrix gram(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (Index a = 0; a < gram.rows(); ++a)
      for (Index b = 0; b < gram.cols(); ++b) gram(a, b) = nz_.gram(rows[static_cast<size_t>(a)], rows[static_cast<size_t>(b)]);
    return hard_margin(gram, sub, opt_).margin();
  }

  bool beats_incumbent(double margin) const {
    return !best_ || margin > best_->margin * (1.0 + 1e-9) + 1e-15;
  }

  void descend(size_t depth) {
    const double bound = partial_margin();
    if (bound <= 0.0 || !beats_incumbent(bound)) return;
    if (depth == order_.size()) {
      if (opt_.balance && !balance_feasible(labels_, is_fixed_)) return;
      for (const auto& col : excluded_)
        if (matches_labeling(labels_, col)) return;
      best_ = Scored{labels_, true, bound};
      return;
    }
    const size_t j = order_[depth];
    active_[j] = true;
    const int first = guide_[j] >= 0 ? 1 : -1;
    for (int label : {first, -first}) {
      labels_[j] = label;
      descend(depth + 1);
    }
    active_[j] = false;
    labels_[j] = pinned_[j];
  }

  const Normalized& nz_;
  const std::vector<int>& pinned_;
  const std::vector<bool>& is_fixed_;
  const std::vector<IntVector>& excluded_;
  const RecommendOptions& opt_;
  std::vector<size_t> order_;
  std::vector<int> labels_, guide_;
  std::vector<bool> active_;
  std::optional<Scored> best_;
};

bool excluded_match(const std::vector<int>& labels, const std::vector<IntVector>& excluded) {
  return std::any_of(excluded.begin(), excluded.end(),
                     [&](const IntVector& col) { return matches_labeling(labels, col); });
}

}  // namespace

double labeling_margin(const Matrix& points, const std::vector<int>& labels, const RecommendOptions& options) {
  const Normalized nz = normalize(points);
  return hard_margin(nz.gram, labels, options).margin() * nz.scale;
}

DraftAttribute recommend_labels(const ExemplarSet& exemplars, const LabelMap& fixed,
                                const std::vector<IntVector>& excluded, const RecommendOptions& opt,
                                const std::vector<int>* warm_start) {
  const Index n = exemplars.size();
  bool has_pos = false, has_neg = false;
  for (const auto& [cls, label] : fixed) {
    if (exemplars.row_of(cls) < 0) fail(ErrorKind::invalid_argument, "fixed class " + std::to_string(cls) + " is not a seen class");
    if (label != 1 && label != -1) fail(ErrorKind::invalid_argument, "fixed labels must be +1 or -1");
    has_pos = has_pos || label > 0;
    has_neg = has_neg || label < 0;
  }
  if (!has_pos || !has_neg)
    fail(ErrorKind::invalid_argument, "fixed labels need at least one positive and one negative class");
  for (const auto& col : excluded) require(col.size() == n, "excluded labeling has the wrong length");

  const Normalized nz = normalize(exemplars.points);
  std::vector<int> pinned_labels(static_cast<size_t>(n), 0);
  std::vector<bool> analyst_fixed(static_cast<size_t>(n), false);
  for (const auto& [cls, label] : fixed) {
    const auto r = static_cast<size_t>(exemplars.row_of(cls));
    pinned_labels[r] = label;
    analyst_fixed[r] = true;
  }
  std::vector<bool> is_fixed = analyst_fixed;

  DraftAttribute draft;
  draft.classes = exemplars.classes;
  draft.fixed_labels = fixed;
  draft.excluded_labelings = excluded;

  for (Index attempt = 0; attempt <= n; ++attempt) {
    std::vector<int> labels(static_cast<size_t>(n));
    const bool any_free = std::find(is_fixed.begin(), is_fixed.end(), false) != is_fixed.end();
    Vector f = Vector::Zero(n);
    if (any_free) {
      f = solve_relaxation(nz.points, pinned_labels, is_fixed, opt);
      for (Index i = 0; i < n; ++i)
        labels[static_cast<size_t>(i)] = is_fixed[static_cast<size_t>(i)] ? pinned_labels[static_cast<size_t>(i)] : (f(i) >= 0.0 ? 1 : -1);
    } else {
      labels = pinned_labels;
    }

    Scored best = score(nz, labels, is_fixed, opt);
    if (opt.refine && any_free) best = label_switching(nz, std::move(best), is_fixed, opt);
    if (warm_start && static_cast<Index>(warm_start->size()) == n && opt.refine && any_free) {
      auto start = *warm_start;
      for (Index i = 0; i < n; ++i)
        if (is_fixed[static_cast<size_t>(i)]) start[static_cast<size_t>(i)] = pinned_labels[static_cast<size_t>(i)];
      Scored warm = label_switching(nz, score(nz, std::move(start), is_fixed, opt), is_fixed, opt);
      if (!better(best, warm)) best = std::move(warm);
    }
    const auto n_free = std::count(is_fixed.begin(), is_fixed.end(), false);
    if (any_free && n_free <= opt.exact_limit) {
      std::optional<Scored> incumbent;
      if (best.good && !excluded_match(best.labels, excluded)) incumbent = best;
      ExactSearch search(nz, pinned_labels, is_fixed, excluded, opt);
      if (auto exact = search.run(best.labels, f, incumbent)) best = std::move(*exact);
    }
    labels = best.labels;

    const HardFit fit = hard_margin(nz.gram, labels, opt);
    draft.recommended = labels;
    const Vector w_n = nz.points.transpose() * fit.coef;
    draft.w = w_n / nz.scale;
    draft.b = fit.bias - draft.w.dot(nz.center);
    draft.margin = fit.w_norm > 0.0 ? 2.0 * nz.scale / fit.w_norm : 0.0;
    draft.separable = fit.separable;
    draft.decision = (exemplars.points * draft.w).array() + draft.b;

    if (!excluded_match(labels, excluded)) return draft;

    // Flip and pin the free class closest to the hyperplane, then solve again.
    Index flip = -1;
    double closest = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (is_fixed[static_cast<size_t>(i)]) continue;
      const double dist = std::abs(draft.decision(i));
      if (flip < 0 || dist < closest) flip = i, closest = dist;
    }
    if (flip < 0) {
      draft.conflicts_with_existing = true;
      return draft;
    }
    pinned_labels[static_cast<size_t>(flip)] = -labels[static_cast<size_t>(flip)];
    is_fixed[static_cast<size_t>(flip)] = true;
  }
  fail(ErrorKind::conflict, "no distinct attribute found; revise the fixed labels");
}

DraftAttribute apply_feedback(const DraftAttribute& draft, const LabelMap& edits, const ExemplarSet& exemplars,
                              const RecommendOptions& options) {
  LabelMap fixed = draft.fixed_labels;
  for (const auto& [cls, label] : edits) {
    if (exemplars.row_of(cls) < 0) fail(ErrorKind::invalid_argument, "edit refers to a class that is not seen");
    fixed[cls] = label;
  }
  std::vector<int> warm = draft.recommended;
  for (const auto& [cls, label] : edits) warm[static_cast<size_t>(exemplars.row_of(cls))] = label;
  DraftAttribute next = recommend_labels(exemplars, fixed, draft.excluded_labelings, options, &warm);
  next.origin_hint = draft.origin_hint;
  return next;
}

DraftAttribute reverse(const DraftAttribute& draft) {
  DraftAttribute r = draft;
  for (auto& [cls, label] : r.fixed_labels) label = -label;
  for (auto& label : r.recommended) label = -label;
  r.w = -draft.w;
  r.b = -draft.b;
  r.decision = -draft.decision;
  return r;
}

}  // namespace zsnav
