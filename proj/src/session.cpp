#include "zsnav/session.hpp"

#include "zsnav/linalg.hpp"
#include "zsnav/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>
#include <sstream>

namespace zsnav {

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::idle: return "idle";
    case Phase::drafting: return "drafting";
    case Phase::awaiting_unseen: return "awaiting-unseen";
    case Phase::retraining: return "retraining";
  }
  return "idle";
}

const char* to_string(OracleMode mode) { return mode == OracleMode::random ? "random" : "hint-guided"; }

OracleMode parse_oracle_mode(const std::string& text) {
  if (text == "hint-guided" || text == "hint") return OracleMode::hint_guided;
  if (text == "random") return OracleMode::random;
  fail(ErrorKind::invalid_argument, "unknown oracle mode '" + text + "' (expected hint-guided or random)");
}

void SessionLog::append(Json event) {
  event["seq"] = static_cast<long>(events_.size());
  events_.push_back(std::move(event));
}

std::string SessionLog::to_jsonl() const {
  std::string out;
  for (const auto& e : events_) out += e.dump() + "\n";
  return out;
}

SessionLog SessionLog::from_jsonl(const std::string& text) {
  SessionLog log;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.events_.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::parse, "session log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<Hint> make_hints(const ClassAttributeMatrix& matrix, const ExemplarSet& exemplars,
                             const ConfusionMatrix* confusion, const FeatureDataset& ds, int k) {
  if (exemplars.size() < 2) return {};
  auto hints = generate_hints(matrix, exemplars, confusion, k);
  for (auto& h : hints) h.question_text = render_question(h, ds.class_names, matrix.attribute_names());
  return hints;
}

Json hints_event(const std::vector<Hint>& hints, const FeatureDataset& ds) {
  Json list = Json::array();
  for (size_t i = 0; i < hints.size(); ++i) list.push_back(hint_to_json(hints[i], static_cast<int>(i), ds));
  return Json{{"hints", std::move(list)}};
}

}  // namespace

Session::Session(std::shared_ptr<const FeatureDataset> dataset, SessionConfig config, const StageProgress& progress,
                 const std::atomic<bool>* cancel)
    : dataset_(std::move(dataset)), config_(std::move(config)) {
  require(dataset_ != nullptr, "session needs a dataset");
  const FeatureDataset& ds = *dataset_;
  ds.validate();
  require(config_.d >= 1, "d must be at least 1");
  require(config_.hint_count >= 0, "hint count must be non-negative");

  Index d = config_.d;
  if (d > ds.dim()) {
    warnings_.push_back("d=" + std::to_string(d) + " exceeds the feature dimension; using " + std::to_string(ds.dim()));
    d = ds.dim();
  }
  const auto train_rows = ds.training_indices();
  PcaResult pca = fit_pca(select_rows(ds.instances, train_rows), d);
  for (auto& w : pca.warnings) warnings_.push_back(std::move(w));
  space_ = std::move(pca.space);
  exemplars_ = compute_exemplars(space_, ds);
  projected_ = std::make_shared<const Matrix>(project_rows(space_, ds.instances));
  matrix_ = ClassAttributeMatrix(ds.n_classes());
  hints_ = make_hints(matrix_, exemplars_, nullptr, ds, config_.hint_count);

  if (config_.compute_layout) {
    auto layout_progress = [&](double f) {
      if (progress) progress("layout", 100.0 * f);
    };
    auto layout = std::make_shared<SemanticLayout>(
        base_layout(space_, ds, exemplars_, config_.seed, config_.layout, layout_progress, cancel));
    if (cancel && cancel->load()) fail(ErrorKind::phase, "layout cancelled");
    layout->contours = compute_contours(*layout, config_.layout.contour);
    layout->iteration_tag = iteration_tag_;
    layout_ = std::move(layout);
    if (progress) progress("layout", 100.0);
  }

  Json seen = Json::array(), unseen = Json::array();
  for (int c : ds.seen_classes) seen.push_back(ds.class_names[static_cast<size_t>(c)]);
  for (int c : ds.unseen_classes) unseen.push_back(ds.class_names[static_cast<size_t>(c)]);
  log_event("start", Json{{"config", config_to_json(config_)},
                          {"d_effective", space_.dim()},
                          {"seen", seen},
                          {"unseen", unseen},
                          {"instances", ds.size()},
                          {"dim", ds.dim()}});
  for (const auto& w : warnings_) log_event("warning", Json{{"message", w}});
  log_event("hints", hints_event(hints_, ds));
}

void Session::log_event(const std::string& type, Json body) {
  body["type"] = type;
  body["time"] = utc_now();
  log_.append(std::move(body));
}

void Session::require_phase(Phase expected, const char* action) const {
  if (phase_ != expected)
    fail(ErrorKind::phase, std::string("cannot ") + action + " while " + to_string(phase_));
}

std::vector<IntVector> Session::excluded_for(const std::optional<Hint>& hint) const {
  std::vector<IntVector> out;
  if (!hint) return out;
  for (int a : hint->excluded_attributes) {
    IntVector col(exemplars_.size());
    for (Index i = 0; i < exemplars_.size(); ++i) col(i) = matrix_.values()(exemplars_.classes[static_cast<size_t>(i)], a);
    out.push_back(std::move(col));
  }
  return out;
}

const DraftAttribute& Session::begin_draft(const LabelMap& fixed, std::optional<int> hint_id) {
  if (phase_ != Phase::idle && phase_ != Phase::drafting)
    fail(ErrorKind::phase, std::string("cannot start a draft while ") + to_string(phase_));
  std::optional<Hint> hint;
  if (hint_id) {
    if (*hint_id < 0 || *hint_id >= static_cast<int>(hints_.size()))
      fail(ErrorKind::not_found, "no hint with id " + std::to_string(*hint_id));
    hint = hints_[static_cast<size_t>(*hint_id)];
  }
  DraftAttribute draft = recommend_labels(exemplars_, fixed, excluded_for(hint), config_.recommend);
  draft.origin_hint = hint;
  draft_ = std::move(draft);
  phase_ = Phase::drafting;
  Json ev{{"fixed", labels_to_json(fixed, *dataset_)}, {"hint_id", nullptr}};
  if (hint_id) ev["hint_id"] = *hint_id;
  log_event("draft", std::move(ev));
  log_event("recommendation", Json{{"recommended", labels_to_json(draft_->recommended_map(), *dataset_)},
                                   {"margin", draft_->margin}});
  return *draft_;
}

const DraftAttribute& Session::feedback(const LabelMap& edits) {
  require_phase(Phase::drafting, "give feedback");
  draft_ = apply_feedback(*draft_, edits, exemplars_, config_.recommend);
  log_event("feedback", Json{{"edits", labels_to_json(edits, *dataset_)}});
  log_event("recommendation", Json{{"recommended", labels_to_json(draft_->recommended_map(), *dataset_)},
                                   {"margin", draft_->margin}});
  return *draft_;
}

const DraftAttribute& Session::reverse_draft() {
  require_phase(Phase::drafting, "reverse a draft");
  draft_ = reverse(*draft_);
  log_event("reverse", Json::object());
  return *draft_;
}

CommitJob Session::prepare_commit(const std::string& name, const std::map<int, int>& unseen_labels) {
  require_phase(Phase::drafting, "commit");
  if (name.empty()) fail(ErrorKind::invalid_argument, "attribute name must not be empty");
  if (matrix_.has_attribute(name)) fail(ErrorKind::conflict, "attribute '" + name + "' already exists");
  const FeatureDataset& ds = *dataset_;
  phase_ = Phase::awaiting_unseen;
  for (const auto& [cls, bit] : unseen_labels) {
    if (!ds.is_unseen(cls)) {
      phase_ = Phase::drafting;
      fail(ErrorKind::invalid_argument, "class '" + ds.class_names[static_cast<size_t>(cls)] + "' is not unseen");
    }
    (void)bit;
  }
  for (int c : ds.unseen_classes)
    if (!unseen_labels.count(c)) {
      phase_ = Phase::drafting;
      fail(ErrorKind::invalid_argument, "missing label for unseen class '" + ds.class_names[static_cast<size_t>(c)] + "'");
    }

  IntVector column = IntVector::Zero(ds.n_classes());
  for (size_t i = 0; i < draft_->classes.size(); ++i) column(draft_->classes[i]) = draft_->recommended[i] > 0 ? 1 : 0;
  for (const auto& [cls, bit] : unseen_labels) column(cls) = bit;

  CommitJob job;
  job.name = name;
  job.unseen_labels = unseen_labels;
  for (Index k = 0; k < matrix_.n_attributes(); ++k)
    if (matrix_.values().col(k) == column) job.duplicate = true;
  job.matrix = matrix_;
  job.matrix.append(name, column);
  job.dataset = dataset_;
  job.projected = projected_;
  job.exemplars = exemplars_;
  job.layout = layout_;
  if (layout_ && layout_->has_prototypes()) job.previous_prototypes = layout_->prototype_points;
  job.config = config_;
  phase_ = Phase::retraining;
  return job;
}

CommitResult Session::compute_commit(CommitJob job, const StageProgress& progress, const std::atomic<bool>* cancel) {
  auto report = [&](const char* stage, double pct) {
    if (progress) progress(stage, pct);
  };
  CommitResult r;
  const FeatureDataset& ds = *job.dataset;
  report("retraining", 0.0);
  r.model = train_exem(job.matrix, job.exemplars, job.config.exem, &r.warnings);
  report("retraining", 50.0);
  const Accuracy acc = evaluate_projected(r.model, *job.projected, ds, job.matrix);
  r.metrics = MetricsRow{static_cast<int>(job.matrix.n_attributes()), acc.train, acc.test};
  r.confusion = confusion_projected(r.model, *job.projected, ds, job.matrix);
  r.hints = make_hints(job.matrix, job.exemplars, &r.confusion, ds, job.config.hint_count);
  report("retraining", 100.0);
  if (cancel && cancel->load()) {
    r.cancelled = true;
  } else if (job.layout) {
    report("layout", 0.0);
    const Matrix* prev = job.previous_prototypes ? &*job.previous_prototypes : nullptr;
    auto layout = std::make_shared<SemanticLayout>(reproject_prototypes(
        *job.layout, r.model, job.matrix, prev, job.config.anchored, [&](double f) { report("layout", 100.0 * f); },
        cancel));
    if (cancel && cancel->load()) {
      r.cancelled = true;
    } else {
      r.layout = std::move(layout);
      report("layout", 100.0);
    }
  }
  r.job = std::move(job);
  return r;
}

void Session::finish_commit(CommitResult r) {
  require_phase(Phase::retraining, "finish a commit");
  const FeatureDataset& ds = *dataset_;
  if (r.cancelled) {
    phase_ = Phase::drafting;
    log_event("commit_cancelled", Json{{"name", r.job.name}});
    return;
  }
  matrix_ = std::move(r.job.matrix);
  model_ = std::move(r.model);
  confusion_ = std::move(r.confusion);
  hints_ = std::move(r.hints);
  metrics_.push_back(r.metrics);
  ++iteration_tag_;
  layout_history_.push_back(layout_);
  if (r.layout) {
    auto layout = std::const_pointer_cast<SemanticLayout>(r.layout);
    layout->iteration_tag = iteration_tag_;
    for (size_t i = 0; i < layout->classes.size(); ++i) {
      const int c = layout->classes[i];
      auto& t = trajectories_[c];
      t.class_index = c;
      t.points.emplace_back(iteration_tag_, layout->prototype_points.row(static_cast<Index>(i)).transpose());
    }
    layout_ = std::move(r.layout);
  }

  Json column = Json::object();
  for (size_t i = 0; i < draft_->classes.size(); ++i)
    column[ds.class_names[static_cast<size_t>(draft_->classes[i])]] = draft_->recommended[i] > 0 ? 1 : 0;
  log_event("commit", Json{{"name", r.job.name},
                           {"unseen_labels", binary_labels_to_json(r.job.unseen_labels, ds)},
                           {"column", column},
                           {"iteration_tag", iteration_tag_}});
  if (r.job.duplicate) r.warnings.push_back("attribute '" + r.job.name + "' duplicates an existing column (duplicate split)");
  for (const auto& w : r.warnings) {
    warnings_.push_back(w);
    log_event("warning", Json{{"message", w}});
  }
  log_event("metrics", metrics_to_json({r.metrics})[0]);
  log_event("hints", hints_event(hints_, ds));
  draft_.reset();
  phase_ = Phase::idle;
}

void Session::abort_commit(const std::string& reason) {
  require_phase(Phase::retraining, "abort a commit");
  phase_ = Phase::drafting;
  log_event("commit_failed", Json{{"reason", reason}});
}

void Session::commit_attribute(const std::string& name, const std::map<int, int>& unseen_labels,
                               const StageProgress& progress) {
  CommitJob job = prepare_commit(name, unseen_labels);
  CommitResult result;
  try {
    result = compute_commit(std::move(job), progress);
  } catch (const std::exception& e) {
    abort_commit(e.what());
    throw;
  }
  finish_commit(std::move(result));
}

void Session::undo_last_commit() {
  require_phase(Phase::idle, "undo");
  if (matrix_.n_attributes() == 0) fail(ErrorKind::phase, "nothing to undo");
  const FeatureDataset& ds = *dataset_;
  const std::string name = matrix_.attribute_names().back();
  matrix_.remove_last();
  metrics_.pop_back();
  if (matrix_.n_attributes() == 0) {
    model_.reset();
    confusion_.reset();
    hints_ = make_hints(matrix_, exemplars_, nullptr, ds, config_.hint_count);
  } else {
    model_ = train_exem(matrix_, exemplars_, config_.exem);
    confusion_ = confusion_projected(*model_, *projected_, ds, matrix_);
    hints_ = make_hints(matrix_, exemplars_, &*confusion_, ds, config_.hint_count);
  }
  for (auto it = trajectories_.begin(); it != trajectories_.end();) {
    if (!it->second.points.empty()) it->second.points.pop_back();
    it = it->second.points.empty() ? trajectories_.erase(it) : std::next(it);
  }
  std::shared_ptr<const SemanticLayout> restored = layout_history_.back();
  layout_history_.pop_back();
  ++iteration_tag_;
  if (restored) {
    auto copy = std::make_shared<SemanticLayout>(*restored);
    copy->iteration_tag = iteration_tag_;
    layout_ = std::move(copy);
  }
  log_event("undo", Json{{"name", name}});
  log_event("hints", hints_event(hints_, ds));
}

std::vector<Index> Session::neighbors(PointKind kind, int cls, Index k) const {
  const FeatureDataset& ds = *dataset_;
  if (cls < 0 || cls >= ds.n_classes()) fail(ErrorKind::not_found, "unknown class index " + std::to_string(cls));
  const bool seen = ds.is_seen(cls);
  const std::vector<Index> pool = seen ? ds.training_indices() : ds.test_indices();
  Vector query;
  if (kind == PointKind::exemplar) {
    if (seen) {
      query = exemplars_.points.row(exemplars_.row_of(cls)).transpose();
    } else {
      const auto rows = ds.instances_of(cls);
      if (rows.empty()) fail(ErrorKind::not_found, "unseen class has no instances");
      query = column_mean(select_rows(*projected_, rows));
    }
  } else {
    if (!model_) fail(ErrorKind::phase, "prototype neighbours need a trained model");
    query = model_->predict(matrix_.prototype(cls));
  }
  return nearest_instances(*projected_, pool, query, k);
}

PairPattern Session::pattern(int a, int b) const {
  if (!layout_ || !layout_->has_prototypes() || layout_->contours.empty())
    fail(ErrorKind::phase, "pattern detection needs a layout with prototypes");
  const Index ra = layout_->row_of(a), rb = layout_->row_of(b);
  if (ra < 0 || rb < 0) fail(ErrorKind::not_found, "pattern classes must be seen classes");
  return detect_pair_pattern(a, b, layout_->contours[static_cast<size_t>(ra)], layout_->contours[static_cast<size_t>(rb)],
                             layout_->prototype_points.row(ra).transpose(), layout_->prototype_points.row(rb).transpose(),
                             matrix_, config_.iou_threshold);
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "attribute_count,train_acc,test_acc\n";
  for (const auto& r : rows) {
    out += std::to_string(r.attribute_count) + ",";
    if (r.train_acc) out += format_double(*r.train_acc);
    out += ",";
    if (r.test_acc) out += format_double(*r.test_acc);
    out += "\n";
  }
  return out;
}

void Session::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  write_text_file(dir / "matrix.csv", format_binary_table(matrix_to_table(matrix_, *dataset_)));
  write_text_file(dir / "session_log.jsonl", log_.to_jsonl());
  write_text_file(dir / "metrics.csv", format_metrics_csv(metrics_));
  write_text_file(dir / "config.json", config_to_json(config_).dump(2) + "\n");
}

Session Session::replay(std::shared_ptr<const FeatureDataset> dataset, const SessionLog& log) {
  const auto& events = log.events();
  if (events.empty() || events.front().value("type", "") != "start")
    fail(ErrorKind::parse, "session log must begin with a start event");
  Session s(dataset, config_from_json(events.front().at("config")));
  const FeatureDataset& ds = *dataset;
  try {
    for (size_t i = 1; i < events.size(); ++i) {
      const Json& e = events[i];
      const std::string type = e.value("type", "");
      if (type == "draft") {
        std::optional<int> hint;
        if (e.contains("hint_id") && !e.at("hint_id").is_null()) hint = e.at("hint_id").get<int>();
        s.begin_draft(labels_from_json(e.at("fixed"), ds), hint);
      } else if (type == "feedback") {
        s.feedback(labels_from_json(e.at("edits"), ds));
      } else if (type == "reverse") {
        s.reverse_draft();
      } else if (type == "commit") {
        const std::string name = e.at("name").get<std::string>();
        const Json expected = e.at("column");
        Json got = Json::object();
        for (size_t k = 0; k < s.draft_->classes.size(); ++k)
          got[ds.class_names[static_cast<size_t>(s.draft_->classes[k])]] = s.draft_->recommended[k] > 0 ? 1 : 0;
        if (got != expected) fail(ErrorKind::conflict, "replay diverged at commit of '" + name + "'");
        s.commit_attribute(name, binary_labels_from_json(e.at("unseen_labels"), ds));
      } else if (type == "undo") {
        s.undo_last_commit();
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::parse, std::string("malformed session log: ") + e.what());
  }
  return s;
}

std::vector<MetricsRow> run_oracle_session(Session& s, const GroundTruthMatrix& gt, int n_attributes, OracleMode mode,
                                           std::uint64_t seed) {
  const FeatureDataset& ds = s.dataset();
  require(gt.values.rows() == ds.n_classes(), "ground truth must have one row per class");
  const int m_star = static_cast<int>(gt.n_attributes());
  require(n_attributes >= 0 && n_attributes <= m_star, "n_attributes must lie in [0, M*]");

  std::vector<bool> used(static_cast<size_t>(m_star), false);
  for (int a = 0; a < m_star; ++a) used[static_cast<size_t>(a)] = s.matrix().has_attribute(gt.attribute_names[static_cast<size_t>(a)]);
  auto usable = [&](int a) {
    if (used[static_cast<size_t>(a)]) return false;
    bool pos = false, neg = false;
    for (int c : ds.seen_classes) (gt.values(c, a) ? pos : neg) = true;
    return pos && neg;
  };
  auto sign = [&](int c, int a) { return gt.values(c, a) ? 1 : -1; };
  std::mt19937_64 rng(seed);

  for (int t = 0; t < n_attributes; ++t) {
    int attr = -1;
    std::optional<int> hint_id;
    LabelMap fixed;
    if (mode == OracleMode::hint_guided) {
      if (!s.hints().empty()) {
        const Hint& h = s.hints().front();
        for (int a = 0; a < m_star && attr < 0; ++a)
          if (usable(a) && gt.values(h.class_a, a) != gt.values(h.class_b, a)) attr = a;
        if (attr >= 0) {
          hint_id = 0;
          fixed = {{h.class_a, sign(h.class_a, attr)}, {h.class_b, sign(h.class_b, attr)}};
        }
      }
      for (int a = 0; a < m_star && attr < 0; ++a)
        if (usable(a)) attr = a;
    } else {
      std::vector<int> cands;
      for (int a = 0; a < m_star; ++a)
        if (usable(a)) cands.push_back(a);
      if (!cands.empty()) {
        std::uniform_int_distribution<size_t> pick(0, cands.size() - 1);
        attr = cands[pick(rng)];
      }
    }
    if (attr < 0) fail(ErrorKind::invalid_argument, "ground truth exhausted after " + std::to_string(t) + " attributes");
    if (fixed.empty()) {
      int pos = -1, neg = -1;
      for (int c : ds.seen_classes) {
        if (gt.values(c, attr) && pos < 0) pos = c;
        if (!gt.values(c, attr) && neg < 0) neg = c;
      }
      fixed = {{pos, 1}, {neg, -1}};
    }

    const DraftAttribute* draft = &s.begin_draft(fixed, hint_id);
    for (size_t round = 0; round < ds.seen_classes.size(); ++round) {
      LabelMap edits;
      for (size_t i = 0; i < draft->classes.size(); ++i) {
        const int c = draft->classes[i];
        if (draft->recommended[i] != sign(c, attr)) edits[c] = sign(c, attr);
      }
      if (edits.empty()) break;
      draft = &s.feedback(edits);
    }
    std::map<int, int> unseen;
    for (int c : ds.unseen_classes) unseen[c] = gt.values(c, attr);
    s.commit_attribute(gt.attribute_names[static_cast<size_t>(attr)], unseen);
    used[static_cast<size_t>(attr)] = true;
  }
  return s.metrics();
}

}  // namespace zsnav
