#pragma once

#include "zsnav/data.hpp"
#include "zsnav/embed.hpp"
#include "zsnav/hints.hpp"
#include "zsnav/map.hpp"
#include "zsnav/recommend.hpp"
#include "zsnav/zsl.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace zsnav {

enum class Phase { idle, drafting, awaiting_unseen, retraining };

const char* to_string(Phase phase);

struct SessionConfig {
  Index d = 500;  // clipped to the training rank
  std::uint64_t seed = 0;
  int hint_count = 10;
  bool compute_layout = true;
  LayoutOptions layout;
  AnchoredOptions anchored;
  ExemHyper exem;
  RecommendOptions recommend;
  double iou_threshold = 0.3;
  std::string features_path, split_path;  // provenance only
};

struct MetricsRow {
  int attribute_count = 0;
  std::optional<double> train_acc, test_acc;  // percent
};

// Append-only event list; each event is a JSON object with at least "seq" and "type".
class SessionLog {
 public:
  void append(nlohmann::json event);
  const std::vector<nlohmann::json>& events() const { return events_; }
  std::string to_jsonl() const;
  static SessionLog from_jsonl(const std::string& text);

 private:
  std::vector<nlohmann::json> events_;
};

// Stage is "retraining" or "layout"; percent in [0, 100].
using StageProgress = std::function<void(const std::string& stage, double percent)>;

// Everything the heavy part of a commit needs, detached from the live session.
struct CommitJob {
  std::string name;
  std::map<int, int> unseen_labels;
  ClassAttributeMatrix matrix;  // with the new column
  std::shared_ptr<const FeatureDataset> dataset;
  std::shared_ptr<const Matrix> projected;
  ExemplarSet exemplars;
  std::shared_ptr<const SemanticLayout> layout;  // null when layouts are off
  std::optional<Matrix> previous_prototypes;
  SessionConfig config;
  bool duplicate = false;
};

struct CommitResult {
  CommitJob job;
  ExemModel model;
  ConfusionMatrix confusion;
  MetricsRow metrics;
  std::vector<Hint> hints;
  std::shared_ptr<const SemanticLayout> layout;
  std::vector<std::string> warnings;
  bool cancelled = false;
};

class Session {
 public:
  Session(std::shared_ptr<const FeatureDataset> dataset, SessionConfig config, const StageProgress& progress = {},
          const std::atomic<bool>* cancel = nullptr);

  const FeatureDataset& dataset() const { return *dataset_; }
  std::shared_ptr<const FeatureDataset> dataset_ptr() const { return dataset_; }
  const SessionConfig& config() const { return config_; }
  const MutualSpace& space() const { return space_; }
  const ExemplarSet& exemplars() const { return exemplars_; }
  const Matrix& projected() const { return *projected_; }
  const ClassAttributeMatrix& matrix() const { return matrix_; }
  const std::optional<ExemModel>& model() const { return model_; }
  const std::optional<ConfusionMatrix>& confusion() const { return confusion_; }
  std::shared_ptr<const SemanticLayout> layout() const { return layout_; }
  const std::map<int, Trajectory>& trajectories() const { return trajectories_; }
  const std::vector<Hint>& hints() const { return hints_; }
  const std::optional<DraftAttribute>& draft() const { return draft_; }
  const std::vector<MetricsRow>& metrics() const { return metrics_; }
  const SessionLog& log() const { return log_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  Phase phase() const { return phase_; }
  long iteration_tag() const { return iteration_tag_; }

  const DraftAttribute& begin_draft(const LabelMap& fixed, std::optional<int> hint_id = std::nullopt);
  const DraftAttribute& feedback(const LabelMap& edits);
  const DraftAttribute& reverse_draft();

  // Synchronous commit: prepare, compute, finish.
  void commit_attribute(const std::string& name, const std::map<int, int>& unseen_labels,
                        const StageProgress& progress = {});

  // Asynchronous commit in three steps. compute_commit touches no session state.
  CommitJob prepare_commit(const std::string& name, const std::map<int, int>& unseen_labels);
  static CommitResult compute_commit(CommitJob job, const StageProgress& progress = {},
                                     const std::atomic<bool>* cancel = nullptr);
  void finish_commit(CommitResult result);
  // Returns a failed asynchronous commit to drafting.
  void abort_commit(const std::string& reason);

  void undo_last_commit();

  enum class PointKind { exemplar, prototype };
  // Nearest instances in the mutual space: the training pool for seen classes, the test pool for unseen.
  // An unseen class's exemplar is the mean of its projected test instances.
  std::vector<Index> neighbors(PointKind kind, int cls, Index k) const;
  PairPattern pattern(int a, int b) const;

  // matrix.csv, session_log.jsonl, metrics.csv, config.json
  void save(const std::filesystem::path& dir) const;

  // Re-executes the logged commands on a fresh session over `dataset`.
  static Session replay(std::shared_ptr<const FeatureDataset> dataset, const SessionLog& log);

 private:
  void log_event(const std::string& type, nlohmann::json body);
  void require_phase(Phase expected, const char* action) const;
  void install_model(ExemModel model, ConfusionMatrix confusion);
  std::vector<IntVector> excluded_for(const std::optional<Hint>& hint) const;

  std::shared_ptr<const FeatureDataset> dataset_;
  SessionConfig config_;
  MutualSpace space_;
  ExemplarSet exemplars_;
  std::shared_ptr<const Matrix> projected_;
  ClassAttributeMatrix matrix_;
  std::optional<ExemModel> model_;
  std::optional<ConfusionMatrix> confusion_;
  std::shared_ptr<const SemanticLayout> layout_;
  std::vector<std::shared_ptr<const SemanticLayout>> layout_history_;  // layout before each commit
  std::map<int, Trajectory> trajectories_;
  std::vector<Hint> hints_;
  std::optional<DraftAttribute> draft_;
  std::vector<MetricsRow> metrics_;
  SessionLog log_;
  std::vector<std::string> warnings_;
  Phase phase_ = Phase::idle;
  long iteration_tag_ = 0;
};

enum class OracleMode { hint_guided, random };

const char* to_string(OracleMode mode);
OracleMode parse_oracle_mode(const std::string& text);

// Simulated analyst. Hint-guided: answers the top hint with the lowest-indexed unused ground-truth
// attribute splitting the pair. Random: a seeded random unused attribute. Either way the pair (or the
// lowest positive / negative seen class) is fixed from ground truth and every disagreeing class is
// corrected, at most N_s feedback rounds. Attributes constant over the seen classes are never chosen.
std::vector<MetricsRow> run_oracle_session(Session& session, const GroundTruthMatrix& ground_truth, int n_attributes,
                                           OracleMode mode, std::uint64_t seed);

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

}  // namespace zsnav
