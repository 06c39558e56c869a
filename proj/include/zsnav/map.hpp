#pragma once

#include "zsnav/contour.hpp"
#include "zsnav/data.hpp"
#include "zsnav/embed.hpp"
#include "zsnav/tsne.hpp"
#include "zsnav/zsl.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zsnav {

struct SemanticLayout {
  std::vector<Index> instance_rows;  // dataset rows of the sampled instances
  std::vector<int> instance_classes;
  Matrix instance_points;            // n x 2
  std::vector<int> classes;          // seen classes, exemplar order
  Matrix exemplar_points;            // N_s x 2
  Matrix anchor_high;                // projected instances then exemplars
  Matrix prototype_points;           // N_s x 2, empty while M = 0
  Matrix prototype_high;             // psi(p_c) rows matching prototype_points
  std::vector<ClassContour> contours;  // aligned with `classes`
  long iteration_tag = 0;
  double diameter = 0.0;
  double kl_initial = 0.0, kl_final = 0.0;

  bool has_prototypes() const { return prototype_points.rows() > 0; }
  Index row_of(int cls) const;  // -1 when absent
  Matrix class_points(int cls) const;
};

struct LayoutOptions {
  int per_class_cap = 200;
  TsneOptions tsne;
  ContourOptions contour;
};

// t-SNE over subsampled projected training instances plus exemplars; no prototypes, no contours.
SemanticLayout base_layout(const MutualSpace& space, const FeatureDataset& dataset, const ExemplarSet& exemplars,
                           std::uint64_t seed, const LayoutOptions& options = {}, const Progress& progress = {},
                           const std::atomic<bool>* cancel = nullptr);

// Prototype positions by anchored t-SNE. `previous` (N_s x 2) seeds the descent; otherwise each
// prototype starts at its exemplar plus a fixed offset of 1% of the layout diameter.
SemanticLayout reproject_prototypes(const SemanticLayout& layout, const ExemModel& model,
                                    const ClassAttributeMatrix& matrix, const Matrix* previous = nullptr,
                                    const AnchoredOptions& options = {}, const Progress& progress = {},
                                    const std::atomic<bool>* cancel = nullptr);

std::vector<ClassContour> compute_contours(const SemanticLayout& layout, const ContourOptions& options = {});

struct Trajectory {
  int class_index = -1;
  std::vector<std::pair<long, Point2>> points;  // (iteration tag, prototype position)
};

enum class PatternLabel { p1, p2, p3, p4, p5, overlap, aligned };

const char* to_string(PatternLabel label);

struct PatternEvidence {
  bool a_in_a = false, a_in_b = false, b_in_a = false, b_in_b = false;
  bool prototypes_equal = false;
  double iou = 0.0;
};

struct PairPattern {
  int class_a = -1, class_b = -1;
  PatternLabel label = PatternLabel::p3;
  PatternEvidence evidence;
};

// Decision table over the evidence; may swap (a, b) so the asymmetric patterns read from A's side.
PairPattern classify_pattern(int a, int b, const PatternEvidence& evidence, double iou_threshold = 0.3);

// With equal prototype rows both prototypes are evaluated at their 2-D midpoint.
PairPattern detect_pair_pattern(int a, int b, const ClassContour& contour_a, const ClassContour& contour_b,
                                const Point2& proto_a, const Point2& proto_b, const ClassAttributeMatrix& matrix,
                                double iou_threshold = 0.3);

// k nearest rows of `projected` among `pool`, ascending distance, ties by pool order. k is clipped.
std::vector<Index> nearest_instances(const Matrix& projected, std::span<const Index> pool, const Vector& query, Index k);

}  // namespace zsnav
