#pragma once

#include "zsnav/embed.hpp"
#include "zsnav/zsl.hpp"

#include <optional>
#include <string>
#include <vector>

namespace zsnav {

enum class HintKind { initial_distance, identical_prototype, general };

const char* to_string(HintKind kind);

struct Hint {
  int class_a = 0;
  int class_b = 0;
  std::vector<int> excluded_attributes;  // ascending
  double score = 0.0;
  HintKind kind = HintKind::initial_distance;
  std::string question_text;
};

// Ranked contrastive questions.
//  - empty matrix: most distant exemplar pairs first;
//  - some seen prototypes identical: only identical pairs, by symmetric confusion;
//  - otherwise: all pairs by symmetric confusion, excluding attributes that already split the pair.
// Zero-confusion pairs follow the positive ones, closest exemplars first.
std::vector<Hint> generate_hints(const ClassAttributeMatrix& matrix, const ExemplarSet& exemplars,
                                 const ConfusionMatrix* confusion, int k);

std::string render_question(const Hint& hint, const std::vector<std::string>& class_names,
                            const std::vector<std::string>& attribute_names);

}  // namespace zsnav
