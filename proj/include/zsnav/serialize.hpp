#pragma once

#include "zsnav/session.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace zsnav {

using Json = nlohmann::json;

Json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const Json& j);

// {"class name": +1 | -1}
Json labels_to_json(const LabelMap& labels, const FeatureDataset& dataset);
LabelMap labels_from_json(const Json& j, const FeatureDataset& dataset);
// {"class name": 0 | 1}; booleans are accepted.
Json binary_labels_to_json(const std::map<int, int>& labels, const FeatureDataset& dataset);
std::map<int, int> binary_labels_from_json(const Json& j, const FeatureDataset& dataset);

// Class given by name or by decimal index.
int resolve_class(const std::string& token, const FeatureDataset& dataset);

Json point_to_json(const Point2& p);
Json hint_to_json(const Hint& hint, int id, const FeatureDataset& dataset);
Json draft_to_json(const DraftAttribute& draft, const FeatureDataset& dataset);
Json contour_to_json(const ClassContour& contour, const FeatureDataset& dataset);
Json trajectory_to_json(const Trajectory& trajectory, const FeatureDataset& dataset);
Json layout_to_json(const SemanticLayout& layout, const FeatureDataset& dataset,
                    const std::map<int, Trajectory>& trajectories);
Json metrics_to_json(const std::vector<MetricsRow>& rows);
Json pattern_to_json(const PairPattern& pattern, const FeatureDataset& dataset);

}  // namespace zsnav
