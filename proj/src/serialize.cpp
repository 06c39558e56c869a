#include "zsnav/serialize.hpp"

#include <charconv>

namespace zsnav {

Json config_to_json(const SessionConfig& c) {
  const auto& t = c.layout.tsne;
  const auto& r = c.recommend;
  return Json{
      {"d", c.d},
      {"seed", c.seed},
      {"hint_count", c.hint_count},
      {"compute_layout", c.compute_layout},
      {"iou_threshold", c.iou_threshold},
      {"features", c.features_path},
      {"split", c.split_path},
      {"layout",
       {{"per_class_cap", c.layout.per_class_cap},
        {"tsne",
         {{"perplexity", t.perplexity},
          {"iterations", t.iterations},
          {"exaggeration_iterations", t.exaggeration_iterations},
          {"exaggeration", t.exaggeration},
          {"learning_rate", t.learning_rate},
          {"momentum", t.momentum},
          {"final_momentum", t.final_momentum}}},
        {"contour", {{"mass_target", c.layout.contour.mass_target}, {"grid", c.layout.contour.grid}}}}},
      {"anchored",
       {{"iterations", c.anchored.iterations},
        {"momentum", c.anchored.momentum},
        {"learning_rate", c.anchored.learning_rate}}},
      {"exem",
       {{"gamma", c.exem.gamma},
        {"c", c.exem.c},
        {"epsilon_factor", c.exem.epsilon_factor},
        {"tolerance", c.exem.smo.tolerance},
        {"max_iterations", c.exem.smo.max_iterations},
        {"standardize_targets", c.exem.standardize_targets},
        {"standardized_distance", c.exem.standardized_distance}}},
      {"recommend",
       {{"labeled_cost", r.labeled_cost},
        {"unlabeled_cost", r.unlabeled_cost},
        {"anneal", r.anneal},
        {"hinge_sharpness", r.hinge_sharpness},
        {"unlabeled_sharpness", r.unlabeled_sharpness},
        {"lbfgs_history", r.lbfgs.history},
        {"lbfgs_max_iterations", r.lbfgs.max_iterations},
        {"lbfgs_gradient_tolerance", r.lbfgs.gradient_tolerance},
        {"balance", r.balance},
        {"refine", r.refine},
        {"hard_margin_c", r.hard_margin_c},
        {"hard_margin_tolerance", r.hard_margin_smo.tolerance},
        {"hard_margin_max_iterations", r.hard_margin_smo.max_iterations},
        {"exact_limit", r.exact_limit}}},
  };
}

namespace {

template <typename T>
void read(const Json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

SessionConfig config_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "session config must be a JSON object");
  SessionConfig c;
  try {
    read(j, "d", c.d);
    read(j, "seed", c.seed);
    read(j, "hint_count", c.hint_count);
    read(j, "compute_layout", c.compute_layout);
    read(j, "iou_threshold", c.iou_threshold);
    read(j, "features", c.features_path);
    read(j, "split", c.split_path);
    if (j.contains("layout")) {
      const Json& l = j.at("layout");
      read(l, "per_class_cap", c.layout.per_class_cap);
      if (l.contains("tsne")) {
        const Json& t = l.at("tsne");
        read(t, "perplexity", c.layout.tsne.perplexity);
        read(t, "iterations", c.layout.tsne.iterations);
        read(t, "exaggeration_iterations", c.layout.tsne.exaggeration_iterations);
        read(t, "exaggeration", c.layout.tsne.exaggeration);
        read(t, "learning_rate", c.layout.tsne.learning_rate);
        read(t, "momentum", c.layout.tsne.momentum);
        read(t, "final_momentum", c.layout.tsne.final_momentum);
      }
      if (l.contains("contour")) {
        read(l.at("contour"), "mass_target", c.layout.contour.mass_target);
        read(l.at("contour"), "grid", c.layout.contour.grid);
      }
    }
    if (j.contains("anchored")) {
      const Json& a = j.at("anchored");
      read(a, "iterations", c.anchored.iterations);
      read(a, "momentum", c.anchored.momentum);
      read(a, "learning_rate", c.anchored.learning_rate);
    }
    if (j.contains("exem")) {
      const Json& e = j.at("exem");
      read(e, "gamma", c.exem.gamma);
      read(e, "c", c.exem.c);
      read(e, "epsilon_factor", c.exem.epsilon_factor);
      read(e, "tolerance", c.exem.smo.tolerance);
      read(e, "max_iterations", c.exem.smo.max_iterations);
      read(e, "standardize_targets", c.exem.standardize_targets);
      read(e, "standardized_distance", c.exem.standardized_distance);
    }
    if (j.contains("recommend")) {
      const Json& r = j.at("recommend");
      auto& o = c.recommend;
      read(r, "labeled_cost", o.labeled_cost);
      read(r, "unlabeled_cost", o.unlabeled_cost);
      read(r, "anneal", o.anneal);
      read(r, "hinge_sharpness", o.hinge_sharpness);
      read(r, "unlabeled_sharpness", o.unlabeled_sharpness);
      read(r, "lbfgs_history", o.lbfgs.history);
      read(r, "lbfgs_max_iterations", o.lbfgs.max_iterations);
      read(r, "lbfgs_gradient_tolerance", o.lbfgs.gradient_tolerance);
      read(r, "balance", o.balance);
      read(r, "refine", o.refine);
      read(r, "hard_margin_c", o.hard_margin_c);
      read(r, "hard_margin_tolerance", o.hard_margin_smo.tolerance);
      read(r, "hard_margin_max_iterations", o.hard_margin_smo.max_iterations);
      read(r, "exact_limit", o.exact_limit);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("bad session config: ") + e.what());
  }
  return c;
}

int resolve_class(const std::string& token, const FeatureDataset& ds) {
  const int by_name = ds.class_index(token);
  if (by_name >= 0) return by_name;
  int idx = -1;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
  if (ec == std::errc() && ptr == token.data() + token.size() && idx >= 0 && idx < ds.n_classes()) return idx;
  fail(ErrorKind::not_found, "unknown class '" + token + "'");
}

Json labels_to_json(const LabelMap& labels, const FeatureDataset& ds) {
  Json j = Json::object();
  for (const auto& [cls, label] : labels) j[ds.class_names[static_cast<size_t>(cls)]] = label;
  return j;
}

LabelMap labels_from_json(const Json& j, const FeatureDataset& ds) {
  if (!j.is_object()) fail(ErrorKind::parse, "labels must be an object of class name to +1/-1");
  LabelMap out;
  for (const auto& [name, value] : j.items()) {
    if (!value.is_number_integer() || (value.get<int>() != 1 && value.get<int>() != -1))
      fail(ErrorKind::invalid_argument, "label for '" + name + "' must be +1 or -1");
    out[resolve_class(name, ds)] = value.get<int>();
  }
  return out;
}

Json binary_labels_to_json(const std::map<int, int>& labels, const FeatureDataset& ds) {
  Json j = Json::object();
  for (const auto& [cls, bit] : labels) j[ds.class_names[static_cast<size_t>(cls)]] = bit;
  return j;
}

std::map<int, int> binary_labels_from_json(const Json& j, const FeatureDataset& ds) {
  if (!j.is_object()) fail(ErrorKind::parse, "unseen labels must be an object of class name to 0/1");
  std::map<int, int> out;
  for (const auto& [name, value] : j.items()) {
    int bit = -1;
    if (value.is_boolean()) bit = value.get<bool>() ? 1 : 0;
    else if (value.is_number_integer()) bit = value.get<int>();
    if (bit != 0 && bit != 1) fail(ErrorKind::invalid_argument, "label for '" + name + "' must be 0 or 1");
    out[resolve_class(name, ds)] = bit;
  }
  return out;
}

Json point_to_json(const Point2& p) { return Json::array({p.x(), p.y()}); }

Json hint_to_json(const Hint& h, int id, const FeatureDataset& ds) {
  return Json{{"id", id},
              {"a", ds.class_names[static_cast<size_t>(h.class_a)]},
              {"b", ds.class_names[static_cast<size_t>(h.class_b)]},
              {"a_index", h.class_a},
              {"b_index", h.class_b},
              {"excluded", h.excluded_attributes},
              {"score", h.score},
              {"kind", to_string(h.kind)},
              {"text", h.question_text}};
}

Json draft_to_json(const DraftAttribute& d, const FeatureDataset& ds) {
  Json decision = Json::object();
  for (size_t i = 0; i < d.classes.size(); ++i)
    decision[ds.class_names[static_cast<size_t>(d.classes[i])]] = d.decision(static_cast<Index>(i));
  Json j{{"fixed", labels_to_json(d.fixed_labels, ds)},
         {"recommended", labels_to_json(d.recommended_map(), ds)},
         {"margin", d.margin},
         {"separable", d.separable},
         {"bias", d.b},
         {"decision", decision},
         {"conflicts_with_existing", d.conflicts_with_existing},
         {"origin_hint", nullptr}};
  if (d.origin_hint) j["origin_hint"] = hint_to_json(*d.origin_hint, -1, ds);
  return j;
}

Json contour_to_json(const ClassContour& c, const FeatureDataset& ds) {
  Json polys = Json::array();
  for (const auto& poly : c.polygons) {
    Json verts = Json::array();
    for (const auto& p : poly) verts.push_back(point_to_json(p));
    polys.push_back(std::move(verts));
  }
  return Json{{"class", c.class_index},
              {"name", ds.class_names[static_cast<size_t>(c.class_index)]},
              {"polygons", std::move(polys)},
              {"density_level", c.density_level},
              {"mass_covered", c.mass_covered},
              {"degenerate", c.degenerate}};
}

Json trajectory_to_json(const Trajectory& t, const FeatureDataset& ds) {
  Json pts = Json::array();
  for (const auto& [tag, p] : t.points) pts.push_back(Json{{"tag", tag}, {"x", p.x()}, {"y", p.y()}});
  return Json{{"class", t.class_index}, {"name", ds.class_names[static_cast<size_t>(t.class_index)]}, {"points", pts}};
}

Json layout_to_json(const SemanticLayout& l, const FeatureDataset& ds, const std::map<int, Trajectory>& trajectories) {
  auto name = [&](int c) { return ds.class_names[static_cast<size_t>(c)]; };
  Json inst = Json::array();
  for (size_t i = 0; i < l.instance_rows.size(); ++i) {
    const Index row = l.instance_rows[i];
    Json p{{"row", row},
           {"id", ds.instance_ids[static_cast<size_t>(row)]},
           {"class", l.instance_classes[i]},
           {"x", l.instance_points(static_cast<Index>(i), 0)},
           {"y", l.instance_points(static_cast<Index>(i), 1)}};
    if (!ds.image_paths.empty()) p["image"] = ds.image_paths[static_cast<size_t>(row)];
    inst.push_back(std::move(p));
  }
  Json ex = Json::array(), pr = Json::array(), links = Json::array(), contours = Json::array(), traj = Json::array();
  for (size_t i = 0; i < l.classes.size(); ++i) {
    const int c = l.classes[i];
    const Point2 e = l.exemplar_points.row(static_cast<Index>(i)).transpose();
    ex.push_back(Json{{"class", c}, {"name", name(c)}, {"x", e.x()}, {"y", e.y()}});
    if (l.has_prototypes()) {
      const Point2 p = l.prototype_points.row(static_cast<Index>(i)).transpose();
      pr.push_back(Json{{"class", c}, {"name", name(c)}, {"x", p.x()}, {"y", p.y()}});
      links.push_back(Json{{"class", c}, {"name", name(c)}, {"exemplar", point_to_json(e)}, {"prototype", point_to_json(p)}});
    }
  }
  for (const auto& c : l.contours) contours.push_back(contour_to_json(c, ds));
  for (const auto& [c, t] : trajectories) traj.push_back(trajectory_to_json(t, ds));
  return Json{{"iteration_tag", l.iteration_tag},
              {"diameter", l.diameter},
              {"instances", std::move(inst)},
              {"exemplars", std::move(ex)},
              {"prototypes", std::move(pr)},
              {"links", std::move(links)},
              {"contours", std::move(contours)},
              {"trajectories", std::move(traj)},
              {"kl_initial", l.kl_initial},
              {"kl_final", l.kl_final}};
}

Json metrics_to_json(const std::vector<MetricsRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j{{"attribute_count", r.attribute_count}, {"train_acc", nullptr}, {"test_acc", nullptr}};
    if (r.train_acc) j["train_acc"] = *r.train_acc;
    if (r.test_acc) j["test_acc"] = *r.test_acc;
    out.push_back(std::move(j));
  }
  return out;
}

Json pattern_to_json(const PairPattern& p, const FeatureDataset& ds) {
  const auto& e = p.evidence;
  return Json{{"class_a", ds.class_names[static_cast<size_t>(p.class_a)]},
              {"class_b", ds.class_names[static_cast<size_t>(p.class_b)]},
              {"label", to_string(p.label)},
              {"evidence",
               {{"a_in_a", e.a_in_a},
                {"a_in_b", e.a_in_b},
                {"b_in_a", e.b_in_a},
                {"b_in_b", e.b_in_b},
                {"prototypes_equal", e.prototypes_equal},
                {"contour_iou", e.iou}}}};
}

}  // namespace zsnav
