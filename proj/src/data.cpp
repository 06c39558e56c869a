#include "zsnav/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace zsnav {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::vector<std::string> read_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

double parse_double(const std::string& s, size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  if (first < last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  if (!std::isfinite(v)) fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": non-finite value '" + s + "'");
  return v;
}

void apply_split(FeatureDataset& ds, const ClassSplit& split) {
  std::set<std::string> seen_names(split.seen.begin(), split.seen.end());
  for (const auto& u : split.unseen)
    if (seen_names.count(u)) fail(ErrorKind::invalid_argument, "class '" + u + "' is listed as both seen and unseen");
  for (const auto& name : split.seen) {
    const int c = ds.class_index(name);
    if (c < 0) fail(ErrorKind::invalid_argument, "unknown seen class '" + name + "'");
    ds.seen_classes.push_back(c);
  }
  for (const auto& name : split.unseen) {
    const int c = ds.class_index(name);
    if (c < 0) fail(ErrorKind::invalid_argument, "unknown unseen class '" + name + "'");
    ds.unseen_classes.push_back(c);
  }
  std::sort(ds.seen_classes.begin(), ds.seen_classes.end());
  std::sort(ds.unseen_classes.begin(), ds.unseen_classes.end());
  ds.seen_classes.erase(std::unique(ds.seen_classes.begin(), ds.seen_classes.end()), ds.seen_classes.end());
  ds.unseen_classes.erase(std::unique(ds.unseen_classes.begin(), ds.unseen_classes.end()), ds.unseen_classes.end());
  ds.validate();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out << text;
}

bool FeatureDataset::is_seen(int cls) const {
  return std::binary_search(seen_classes.begin(), seen_classes.end(), cls);
}

bool FeatureDataset::is_unseen(int cls) const {
  return std::binary_search(unseen_classes.begin(), unseen_classes.end(), cls);
}

int FeatureDataset::class_index(const std::string& name) const {
  auto it = std::find(class_names.begin(), class_names.end(), name);
  return it == class_names.end() ? -1 : static_cast<int>(it - class_names.begin());
}

std::vector<Index> FeatureDataset::training_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (is_seen(class_of[static_cast<size_t>(i)])) out.push_back(i);
  return out;
}

std::vector<Index> FeatureDataset::test_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (is_unseen(class_of[static_cast<size_t>(i)])) out.push_back(i);
  return out;
}

std::vector<Index> FeatureDataset::instances_of(int cls) const {
  std::vector<Index> out;
  for (Index i = 0; i < size(); ++i)
    if (class_of[static_cast<size_t>(i)] == cls) out.push_back(i);
  return out;
}

void FeatureDataset::validate() const {
  const auto n = static_cast<size_t>(size());
  if (instance_ids.size() != n || class_of.size() != n)
    fail(ErrorKind::invalid_argument, "instance ids/classes do not match the instance count");
  if (!image_paths.empty() && image_paths.size() != n)
    fail(ErrorKind::invalid_argument, "image paths do not match the instance count");
  for (int s : seen_classes)
    if (is_unseen(s)) fail(ErrorKind::invalid_argument, "seen and unseen classes overlap");
  std::vector<int> counts(class_names.size(), 0);
  for (int c : class_of) {
    if (c < 0 || c >= n_classes()) fail(ErrorKind::invalid_argument, "class index out of range");
    if (!is_seen(c) && !is_unseen(c))
      fail(ErrorKind::invalid_argument, "class '" + class_names[static_cast<size_t>(c)] + "' is in neither split");
    ++counts[static_cast<size_t>(c)];
  }
  for (int s : seen_classes)
    if (counts[static_cast<size_t>(s)] == 0)
      fail(ErrorKind::invalid_argument, "seen class '" + class_names[static_cast<size_t>(s)] + "' has no instances");
}

ClassSplit read_split(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("seen") || !j.contains("unseen"))
    fail(ErrorKind::parse, "malformed split file " + path.string());
  ClassSplit split;
  split.seen = j.at("seen").get<std::vector<std::string>>();
  split.unseen = j.at("unseen").get<std::vector<std::string>>();
  return split;
}

void write_split(const std::filesystem::path& path, const ClassSplit& split) {
  nlohmann::json j{{"seen", split.seen}, {"unseen", split.unseen}};
  write_text_file(path, j.dump(2) + "\n");
}

FeatureDataset parse_feature_csv(const std::string& text, const ClassSplit& split) {
  const auto lines = read_lines(text);
  if (lines.empty()) fail(ErrorKind::parse, "empty feature table");
  const auto header = split_csv_line(lines.front());
  if (header.size() < 3 || header[0] != "instance_id" || header[1] != "class_name")
    fail(ErrorKind::parse, "feature table header must start with instance_id,class_name,f0");
  const Index dim = static_cast<Index>(header.size() - 2);

  FeatureDataset ds;
  ds.instances.resize(static_cast<Index>(lines.size() - 1), dim);
  std::unordered_map<std::string, int> class_ids;
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (static_cast<Index>(fields.size()) != dim + 2)
      fail(ErrorKind::parse, "line " + std::to_string(r + 1) + ": expected " + std::to_string(dim) +
                                 " features, found " + std::to_string(static_cast<long>(fields.size()) - 2));
    ds.instance_ids.push_back(fields[0]);
    auto [it, inserted] = class_ids.emplace(fields[1], static_cast<int>(ds.class_names.size()));
    if (inserted) ds.class_names.push_back(fields[1]);
    ds.class_of.push_back(it->second);
    for (Index k = 0; k < dim; ++k)
      ds.instances(static_cast<Index>(r - 1), k) = parse_double(fields[static_cast<size_t>(k + 2)], r + 1);
  }
  apply_split(ds, split);
  return ds;
}

std::string format_feature_csv(const FeatureDataset& ds) {
  std::string out = "instance_id,class_name";
  for (Index k = 0; k < ds.dim(); ++k) out += ",f" + std::to_string(k);
  out += "\n";
  for (Index i = 0; i < ds.size(); ++i) {
    out += csv_field(ds.instance_ids[static_cast<size_t>(i)]);
    out += ",";
    out += csv_field(ds.class_names[static_cast<size_t>(ds.class_of[static_cast<size_t>(i)])]);
    for (Index k = 0; k < ds.dim(); ++k) {
      out += ",";
      out += format_double(ds.instances(i, k));
    }
    out += "\n";
  }
  return out;
}

FeatureDataset load_feature_table(const std::filesystem::path& path, const ClassSplit& split) {
  if (path.extension() != ".bin") return parse_feature_csv(read_text_file(path), split);

  auto manifest_path = path;
  manifest_path.replace_extension(".json");
  const auto m = nlohmann::json::parse(read_text_file(manifest_path), nullptr, false);
  if (m.is_discarded()) fail(ErrorKind::parse, "malformed manifest " + manifest_path.string());
  FeatureDataset ds;
  const Index rows = m.at("n_rows").get<Index>();
  const Index dim = m.at("dim").get<Index>();
  ds.instance_ids = m.at("instance_ids").get<std::vector<std::string>>();
  ds.class_of = m.at("class_of").get<std::vector<int>>();
  ds.class_names = m.at("class_names").get<std::vector<std::string>>();
  if (m.contains("image_paths")) ds.image_paths = m.at("image_paths").get<std::vector<std::string>>();

  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::vector<float> raw(static_cast<size_t>(rows * dim));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
    fail(ErrorKind::parse, "binary feature file is shorter than rows x dim");
  ds.instances = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                     raw.data(), rows, dim)
                     .cast<double>();
  apply_split(ds, split);
  return ds;
}

void write_feature_table(const std::filesystem::path& path, const FeatureDataset& dataset) {
  write_text_file(path, format_feature_csv(dataset));
}

void write_feature_binary(const std::filesystem::path& path, const FeatureDataset& ds) {
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = ds.instances.cast<float>();
  {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(float)));
  }
  nlohmann::json m{{"n_rows", ds.size()},
                   {"dim", ds.dim()},
                   {"instance_ids", ds.instance_ids},
                   {"class_of", ds.class_of},
                   {"class_names", ds.class_names}};
  if (!ds.image_paths.empty()) m["image_paths"] = ds.image_paths;
  auto manifest_path = path;
  manifest_path.replace_extension(".json");
  write_text_file(manifest_path, m.dump() + "\n");
}

NamedBinaryTable parse_binary_table(const std::string& text) {
  const auto lines = read_lines(text);
  if (lines.empty()) fail(ErrorKind::parse, "empty attribute table");
  const auto header = split_csv_line(lines.front());
  if (header.empty() || header[0] != "class_name") fail(ErrorKind::parse, "attribute table header must start with class_name");
  NamedBinaryTable t;
  t.attribute_names.assign(header.begin() + 1, header.end());
  t.values.resize(static_cast<Index>(lines.size() - 1), static_cast<Index>(t.attribute_names.size()));
  for (size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != header.size())
      fail(ErrorKind::parse, "line " + std::to_string(r + 1) + ": wrong number of cells");
    t.row_names.push_back(fields[0]);
    for (size_t k = 1; k < fields.size(); ++k) {
      if (fields[k] != "0" && fields[k] != "1")
        fail(ErrorKind::parse, "line " + std::to_string(r + 1) + ": cells must be 0 or 1");
      t.values(static_cast<Index>(r - 1), static_cast<Index>(k - 1)) = fields[k] == "1" ? 1 : 0;
    }
  }
  return t;
}

NamedBinaryTable read_binary_table(const std::filesystem::path& path) { return parse_binary_table(read_text_file(path)); }

std::string format_binary_table(const NamedBinaryTable& t) {
  std::string out = "class_name";
  for (const auto& a : t.attribute_names) out += "," + csv_field(a);
  out += "\n";
  for (Index r = 0; r < t.values.rows(); ++r) {
    out += csv_field(t.row_names[static_cast<size_t>(r)]);
    for (Index k = 0; k < t.values.cols(); ++k) out += t.values(r, k) ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

GroundTruthMatrix align_ground_truth(const NamedBinaryTable& table, const FeatureDataset& ds) {
  GroundTruthMatrix gt;
  gt.attribute_names = table.attribute_names;
  gt.values.resize(ds.n_classes(), table.values.cols());
  for (int c = 0; c < ds.n_classes(); ++c) {
    auto it = std::find(table.row_names.begin(), table.row_names.end(), ds.class_names[static_cast<size_t>(c)]);
    if (it == table.row_names.end())
      fail(ErrorKind::invalid_argument, "attribute table has no row for class '" + ds.class_names[static_cast<size_t>(c)] + "'");
    gt.values.row(c) = table.values.row(it - table.row_names.begin());
  }
  return gt;
}

NamedBinaryTable to_named_table(const GroundTruthMatrix& gt, const FeatureDataset& ds) {
  return NamedBinaryTable{ds.class_names, gt.attribute_names, gt.values};
}

SyntheticData generate_synthetic(const SyntheticParams& p) {
  require(p.n_classes >= 2, "need at least two classes");
  require(p.n_seen >= 1 && p.n_seen < p.n_classes, "n_seen must be in [1, n_classes)");
  require(p.gt_attributes >= 1, "need at least one ground-truth attribute");
  require(p.dim >= 1, "dimension must be positive");
  require(p.per_class >= 1, "per_class must be positive");
  require(p.noise >= 0.0, "noise must be non-negative");

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  const int n = p.n_classes;
  const int m = p.gt_attributes;
  SyntheticData out;
  auto& gt = out.ground_truth;
  gt.values.resize(n, m);
  for (int a = 0; a < m; ++a) {
    for (;;) {
      for (int c = 0; c < n; ++c) gt.values(c, a) = coin(rng) ? 1 : 0;
      const int ones = gt.values.col(a).sum();
      if (ones > 0 && ones < n) break;
    }
    gt.attribute_names.push_back("attr" + std::to_string(a));
  }

  const double scale = p.signal_scale > 0.0 ? p.signal_scale : (p.noise > 0.0 ? 5.0 * p.noise : 1.0);
  Matrix mixing(p.dim, m);
  for (Index i = 0; i < mixing.size(); ++i) mixing.data()[i] = normal(rng);
  Matrix offsets(n, p.dim);
  for (Index i = 0; i < offsets.size(); ++i) offsets.data()[i] = normal(rng) * scale * p.class_offset;
  out.centers = scale * gt.values.cast<double>() * mixing.transpose() + offsets;

  auto& ds = out.dataset;
  ds.instances.resize(static_cast<Index>(n) * p.per_class, p.dim);
  Index row = 0;
  for (int c = 0; c < n; ++c) {
    ds.class_names.push_back("class" + std::to_string(c));
    for (int k = 0; k < p.per_class; ++k, ++row) {
      for (Index j = 0; j < p.dim; ++j) ds.instances(row, j) = out.centers(c, j) + p.noise * normal(rng);
      ds.instance_ids.push_back("c" + std::to_string(c) + "_" + std::to_string(k));
      ds.class_of.push_back(c);
    }
  }
  for (int c = 0; c < n; ++c) (c < p.n_seen ? ds.seen_classes : ds.unseen_classes).push_back(c);
  ds.validate();
  return out;
}

}  // namespace zsnav
