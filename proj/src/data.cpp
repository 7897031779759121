#include "dmmvh/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dmmvh/error.hpp"

namespace dmmvh {

static_assert(std::endian::native == std::endian::little,
              "feature files are little-endian; big-endian hosts are not supported");

namespace {

constexpr char kTensorMagic[4] = {'D', 'M', 'F', '1'};
constexpr const char* kSplitNames[3] = {"train", "retrieval", "query"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

const std::string& require_key(const std::map<std::string, std::string>& kv,
                               const std::string& key, const std::filesystem::path& path) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError(path.string() + ": missing key '" + key + "'");
  return it->second;
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw IoError("invalid " + what + ": '" + s + "'");
  }
  if (pos != s.size()) throw IoError("invalid " + what + ": '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::size_t> parse_count_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_count(trim(item), what));
  return out;
}

struct LabeledId {
  std::string id;
  std::vector<std::size_t> categories;
};

std::vector<LabeledId> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file " + path.string());
  std::vector<LabeledId> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IoError(path.string() + ": expected '<id>\\t<categories>' on line " +
                    std::to_string(out.size() + 1));
    }
    LabeledId rec;
    rec.id = line.substr(0, tab);
    const std::string cats = line.substr(tab + 1);
    if (!cats.empty()) rec.categories = parse_count_list(cats, "category index for " + rec.id);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<FeatureRecord> read_split(const std::filesystem::path& features_path,
                                      const std::filesystem::path& labels_path,
                                      const std::vector<std::size_t>& view_dims,
                                      std::size_t categories, const std::string& split_name) {
  std::ifstream in(features_path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + features_path.string());
  char magic[4];
  std::uint32_t width = 0;
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&width), sizeof(width));
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw IoError(features_path.string() + ": not a feature tensor file");
  }
  const std::size_t expected_width = std::accumulate(view_dims.begin(), view_dims.end(), 0UL);
  if (width != expected_width) {
    throw IoError(features_path.string() + ": row width " + std::to_string(width) +
                  " but manifest dims sum to " + std::to_string(expected_width));
  }

  const std::vector<LabeledId> labels = read_labels(labels_path);
  if (labels.size() != count) {
    throw IoError(split_name + ": " + std::to_string(count) + " feature rows but " +
                  std::to_string(labels.size()) + " label lines");
  }
  if (count == 0) throw IoError(split_name + ": split is empty");

  std::vector<FeatureRecord> out;
  out.reserve(count);
  std::vector<float> row(width);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(width * sizeof(float)));
    if (!in) throw IoError(features_path.string() + ": truncated at record " + std::to_string(i));
    FeatureRecord r;
    r.id = labels[i].id;
    std::size_t offset = 0;
    for (std::size_t d : view_dims) {
      Vector v(d);
      for (std::size_t k = 0; k < d; ++k) v[k] = static_cast<double>(row[offset + k]);
      offset += d;
      r.views.push_back(std::move(v));
    }
    r.label = Vector(categories);
    for (std::size_t c : labels[i].categories) {
      if (c >= categories) {
        throw IoError("record " + r.id + ": category " + std::to_string(c) + " >= " +
                      std::to_string(categories));
      }
      r.label[c] = 1.0;
    }
    out.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError(features_path.string() + ": trailing bytes after " + std::to_string(count) +
                  " records");
  }
  validate_records(out, view_dims, categories, split_name);
  return out;
}

void write_split(const std::vector<FeatureRecord>& records, const std::filesystem::path& features_path,
                 const std::filesystem::path& labels_path, std::size_t width) {
  std::ofstream out(features_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + features_path.string());
  const auto w = static_cast<std::uint32_t>(width);
  const auto count = static_cast<std::uint64_t>(records.size());
  out.write(kTensorMagic, 4);
  out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  std::vector<float> row;
  for (const FeatureRecord& r : records) {
    row.clear();
    for (const Vector& v : r.views) {
      for (double x : v) row.push_back(static_cast<float>(x));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + features_path.string());

  std::ofstream lab(labels_path, std::ios::trunc);
  if (!lab) throw IoError("cannot write " + labels_path.string());
  for (const FeatureRecord& r : records) {
    lab << r.id << '\t';
    bool first = true;
    for (std::size_t c = 0; c < r.label.size(); ++c) {
      if (r.label[c] == 0.0) continue;
      if (!first) lab << ',';
      lab << c;
      first = false;
    }
    lab << '\n';
  }
  if (!lab) throw IoError("failed writing " + labels_path.string());
}

const std::vector<FeatureRecord>& split_records(const DatasetSplit& split, int which) {
  switch (which) {
    case 0: return split.train;
    case 1: return split.retrieval;
    default: return split.query;
  }
}

std::vector<FeatureRecord>& split_records(DatasetSplit& split, int which) {
  return const_cast<std::vector<FeatureRecord>&>(
      split_records(static_cast<const DatasetSplit&>(split), which));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate_records(const std::vector<FeatureRecord>& records,
                      const std::vector<std::size_t>& view_dims, std::size_t categories,
                      const std::string& split_name) {
  std::set<std::string> ids;
  for (const FeatureRecord& r : records) {
    if (r.id.empty() || r.id.find_first_of("\t\n\r") != std::string::npos) {
      throw IoError(split_name + ": invalid record id '" + r.id + "'");
    }
    if (!ids.insert(r.id).second) throw IoError(split_name + ": duplicate id " + r.id);
    if (r.views.size() != view_dims.size()) {
      throw IoError("record " + r.id + ": " + std::to_string(r.views.size()) +
                    " views, expected " + std::to_string(view_dims.size()));
    }
    for (std::size_t v = 0; v < view_dims.size(); ++v) {
      if (r.views[v].size() != view_dims[v]) {
        throw IoError("record " + r.id + ": view " + std::to_string(v) + " has dimension " +
                      std::to_string(r.views[v].size()) + ", manifest declares " +
                      std::to_string(view_dims[v]));
      }
      if (!all_finite(r.views[v].span())) {
        throw IoError("record " + r.id + ": non-finite feature value in view " +
                      std::to_string(v));
      }
    }
    if (r.label.size() != categories) {
      throw IoError("record " + r.id + ": label has " + std::to_string(r.label.size()) +
                    " categories, expected " + std::to_string(categories));
    }
    bool any = false;
    for (double y : r.label) {
      if (y != 0.0 && y != 1.0) throw IoError("record " + r.id + ": label is not multi-hot");
      any = any || y == 1.0;
    }
    if (!any) throw IoError("record " + r.id + ": no category set");
  }
}

DatasetSplit load_features(const std::filesystem::path& manifest_path) {
  const auto kv = read_key_values(manifest_path);
  if (require_key(kv, "format", manifest_path) != "dmmvh-features") {
    throw IoError(manifest_path.string() + ": unknown format");
  }
  if (require_key(kv, "version", manifest_path) != "1") {
    throw IoError(manifest_path.string() + ": unsupported version");
  }
  DatasetSplit split;
  const std::size_t views = parse_count(require_key(kv, "views", manifest_path), "views");
  split.view_dims = parse_count_list(require_key(kv, "view_dims", manifest_path), "view_dims");
  if (views == 0 || split.view_dims.size() != views) {
    throw IoError(manifest_path.string() + ": views and view_dims disagree");
  }
  for (std::size_t d : split.view_dims) {
    if (d == 0) throw IoError(manifest_path.string() + ": zero view dimension");
  }
  split.categories = parse_count(require_key(kv, "categories", manifest_path), "categories");
  if (split.categories == 0) throw IoError(manifest_path.string() + ": zero categories");
  if (auto it = kv.find("query_in_retrieval"); it != kv.end()) {
    if (it->second != "true" && it->second != "false") {
      throw IoError(manifest_path.string() + ": query_in_retrieval must be true or false");
    }
    split.query_in_retrieval = it->second == "true";
  }

  const auto dir = manifest_path.parent_path();
  bool any_split = false;
  for (int s = 0; s < 3; ++s) {
    const std::string name = kSplitNames[s];
    auto f = kv.find(name + ".features");
    auto l = kv.find(name + ".labels");
    if (f == kv.end() && l == kv.end()) continue;
    if (f == kv.end() || l == kv.end()) {
      throw IoError(manifest_path.string() + ": split '" + name +
                    "' needs both .features and .labels");
    }
    split_records(split, s) =
        read_split(dir / f->second, dir / l->second, split.view_dims, split.categories, name);
    any_split = true;
  }
  if (!any_split) throw IoError(manifest_path.string() + ": no splits declared");
  return split;
}

std::filesystem::path write_features(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t width = std::accumulate(split.view_dims.begin(), split.view_dims.end(), 0UL);
  const auto manifest = dir / "manifest.txt";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << "# dmmvh feature manifest\n";
  out << "format = dmmvh-features\n";
  out << "version = 1\n";
  out << "views = " << split.view_dims.size() << "\n";
  out << "view_dims = ";
  for (std::size_t v = 0; v < split.view_dims.size(); ++v) {
    out << (v ? "," : "") << split.view_dims[v];
  }
  out << "\n";
  out << "categories = " << split.categories << "\n";
  out << "query_in_retrieval = " << (split.query_in_retrieval ? "true" : "false") << "\n";
  for (int s = 0; s < 3; ++s) {
    const auto& records = split_records(split, s);
    if (records.empty()) continue;
    const std::string name = kSplitNames[s];
    validate_records(records, split.view_dims, split.categories, name);
    write_split(records, dir / (name + ".f32"), dir / (name + ".labels"), width);
    out << name << ".features = " << name << ".f32\n";
    out << name << ".labels = " << name << ".labels\n";
  }
  if (!out) throw IoError("failed writing " + manifest.string());
  return manifest;
}

void validate(const SynthConfig& cfg) {
  if (cfg.categories < 1) throw ConfigError("synth: categories must be >= 1");
  if (cfg.views < 1) throw ConfigError("synth: views must be >= 1");
  if (cfg.view_dims.size() != cfg.views) throw ConfigError("synth: one dimension per view");
  for (std::size_t d : cfg.view_dims) {
    if (d < 1) throw ConfigError("synth: view dimensions must be >= 1");
  }
  if (cfg.train_size < 1 || cfg.retrieval_size < 1 || cfg.query_size < 1) {
    throw ConfigError("synth: every split needs at least one sample");
  }
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("synth: sigma must be > 0");
  if (!(cfg.common_offset >= 0.0) || !std::isfinite(cfg.common_offset)) {
    throw ConfigError("synth: common offset must be >= 0");
  }
  if (!(cfg.multi_label_prob >= 0.0 && cfg.multi_label_prob <= 1.0)) {
    throw ConfigError("synth: multi-label probability must be in [0, 1]");
  }
}

namespace {

// Smallest radix r with r^views >= categories.
std::size_t complementary_radix(const SynthConfig& cfg) {
  std::size_t r = 1;
  while (true) {
    double span = 1.0;
    for (std::size_t v = 0; v < cfg.views; ++v) span *= static_cast<double>(r);
    if (span >= static_cast<double>(cfg.categories)) return r;
    ++r;
  }
}

}  // namespace

std::size_t anchor_group(const SynthConfig& cfg, std::size_t view, std::size_t category) {
  if (!cfg.complementary_views) return category;
  const std::size_t r = complementary_radix(cfg);
  std::size_t c = category;
  for (std::size_t v = 0; v < view; ++v) c /= r;
  return c % r;
}

DatasetSplit generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t groups = cfg.complementary_views ? complementary_radix(cfg) : cfg.categories;
  // anchors[v][g] is a unit direction in view v's feature space.
  std::vector<std::vector<Vector>> anchors(cfg.views);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    for (std::size_t g = 0; g < groups; ++g) {
      Vector a(cfg.view_dims[v]);
      double norm = 0.0;
      while (norm == 0.0) {
        for (double& x : a) x = gauss(rng);
        norm = std::sqrt(dot(a.span(), a.span()));
      }
      for (double& x : a) x /= norm;
      anchors[v].push_back(std::move(a));
    }
  }

  std::vector<Vector> offsets;
  for (std::size_t v = 0; v < cfg.views; ++v) {
    Vector o(cfg.view_dims[v]);
    double norm = 0.0;
    while (norm == 0.0) {
      for (double& x : o) x = gauss(rng);
      norm = std::sqrt(dot(o.span(), o.span()));
    }
    for (double& x : o) x *= cfg.common_offset / norm;
    offsets.push_back(std::move(o));
  }

  std::uniform_int_distribution<std::size_t> pick(0, cfg.categories - 1);
  std::bernoulli_distribution multi(cfg.multi_label_prob);
  std::normal_distribution<double> noise(0.0, cfg.sigma);

  auto make_records = [&](std::size_t count, const std::string& prefix) {
    std::vector<FeatureRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<std::size_t> cats = {pick(rng)};
      if (cfg.categories > 1 && multi(rng)) {
        std::uniform_int_distribution<std::size_t> other(0, cfg.categories - 2);
        std::size_t c = other(rng);
        if (c >= cats[0]) ++c;
        cats.push_back(c);
      }
      FeatureRecord r;
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%06zu", prefix.c_str(), i);
      r.id = id;
      r.label = Vector(cfg.categories);
      for (std::size_t c : cats) r.label[c] = 1.0;
      for (std::size_t v = 0; v < cfg.views; ++v) {
        Vector x(cfg.view_dims[v]);
        for (std::size_t c : cats) {
          const Vector& a = anchors[v][anchor_group(cfg, v, c)];
          for (std::size_t k = 0; k < x.size(); ++k) x[k] += a[k];
        }
        const double inv = 1.0 / static_cast<double>(cats.size());
        // Stored at float precision so the in-memory split equals its on-disk form.
        for (std::size_t k = 0; k < x.size(); ++k) {
          x[k] = static_cast<double>(static_cast<float>(x[k] * inv + offsets[v][k] + noise(rng)));
        }
        r.views.push_back(std::move(x));
      }
      out.push_back(std::move(r));
    }
    return out;
  };

  DatasetSplit split;
  split.view_dims = cfg.view_dims;
  split.categories = cfg.categories;
  split.train = make_records(cfg.train_size, "train");
  split.retrieval = make_records(cfg.retrieval_size, "retrieval");
  split.query = make_records(cfg.query_size, "query");
  return split;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<Batch> batches(const std::vector<FeatureRecord>& records, std::size_t batch_size,
                           std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (batch_size > records.size()) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds split size " +
                      std::to_string(records.size()));
  }
  const auto order = epoch_order(records.size(), seed, epoch);
  std::vector<Batch> out;
  for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size) {
    Batch b;
    b.reserve(batch_size);
    for (std::size_t i = start; i < start + batch_size; ++i) b.push_back(records[order[i]]);
    out.push_back(std::move(b));
  }
  return out;
}

Matrix label_matrix(const std::vector<FeatureRecord>& records) {
  const std::size_t c = records.empty() ? 0 : records.front().label.size();
  Matrix out(records.size(), c);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label.size() != c) throw ShapeError("label_matrix: category count mismatch");
    std::copy(records[i].label.begin(), records[i].label.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace dmmvh
