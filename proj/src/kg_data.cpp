#include "native/kg_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "native/error.hpp"

namespace native {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Vocabulary

std::uint32_t Vocabulary::add(std::string name) {
  if (index_.contains(name)) throw DataError("duplicate name '" + name + "'");
  const auto id = static_cast<std::uint32_t>(names_.size());
  index_.emplace(name, id);
  names_.push_back(std::move(name));
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// FilterIndex

namespace {

const std::vector<EntityId>& empty_list() {
  static const std::vector<EntityId> empty;
  return empty;
}

// Inserts keeping the list sorted; returns false when already present.
bool insert_sorted(std::vector<EntityId>& list, EntityId e) {
  const auto it = std::lower_bound(list.begin(), list.end(), e);
  if (it != list.end() && *it == e) return false;
  list.insert(it, e);
  return true;
}

}  // namespace

void FilterIndex::clear() {
  tails_.clear();
  heads_.clear();
  count_ = 0;
}

void FilterIndex::add(const Triple& t) {
  if (insert_sorted(tails_[key(t.head, t.relation)], t.tail)) ++count_;
  insert_sorted(heads_[key(t.relation, t.tail)], t.head);
}

bool FilterIndex::contains(const Triple& t) const {
  const auto& list = tails(t.head, t.relation);
  return std::binary_search(list.begin(), list.end(), t.tail);
}

const std::vector<EntityId>& FilterIndex::tails(EntityId head, RelationId relation) const {
  const auto it = tails_.find(key(head, relation));
  return it == tails_.end() ? empty_list() : it->second;
}

const std::vector<EntityId>& FilterIndex::heads(RelationId relation, EntityId tail) const {
  const auto it = heads_.find(key(relation, tail));
  return it == heads_.end() ? empty_list() : it->second;
}

void KnowledgeGraph::rebuild_filter() {
  filter.clear();
  for (const auto* split : {&train, &valid, &test}) {
    for (const Triple& t : *split) filter.add(t);
  }
}

// ---------------------------------------------------------------------------
// FeatureStore

FeatureStore::FeatureStore(std::size_t entity_count, std::vector<ModalityInfo> modalities)
    : entity_count_(entity_count) {
  for (auto& info : modalities) {
    if (info.dim == 0) throw DataError("modality '" + info.name + "' has zero dimension");
    if (info.name == kStructuralModality) throw DataError("modality name 'S' is reserved for structure");
    for (const Table& t : tables_) {
      if (t.info.name == info.name) throw DataError("duplicate modality '" + info.name + "'");
    }
    Table table;
    table.values.assign(entity_count * info.dim, 0.0);
    table.present.assign(entity_count, 0);
    table.info = std::move(info);
    tables_.push_back(std::move(table));
  }
}

std::vector<ModalityInfo> FeatureStore::modalities() const {
  std::vector<ModalityInfo> out;
  for (const Table& t : tables_) out.push_back(t.info);
  return out;
}

std::optional<std::size_t> FeatureStore::find_modality(std::string_view name) const {
  for (std::size_t m = 0; m < tables_.size(); ++m) {
    if (tables_[m].info.name == name) return m;
  }
  return std::nullopt;
}

std::span<const double> FeatureStore::feature(std::size_t m, EntityId e) const {
  const Table& t = tables_.at(m);
  if (!t.present.at(e)) {
    throw std::out_of_range("feature: entity " + std::to_string(e) + " has no '" + t.info.name + "' entry");
  }
  return std::span<const double>(t.values).subspan(std::size_t{e} * t.info.dim, t.info.dim);
}

void FeatureStore::set(std::size_t m, EntityId e, std::span<const double> values) {
  Table& t = tables_.at(m);
  if (values.size() != t.info.dim) {
    throw DataError("modality '" + t.info.name + "' expects " + std::to_string(t.info.dim) + " values, got " +
                    std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), t.values.begin() + std::size_t{e} * t.info.dim);
  t.present.at(e) = 1;
}

void FeatureStore::drop(std::size_t m, EntityId e) {
  Table& t = tables_.at(m);
  t.present.at(e) = 0;
  std::fill_n(t.values.begin() + std::size_t{e} * t.info.dim, t.info.dim, 0.0);
}

std::size_t FeatureStore::present_count(std::size_t m) const {
  const auto& p = tables_.at(m).present;
  return static_cast<std::size_t>(std::count(p.begin(), p.end(), std::uint8_t{1}));
}

std::size_t FeatureStore::entry_count(EntityId e) const {
  std::size_t n = 0;
  for (const Table& t : tables_) n += t.present.at(e);
  return n;
}

FeatureStore FeatureStore::select(std::span<const std::string> names) const {
  FeatureStore out;
  out.entity_count_ = entity_count_;
  for (const std::string& name : names) {
    if (name == kStructuralModality) continue;
    const auto m = find_modality(name);
    if (!m) throw ConfigError("unknown modality '" + name + "'");
    for (const Table& t : out.tables_) {
      if (t.info.name == name) throw ConfigError("modality '" + name + "' listed twice");
    }
    out.tables_.push_back(tables_[*m]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError(path.string() + ": cannot open");
  }

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path_.string() + ":" + std::to_string(number_) + ": " + what);
  }

 private:
  fs::path path_;
  std::ifstream in_;
  std::size_t number_ = 0;
};

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Vocabulary read_vocabulary(const fs::path& path) {
  LineReader reader(path);
  std::vector<std::string> lines;
  std::string line;
  while (reader.next(line)) lines.push_back(line);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();

  Vocabulary vocab;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1) + ": ";
    if (lines[i].empty()) throw DataError(where + "blank line inside vocabulary");
    if (lines[i].find('\t') != std::string::npos) throw DataError(where + "tab in name");
    try {
      vocab.add(lines[i]);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
  }
  return vocab;
}

std::vector<Triple> read_triples(const fs::path& path, const KnowledgeGraph& kg) {
  std::vector<Triple> out;
  if (!fs::exists(path)) return out;
  LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto cols = split_on(line, '\t');
    if (cols.size() != 3) reader.fail("expected head<TAB>relation<TAB>tail");
    const auto h = kg.entities.find(cols[0]);
    const auto r = kg.relations.find(cols[1]);
    const auto t = kg.entities.find(cols[2]);
    if (!h) reader.fail("unknown entity '" + std::string(cols[0]) + "'");
    if (!r) reader.fail("unknown relation '" + std::string(cols[1]) + "'");
    if (!t) reader.fail("unknown entity '" + std::string(cols[2]) + "'");
    out.push_back({*h, *r, *t});
  }
  return out;
}

void read_features(const fs::path& path, std::size_t m, const KnowledgeGraph& kg, FeatureStore& store) {
  LineReader reader(path);
  const std::size_t dim = store.modality(m).dim;
  std::string line;
  std::vector<double> values;
  std::size_t first_width = 0;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) reader.fail("expected entity<TAB>values");
    const std::string_view name(line.data(), tab);
    const auto e = kg.entities.find(name);
    if (!e) reader.fail("unknown entity '" + std::string(name) + "'");
    if (store.has(m, *e)) reader.fail("duplicate entry for entity '" + std::string(name) + "'");

    values.clear();
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next != end && *next != ' ')) reader.fail("malformed number");
      values.push_back(v);
      p = next;
    }
    if (first_width == 0) first_width = values.size();
    if (values.size() != first_width || values.size() != dim) {
      reader.fail("dimension mismatch: row has " + std::to_string(values.size()) + " values, expected " +
                  std::to_string(first_width != values.size() ? first_width : dim));
    }
    store.set(m, *e, values);
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_triples(const fs::path& path, const std::vector<Triple>& triples, const KnowledgeGraph& kg) {
  std::ofstream out(path);
  for (const Triple& t : triples) {
    out << kg.entities.name(t.head) << '\t' << kg.relations.name(t.relation) << '\t' << kg.entities.name(t.tail)
        << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a dataset directory");
  Dataset data;
  KnowledgeGraph& kg = data.kg;
  kg.entities = read_vocabulary(dir / "entities.tsv");
  kg.relations = read_vocabulary(dir / "relations.tsv");
  kg.train = read_triples(dir / "train.tsv", kg);
  kg.valid = read_triples(dir / "valid.tsv", kg);
  kg.test = read_triples(dir / "test.tsv", kg);
  kg.rebuild_filter();

  std::vector<ModalityInfo> modalities;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(in);
      for (const auto& m : manifest.at("modalities")) {
        modalities.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(manifest_path.string() + ": " + e.what());
    }
    if (manifest.contains("n_entities") && manifest["n_entities"].get<std::size_t>() != kg.entity_count()) {
      throw DataError(manifest_path.string() + ": n_entities disagrees with entities.tsv");
    }
    if (manifest.contains("n_relations") && manifest["n_relations"].get<std::size_t>() != kg.relation_count()) {
      throw DataError(manifest_path.string() + ": n_relations disagrees with relations.tsv");
    }
  }

  data.features = FeatureStore(kg.entity_count(), modalities);
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    const fs::path path = dir / "features" / (modalities[m].name + ".tsv");
    if (!fs::exists(path)) throw DataError(path.string() + ": missing feature file for declared modality");
    read_features(path, m, kg, data.features);
  }
  return data;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  const KnowledgeGraph& kg = data.kg;
  fs::create_directories(dir / "features");
  for (const auto& [file, vocab] : {std::pair{"entities.tsv", &kg.entities}, std::pair{"relations.tsv", &kg.relations}}) {
    std::ofstream out(dir / file);
    for (const auto& name : vocab->names()) out << name << '\n';
  }
  write_triples(dir / "train.tsv", kg.train, kg);
  write_triples(dir / "valid.tsv", kg.valid, kg);
  write_triples(dir / "test.tsv", kg.test, kg);

  const FeatureStore& fsx = data.features;
  nlohmann::ordered_json manifest;
  manifest["modalities"] = nlohmann::ordered_json::array();
  for (std::size_t m = 0; m < fsx.modality_count(); ++m) {
    manifest["modalities"].push_back({{"name", fsx.modality(m).name}, {"dim", fsx.modality(m).dim}});
    std::ofstream out(dir / "features" / (fsx.modality(m).name + ".tsv"));
    for (EntityId e = 0; e < fsx.entity_count(); ++e) {
      if (!fsx.has(m, e)) continue;
      out << kg.entities.name(e) << '\t';
      const auto values = fsx.feature(m, e);
      for (std::size_t j = 0; j < values.size(); ++j) {
        if (j) out << ' ';
        out << format_double(values[j]);
      }
      out << '\n';
    }
  }
  manifest["n_entities"] = kg.entity_count();
  manifest["n_relations"] = kg.relation_count();
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

}  // namespace native
