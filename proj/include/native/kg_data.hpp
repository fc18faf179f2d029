#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace native {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Bidirectional name <-> dense id table. Ids are assigned in insertion order.
class Vocabulary {
 public:
  std::uint32_t add(std::string name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Known-true completions used by the filtered ranking protocol:
// (head, relation) -> tails and (relation, tail) -> heads.
class FilterIndex {
 public:
  void clear();
  void add(const Triple& t);
  bool contains(const Triple& t) const;
  // Sorted, duplicate-free. Empty when the pair was never seen.
  const std::vector<EntityId>& tails(EntityId head, RelationId relation) const;
  const std::vector<EntityId>& heads(RelationId relation, EntityId tail) const;
  std::size_t size() const { return count_; }

 private:
  static std::uint64_t key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; }

  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
  std::size_t count_ = 0;
};

struct KnowledgeGraph {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  // Spans train, valid and test.
  FilterIndex filter;

  std::size_t entity_count() const { return entities.size(); }
  std::size_t relation_count() const { return relations.size(); }
  void rebuild_filter();
};

struct ModalityInfo {
  std::string name;
  std::size_t dim = 0;

  friend bool operator==(const ModalityInfo&, const ModalityInfo&) = default;
};

// Name reserved for the structural modality; never a feature modality.
inline constexpr std::string_view kStructuralModality = "S";

// Raw per-entity feature vectors, one table per declared modality. Absence
// is explicit: a slot is either present with exactly `dim` values or missing.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::size_t entity_count, std::vector<ModalityInfo> modalities);

  std::size_t entity_count() const { return entity_count_; }
  std::size_t modality_count() const { return tables_.size(); }
  const ModalityInfo& modality(std::size_t m) const { return tables_.at(m).info; }
  std::vector<ModalityInfo> modalities() const;
  std::optional<std::size_t> find_modality(std::string_view name) const;

  bool has(std::size_t m, EntityId e) const { return tables_.at(m).present.at(e) != 0; }
  // Throws std::out_of_range when the slot is missing.
  std::span<const double> feature(std::size_t m, EntityId e) const;
  void set(std::size_t m, EntityId e, std::span<const double> values);
  void drop(std::size_t m, EntityId e);

  std::size_t present_count(std::size_t m) const;
  std::size_t entry_count(EntityId e) const;
  // True iff the entity has an entry for every declared modality.
  bool is_complete(EntityId e) const { return entry_count(e) == modality_count(); }

  // Keeps only the named modalities, in the order given. Unknown names throw
  // ConfigError; the structural name "S" is accepted and skipped.
  FeatureStore select(std::span<const std::string> names) const;

  friend bool operator==(const FeatureStore&, const FeatureStore&) = default;

 private:
  struct Table {
    ModalityInfo info;
    std::vector<double> values;
    std::vector<std::uint8_t> present;

    friend bool operator==(const Table&, const Table&) = default;
  };

  std::size_t entity_count_ = 0;
  std::vector<Table> tables_;
};

struct Dataset {
  KnowledgeGraph kg;
  FeatureStore features;
};

// Reads the dataset directory layout:
//   entities.tsv, relations.tsv     one name per line, line number = id
//   train.tsv, valid.tsv, test.tsv  head<TAB>relation<TAB>tail
//   features/<modality>.tsv         entity<TAB>v1 v2 ... v_d
//   manifest.json                   {"modalities": [{"name", "dim"}, ...]}
// Throws DataError naming the file and line on malformed input.
Dataset load_dataset(const std::filesystem::path& dir);

// Writes `data` in the layout above. Feature values use the shortest
// round-trip decimal form, so a reload is exact.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);

}  // namespace native
