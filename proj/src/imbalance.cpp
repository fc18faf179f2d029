#include "native/imbalance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "native/error.hpp"
#include "native/rng.hpp"

namespace native {

namespace fs = std::filesystem;

ImbalanceLevel parse_imbalance_level(const std::string& s) {
  if (s == "entity") return ImbalanceLevel::entity;
  if (s == "modality") return ImbalanceLevel::modality;
  throw ConfigError("imbalance level must be 'entity' or 'modality', got '" + s + "'");
}

const char* to_string(ImbalanceLevel level) { return level == ImbalanceLevel::entity ? "entity" : "modality"; }

const char* to_string(GroupLabel g) {
  switch (g) {
    case GroupLabel::group1: return "group1";
    case GroupLabel::group2: return "group2";
    case GroupLabel::group3: return "group3";
  }
  return "?";
}

std::size_t drop_count(double eta, std::size_t n) {
  return static_cast<std::size_t>(std::round(eta * static_cast<double>(n)));
}

PerturbResult perturb(const FeatureStore& store, const KnowledgeGraph& kg, const ImbalanceSpec& spec) {
  if (!(spec.eta >= 0.0 && spec.eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
  if (store.modality_count() == 0) throw DataError("perturb: feature store declares no modalities");
  if (store.entity_count() != kg.entity_count()) throw DataError("perturb: store and graph disagree on |E|");

  PerturbResult result{store, {}, {}};
  if (spec.level == ImbalanceLevel::entity) {
    Rng rng = Rng::stream(spec.seed, "perturb");
    for (std::size_t idx : rng.sample(kg.entity_count(), drop_count(spec.eta, kg.entity_count()))) {
      result.dropped_entities.push_back(static_cast<EntityId>(idx));
    }
    std::sort(result.dropped_entities.begin(), result.dropped_entities.end());
    for (EntityId e : result.dropped_entities) {
      for (std::size_t m = 0; m < store.modality_count(); ++m) {
        if (!store.has(m, e)) continue;
        result.features.drop(m, e);
        result.dropped_slots.emplace_back(e, m);
      }
    }
  } else {
    for (std::size_t m = 0; m < store.modality_count(); ++m) {
      std::vector<EntityId> present;
      for (EntityId e = 0; e < store.entity_count(); ++e) {
        if (store.has(m, e)) present.push_back(e);
      }
      Rng rng = Rng::stream(spec.seed, "perturb/" + store.modality(m).name);
      for (std::size_t idx : rng.sample(present.size(), drop_count(spec.eta, present.size()))) {
        result.features.drop(m, present[idx]);
        result.dropped_slots.emplace_back(present[idx], m);
      }
    }
  }
  std::sort(result.dropped_slots.begin(), result.dropped_slots.end());
  return result;
}

void write_perturbed_dataset(const fs::path& src, const fs::path& dst, const Dataset& original,
                             const PerturbResult& result, const ImbalanceSpec& spec) {
  fs::create_directories(dst / "features");
  for (const char* name : {"entities.tsv", "relations.tsv", "train.tsv", "valid.tsv", "test.tsv", "manifest.json"}) {
    if (fs::exists(src / name)) fs::copy_file(src / name, dst / name, fs::copy_options::overwrite_existing);
  }

  const KnowledgeGraph& kg = original.kg;
  const FeatureStore& kept = result.features;
  for (std::size_t m = 0; m < kept.modality_count(); ++m) {
    const std::string file = kept.modality(m).name + ".tsv";
    std::ifstream in(src / "features" / file, std::ios::binary);
    std::ofstream out(dst / "features" / file, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) {
      const bool had_newline = !in.eof();
      const auto tab = line.find('\t');
      bool keep = true;
      if (tab != std::string::npos) {
        const auto e = kg.entities.find(std::string_view(line).substr(0, tab));
        keep = !e || kept.has(m, *e);
      }
      if (!keep) continue;
      out << line;
      if (had_newline) out << '\n';
    }
    if (!out) throw DataError((dst / "features" / file).string() + ": write failed");
  }

  nlohmann::ordered_json manifest;
  manifest["eta"] = spec.eta;
  manifest["level"] = to_string(spec.level);
  manifest["seed"] = spec.seed;
  manifest["dropped_entities"] = nlohmann::ordered_json::array();
  for (EntityId e : result.dropped_entities) manifest["dropped_entities"].push_back(kg.entities.name(e));
  manifest["dropped"] = nlohmann::ordered_json::array();
  for (const auto& [e, m] : result.dropped_slots) {
    manifest["dropped"].push_back({kg.entities.name(e), kept.modality(m).name});
  }
  std::ofstream(dst / "drop_manifest.json") << manifest.dump(2) << '\n';
}

std::vector<GroupLabel> group_split(const KnowledgeGraph& kg, const FeatureStore& store) {
  std::vector<GroupLabel> labels;
  labels.reserve(kg.test.size());
  for (const Triple& t : kg.test) {
    const int incomplete = int(!store.is_complete(t.head)) + int(!store.is_complete(t.tail));
    labels.push_back(static_cast<GroupLabel>(incomplete + 1));
  }
  return labels;
}

}  // namespace native
