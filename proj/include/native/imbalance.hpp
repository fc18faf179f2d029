#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "native/kg_data.hpp"

namespace native {

enum class ImbalanceLevel { entity, modality };

ImbalanceLevel parse_imbalance_level(const std::string& s);
const char* to_string(ImbalanceLevel level);

struct ImbalanceSpec {
  double eta = 0.0;
  ImbalanceLevel level = ImbalanceLevel::entity;
  std::uint64_t seed = 0;
};

struct PerturbResult {
  FeatureStore features;
  // Entities chosen at entity level (ascending); empty at modality level.
  std::vector<EntityId> dropped_entities;
  // Every removed (entity, modality index) slot, sorted.
  std::vector<std::pair<EntityId, std::size_t>> dropped_slots;
};

// round(eta * n), half away from zero.
std::size_t drop_count(double eta, std::size_t n);

// Entity level: exactly drop_count(eta, |E|) entities, chosen uniformly,
// lose every modality entry. Modality level: for each modality m
// independently, exactly drop_count(eta, present(m)) of its present entries
// are removed. Removed slots become missing; nothing is zero-filled.
PerturbResult perturb(const FeatureStore& store, const KnowledgeGraph& kg, const ImbalanceSpec& spec);

// Copies the dataset at `src` into `dst` with the dropped feature lines
// removed. Every other file, and every surviving feature line, is copied
// byte for byte. Also writes drop_manifest.json.
void write_perturbed_dataset(const std::filesystem::path& src, const std::filesystem::path& dst,
                             const Dataset& original, const PerturbResult& result, const ImbalanceSpec& spec);

enum class GroupLabel { group1 = 1, group2 = 2, group3 = 3 };

const char* to_string(GroupLabel g);

// Per test triple, by modality completeness of its endpoints: both complete
// (Group1), exactly one incomplete (Group2), both incomplete (Group3).
std::vector<GroupLabel> group_split(const KnowledgeGraph& kg, const FeatureStore& store);

}  // namespace native
