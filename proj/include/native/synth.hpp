#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "native/kg_data.hpp"

namespace native {

// Toy multi-modal KG with planted structure.
//
// Entities are split evenly into `clusters` groups (random assignment).
// Relation r carries a cyclic cluster shift s_r: a pair (h, t) with
// cluster(t) = cluster(h) + s_r (mod clusters) becomes a triple with
// probability `density`. Each modality has one centroid per cluster drawn
// uniformly from [-1, 1]^dim; an entity's feature is its cluster centroid
// plus per-coordinate uniform noise in [-noise, noise], rounded to 6
// decimals. Centroids are redrawn until every pair is more than 4 * noise
// apart in the max norm, so each feature sits within the noise box of
// exactly one centroid.
struct SynthSpec {
  std::size_t entities = 100;
  std::size_t relations = 10;
  std::size_t clusters = 20;
  std::vector<ModalityInfo> modalities = {{"image", 16}, {"text", 16}};
  double density = 0.1;
  double noise = 0.05;
  std::uint64_t seed = 7;

  // Throws ConfigError on degenerate sizes.
  void validate() const;
};

struct SynthTruth {
  std::vector<std::size_t> cluster_of;                // per entity
  std::vector<std::size_t> shift;                     // per relation
  std::vector<std::vector<std::vector<double>>> centroids;  // [modality][cluster][dim]
};

SynthTruth synth_truth(const SynthSpec& spec);
Dataset generate_synthetic(const SynthSpec& spec);
// generate_synthetic + write_dataset. Output is byte-identical per spec.
void gen_synth(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace native
