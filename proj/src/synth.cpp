#include "native/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "native/error.hpp"
#include "native/rng.hpp"

namespace native {

void SynthSpec::validate() const {
  if (entities < 10) throw ConfigError("gen-synth: need at least 10 entities");
  if (relations < 1) throw ConfigError("gen-synth: need at least 1 relation");
  if (clusters < 1 || clusters > entities) throw ConfigError("gen-synth: clusters must lie in [1, entities]");
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("gen-synth: density must lie in (0, 1]");
  if (!(noise >= 0.0 && noise < 0.25)) throw ConfigError("gen-synth: noise must lie in [0, 0.25)");
  for (const auto& m : modalities) {
    if (m.dim < 2) throw ConfigError("gen-synth: modality '" + m.name + "' needs dim >= 2");
    if (m.name.empty() || m.name == kStructuralModality) throw ConfigError("gen-synth: bad modality name");
  }
}

namespace {

double max_norm_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

SynthTruth synth_truth(const SynthSpec& spec) {
  spec.validate();
  SynthTruth truth;

  std::vector<std::size_t> order(spec.entities);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng assign = Rng::stream(spec.seed, "synth/clusters");
  assign.shuffle(order);
  truth.cluster_of.resize(spec.entities);
  for (std::size_t i = 0; i < spec.entities; ++i) truth.cluster_of[order[i]] = i % spec.clusters;

  Rng shifts = Rng::stream(spec.seed, "synth/shifts");
  for (std::size_t r = 0; r < spec.relations; ++r) {
    truth.shift.push_back(spec.clusters == 1 ? 0 : 1 + shifts.below(spec.clusters - 1));
  }

  const double min_separation = 4.0 * spec.noise;
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    Rng rng = Rng::stream(spec.seed, "synth/centroids", m);
    std::vector<std::vector<double>> cents;
    while (cents.size() < spec.clusters) {
      std::vector<double> c(spec.modalities[m].dim);
      for (double& v : c) v = rng.uniform(-1.0, 1.0);
      const bool separated = std::all_of(cents.begin(), cents.end(), [&](const auto& other) {
        return max_norm_distance(c, other) > min_separation;
      });
      if (separated) cents.push_back(std::move(c));
    }
    truth.centroids.push_back(std::move(cents));
  }
  return truth;
}

Dataset generate_synthetic(const SynthSpec& spec) {
  const SynthTruth truth = synth_truth(spec);
  Dataset data;
  KnowledgeGraph& kg = data.kg;
  for (std::size_t e = 0; e < spec.entities; ++e) kg.entities.add("e" + std::to_string(e));
  for (std::size_t r = 0; r < spec.relations; ++r) kg.relations.add("r" + std::to_string(r));

  std::vector<std::vector<EntityId>> members(spec.clusters);
  for (std::size_t e = 0; e < spec.entities; ++e) members[truth.cluster_of[e]].push_back(static_cast<EntityId>(e));

  std::vector<Triple> all;
  Rng links = Rng::stream(spec.seed, "synth/links");
  for (std::size_t r = 0; r < spec.relations; ++r) {
    for (std::size_t c = 0; c < spec.clusters; ++c) {
      const auto& tails = members[(c + truth.shift[r]) % spec.clusters];
      for (EntityId h : members[c]) {
        for (EntityId t : tails) {
          if (h == t) continue;
          if (links.uniform() < spec.density) all.push_back({h, static_cast<RelationId>(r), t});
        }
      }
    }
  }
  Rng split = Rng::stream(spec.seed, "synth/split");
  split.shuffle(all);
  const std::size_t n_train = static_cast<std::size_t>(std::round(0.8 * static_cast<double>(all.size())));
  const std::size_t n_valid = static_cast<std::size_t>(std::round(0.1 * static_cast<double>(all.size())));
  kg.train.assign(all.begin(), all.begin() + n_train);
  kg.valid.assign(all.begin() + n_train, all.begin() + n_train + n_valid);
  kg.test.assign(all.begin() + n_train + n_valid, all.end());
  kg.rebuild_filter();

  data.features = FeatureStore(spec.entities, spec.modalities);
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    Rng noise = Rng::stream(spec.seed, "synth/noise", m);
    std::vector<double> f(spec.modalities[m].dim);
    for (std::size_t e = 0; e < spec.entities; ++e) {
      const auto& c = truth.centroids[m][truth.cluster_of[e]];
      for (std::size_t j = 0; j < f.size(); ++j) f[j] = round6(c[j] + noise.uniform(-spec.noise, spec.noise));
      data.features.set(m, static_cast<EntityId>(e), f);
    }
  }
  return data;
}

void gen_synth(const SynthSpec& spec, const std::filesystem::path& dir) { write_dataset(generate_synthetic(spec), dir); }

}  // namespace native
