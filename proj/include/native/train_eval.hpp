#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "native/batch.hpp"
#include "native/comat.hpp"
#include "native/imbalance.hpp"
#include "native/kg_data.hpp"
#include "native/optim.hpp"
#include "native/redaf.hpp"

namespace native {

// ---------------------------------------------------------------------------
// Training.

// K corruptions of one positive: a fair coin picks head or tail, and the
// replacement is uniform over the other |E| - 1 entities. Accidentally true
// corruptions are kept. DataError when there is only one entity.
std::vector<Corruption> negative_sample(const Triple& positive, std::size_t k, std::size_t entity_count, Rng& rng);

TrainingBatch make_batch(std::span<const Triple> positives, std::size_t k, std::size_t entity_count, Rng& rng);

struct LossRow {
  std::size_t epoch = 0;  // 1-based
  double d_loss = 0.0;    // mean L_D over the epoch's batches
  std::optional<double> g_loss;  // mean L_G over generator steps; unset without CoMAT
};

struct TrainOptions {
  ComatOptions comat;
  std::uint64_t seed = 0;
  // Also write a checkpoint every this many epochs (0 = only at the end).
  std::size_t save_every = 0;
  // Where checkpoints and losses.csv go; nothing is written when empty.
  std::filesystem::path out_dir;
  // Stored in every checkpoint manifest next to the model.
  nlohmann::ordered_json config;
  // Called after every epoch, mainly for progress output.
  std::function<void(const LossRow&)> on_epoch;
};

struct TrainResult {
  Discriminator discriminator;
  std::optional<GeneratorParams> generator;  // unset without CoMAT
  std::vector<LossRow> losses;
};

// Initial parameters for a run; what train() starts from.
TrainResult initial_state(const KnowledgeGraph& kg, const FeatureStore& store, const HyperParams& hp,
                          const TrainOptions& opt);

// Epoch loop over shuffled training triples. Per batch: negative sampling,
// one discriminator step, and with CoMAT one generator step every n_critic
// batches. Random streams: "init", "generator", "critic", "negatives",
// "noise", and "shuffle" reseeded per epoch with seed ^ epoch.
// NumericError names the epoch and batch on a non-finite loss or gradient.
TrainResult train(const KnowledgeGraph& kg, const FeatureStore& store, const HyperParams& hp,
                  const TrainOptions& opt);

// Model, generator and critic tensors as a checkpoint directory.
void save_training_checkpoint(const std::filesystem::path& dir, const TrainResult& state,
                              const nlohmann::ordered_json& config);

// "epoch,d_loss,g_loss", g_loss left empty when unset.
void write_losses_csv(const std::filesystem::path& path, std::span<const LossRow> rows);

// ---------------------------------------------------------------------------
// Evaluation.

// Frozen model prepared for ranking: joint embeddings of every entity under
// one relation at a time.
class Scorer {
 public:
  Scorer(const ModelParams& params, const FeatureStore& store, bool relation_guidance = true);

  const ModelParams& params() const { return *params_; }
  std::size_t entity_count() const { return params_->entity_count(); }

  // Joint embeddings [|E|, d] under relation r.
  Tensor joint(RelationId r) const;

  // Scores of (h, r, e) for every entity e, given joint(r).
  std::vector<double> tail_scores(const Tensor& joint, RelationId r, EntityId h) const;
  // Scores of (e, r, t) for every entity e, given joint(r).
  std::vector<double> head_scores(const Tensor& joint, RelationId r, EntityId t) const;

 private:
  const ModelParams* params_;
  const FeatureStore* store_;
  bool relation_guidance_;
};

// 1 + #(greater) + floor(#(ties) / 2) over candidates other than the truth
// and those listed in `filtered` (sorted).
std::size_t rank_of(std::span<const double> scores, EntityId truth, std::span<const EntityId> filtered);

// Filtered rank of the truth for (?, r, t) when predict_head, else (h, r, ?).
std::size_t rank_query(const Scorer& scorer, const FilterIndex& filter, const Triple& triple, bool predict_head);

struct MetricsReport {
  double mrr = 0.0;
  std::map<int, double> hits;  // K in {1, 3, 10}
  std::size_t n_queries = 0;
  std::map<std::string, MetricsReport> groups;
  double seconds = 0.0;
  std::vector<LossRow> losses;

  // Stable key order. Wall-clock time is left out so that identical runs
  // serialize identically.
  nlohmann::ordered_json to_json() const;
};

// Metrics of a list of ranks.
MetricsReport summarize(std::span<const std::size_t> ranks);

// Mean reciprocal rank of a scorer that orders n candidates uniformly at
// random: (1 + 1/2 + ... + 1/n) / n.
double random_mrr(std::size_t n);

struct EvalOptions {
  // Group label per split triple; adds one sub-report per group present.
  const std::vector<GroupLabel>* groups = nullptr;
  std::size_t threads = 1;
};

// Head and tail query per triple of `split`. Queries are sharded across
// threads; the result does not depend on the thread count. DataError on an
// empty split.
MetricsReport evaluate(std::span<const Triple> split, const Scorer& scorer, const FilterIndex& filter,
                       const EvalOptions& opt = {});

// "relation,zeta,sigmoid_zeta", one row per relation.
void write_temperatures_csv(const std::filesystem::path& path, const ModelParams& params,
                            const Vocabulary& relations);

// Mean fusion weight per modality for each relation, over the endpoints of
// the given triples. Rows are relations that occur, columns follow
// [S, modalities...].
struct WeightSummary {
  std::vector<std::string> modalities;
  std::vector<RelationId> relations;
  std::vector<std::vector<double>> weights;
};

WeightSummary modality_weight_summary(const ModelParams& params, const FeatureStore& store,
                                      std::span<const Triple> triples, bool relation_guidance = true);

void write_weight_summary_csv(const std::filesystem::path& path, const WeightSummary& summary,
                              const Vocabulary& relations);

}  // namespace native
