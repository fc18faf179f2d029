#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "native/autodiff.hpp"
#include "native/batch.hpp"
#include "native/kg_data.hpp"
#include "native/rng.hpp"
#include "native/tensor.hpp"

namespace native {

struct HyperParams {
  std::size_t dim = 250;  // d_e; relations carry dim / 2 phases
  double gamma = 12.0;
  double beta = 2.0;
  std::size_t negatives = 64;
  double lambda1 = 1e-3;
  double lambda2 = 1e-4;
  std::size_t noise_dim = 64;
  double lr_d = 1e-4;
  double lr_g = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1000;
  std::size_t n_critic = 1;

  std::size_t relation_dim() const { return dim / 2; }
  // ConfigError unless every size is positive, dim is even, the learning
  // rates and beta are positive and the loss weights are non-negative.
  void validate() const;

  // Small sizes for single-core runs on synthetic data.
  static HyperParams desk();

  nlohmann::ordered_json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);
};

enum class Activation { relu, tanh };

// Two dense layers: act(x w1 + b1) w2 + b2.
struct Mlp {
  Tensor w1, b1, w2, b2;

  std::size_t in_dim() const { return w1.shape()[0]; }
  std::size_t hidden_dim() const { return w1.shape()[1]; }
  std::size_t out_dim() const { return w2.shape()[1]; }

  // Glorot-uniform weights, zero biases.
  static Mlp xavier(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct ModelParams {
  std::size_t dim = 0;
  std::vector<ModalityInfo> modalities;  // feature modalities; S is implicit
  Tensor entity_embeddings;              // [|E|, d]
  Tensor relation_phases;                // [|R|, d/2]
  std::vector<Mlp> projections;          // per modality, d_m -> d -> d
  Tensor fusion_vector;                  // [d]
  Tensor relation_temperatures;          // [|R|], sigmoid gives the temperature
  // Raw stand-in features for missing slots, per modality [|E|, d_m].
  // Drawn once at initialization and never trained.
  std::vector<Tensor> missing_features;

  std::size_t entity_count() const { return entity_embeddings.shape()[0]; }
  std::size_t relation_count() const { return relation_phases.shape()[0]; }
  // Number of fused embeddings per entity: S plus each feature modality.
  std::size_t fused_count() const { return modalities.size() + 1; }

  static ModelParams initialize(std::size_t n_entities, std::size_t n_relations, std::size_t dim,
                                std::vector<ModalityInfo> modalities, std::uint64_t seed);

  // Learned tensors in a fixed order; names are stable checkpoint keys.
  std::vector<Tensor*> trainable();
  std::vector<std::string> trainable_names() const;
  // Every tensor including the missing-feature bank, keyed by file stem.
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  // Wraps every relation phase into (-pi, pi].
  void wrap_phases();

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

double wrap_phase(double theta);

// Throws DataError when the store's modalities or entity count differ from
// the model's.
void check_compatible(const ModelParams& params, const FeatureStore& store);

// ---------------------------------------------------------------------------
// Differentiable forward pass.

struct BoundMlp {
  ad::Var w1, b1, w2, b2;
};

ad::Var mlp_forward(const BoundMlp& mlp, ad::Var x, Activation act);
BoundMlp bind_mlp(ad::Tape& tape, const Mlp& mlp, bool trainable);

// ModelParams placed on a tape. With trainable = false every tensor is a
// constant, which freezes the model for a generator step or evaluation.
struct BoundModel {
  const ModelParams* params = nullptr;
  ad::Var entities;
  ad::Var phases;
  ad::Var fusion_column;  // fusion vector as [d, 1]
  ad::Var temperatures;
  std::vector<BoundMlp> projections;
  // Leaves parallel to ModelParams::trainable().
  std::vector<ad::Var> leaves;
  // When false every relation uses temperature 1 (ablation).
  bool relation_guidance = true;

  ad::Tape& tape() const { return *entities.tape(); }
};

BoundModel bind(ad::Tape& tape, const ModelParams& params, bool trainable, bool relation_guidance = true);

// Per-modality embeddings of a list of entities. embeddings[0] is the
// structural embedding; embeddings[1 + m] projects modality m, using the
// missing-feature bank where the store has no entry.
struct EntityEncoding {
  std::vector<EntityId> entities;
  std::vector<ad::Var> embeddings;  // each [n, d]
};

EntityEncoding encode_entities(const BoundModel& model, const FeatureStore& store, std::vector<EntityId> entities);

// Fusion logit per (row, modality): V . tanh(e_m) -> [n, N].
ad::Var modality_logits(const BoundModel& model, std::span<const ad::Var> embeddings);

// sigmoid(zeta_r) per listed relation, or ones without relation guidance.
ad::Var relation_scale(const BoundModel& model, std::span<const RelationId> relations);

struct Fusion {
  ad::Var joint;    // [n, d]
  ad::Var weights;  // [n, N]
};

// Fuses the selected rows of `embeddings` under the matching relations:
// omega = softmax(logits / temperature), joint = sum_m omega_m e_m.
Fusion fuse_rows(const BoundModel& model, std::span<const ad::Var> embeddings, ad::Var logits,
                 std::span<const std::size_t> rows, std::span<const RelationId> relations);

// Phases of the listed relations, [n, d/2].
ad::Var relation_rows(const BoundModel& model, std::span<const RelationId> relations);

// F = -||rotate(h, theta_r) - t|| per row -> [n].
ad::Var score_rows(const BoundModel& model, ad::Var heads, std::span<const RelationId> relations, ad::Var tails);

struct ScoreGrad {
  ad::Var head;  // dF/dh, [n, d]
  ad::Var tail;  // dF/dt, [n, d]
};

inline constexpr double kResidualEps = 1e-12;

// Closed-form input gradient of F, itself a differentiable graph:
// dF/dt = res / |res|, dF/dh = -rotate(res, -theta) / |res| with
// res = rotate(h, theta) - t and |res| = sqrt(sum res^2 + eps).
ScoreGrad score_input_grad(const BoundModel& model, ad::Var heads, std::span<const RelationId> relations,
                           ad::Var tails, double eps = kResidualEps);

// softmax(beta * scores); plain numbers, so no gradient flows through them.
std::vector<double> self_adv_weights(std::span<const double> scores, double beta);

// Negative-sampling loss summed over the batch:
//   sum_b [ -log sig(gamma + F_b) - sum_i p_bi log sig(-F_bi - gamma) ]
// positive: [B]; negative: [B, K].
ad::Var kgc_loss(ad::Var positive, ad::Var negative, const HyperParams& hp);
// Same loss with caller-supplied weights p [B, K].
ad::Var kgc_loss(ad::Var positive, ad::Var negative, const Tensor& weights, const HyperParams& hp);
// Row-wise self_adv_weights of a [B, K] score matrix.
Tensor self_adv_weights(const Tensor& scores, double beta);

// Scores of a batch of positives and their corruptions. Each distinct
// entity is encoded once; every (entity, relation) row is fused once.
struct KgcForward {
  EntityEncoding encoding;
  ad::Var logits;                       // [U, N] over encoding rows
  std::vector<std::size_t> head_rows;   // encoding row of each positive head
  std::vector<std::size_t> tail_rows;   // encoding row of each positive tail
  ad::Var head_joint;                   // [B, d] positive heads fused under r
  ad::Var tail_joint;                   // [B, d]
  ad::Var positive;                     // [B]
  ad::Var negative;                     // [B, K]; unset when K = 0
};

KgcForward forward_kgc(const BoundModel& model, const FeatureStore& store, const TrainingBatch& batch);

// ---------------------------------------------------------------------------
// Single-entity conveniences built on the batched forms.

// Embedding of entity e in the named modality ("S" gives the structural
// embedding) -> [d]. ConfigError for a modality the model does not declare.
ad::Var encode_modality(const BoundModel& model, const FeatureStore& store, EntityId e, std::string_view modality);
// Fusion weights of the given [d] embeddings under relation r -> [N].
ad::Var modality_weights(const BoundModel& model, RelationId r, std::span<const ad::Var> embeddings);
// Joint embedding [d] and weights [N] of entity e under relation r.
Fusion fuse(const BoundModel& model, const FeatureStore& store, EntityId e, RelationId r);
// Score of [d] joint embeddings -> scalar.
ad::Var score(const BoundModel& model, ad::Var head, RelationId r, ad::Var tail);

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json plus one NKGT file per tensor.

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

struct Checkpoint {
  ModelParams model;
  std::map<std::string, Tensor> extra;  // e.g. generator tensors
  nlohmann::json hyperparams;
};

void save_checkpoint(const std::filesystem::path& dir, const ModelParams& model,
                     const std::vector<std::pair<std::string, const Tensor*>>& extra,
                     const nlohmann::ordered_json& hyperparams);
// DataError when the directory, manifest or any tensor is missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace native
