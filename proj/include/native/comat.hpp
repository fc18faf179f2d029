#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "native/optim.hpp"
#include "native/redaf.hpp"

namespace native {

enum class AdversarialLoss { wasserstein, vanilla };
enum class CriticKind { score, mlp };
// `paper` keeps the leading minus on the penalty; `standard` drops it.
enum class GpSign { paper, standard };

struct ComatOptions {
  bool enabled = true;
  bool gradient_penalty = true;
  AdversarialLoss loss = AdversarialLoss::wasserstein;
  CriticKind critic = CriticKind::score;
  GpSign gp_sign = GpSign::paper;
  bool relation_guidance = true;
};

GpSign parse_gp_sign(const std::string& s);
const char* to_string(GpSign s);

// Generator MLP: [e_real, z] (N d + noise) -> relu -> 2 N d -> N d.
struct GeneratorParams {
  std::size_t fused_count = 0;  // N
  std::size_t dim = 0;
  std::size_t noise_dim = 0;
  Mlp mlp;

  static GeneratorParams initialize(std::size_t fused_count, std::size_t dim, std::size_t noise_dim,
                                    std::uint64_t seed);
  std::vector<Tensor*> trainable() { return {&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2}; }
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

// Two-layer tanh MLP critic over concatenated per-modality embeddings
// (N d -> d -> 1), used only by the MLP-discriminator ablation.
Mlp init_mlp_critic(std::size_t fused_count, std::size_t dim, std::uint64_t seed);
std::vector<std::pair<std::string, const Tensor*>> critic_named_tensors(const Mlp& critic);

// Concatenation of an entity's embeddings in the fixed order [S, m_1, ...]
// -> [N d].
ad::Var concat_real(const BoundModel& model, const FeatureStore& store, EntityId e);
// Real rows of a batch, positive heads then positive tails -> [2B, N d].
ad::Var concat_real(const KgcForward& real);

// Per-modality synthetic embeddings, same order as concat_real: N parts,
// each [n, d].
struct SyntheticEntities {
  std::vector<ad::Var> parts;
};

SyntheticEntities generate(const BoundMlp& gen, ad::Var e_real, ad::Var z, std::size_t fused_count);
// i.i.d. standard normal noise [n, noise_dim].
Tensor draw_noise(std::size_t n, std::size_t noise_dim, Rng& rng);

// What a critic makes of a batch: real and synthetic scores grouped per
// positive, plus the critic's input gradients at the synthetic points.
struct CriticScores {
  ad::Var real;                   // [B * real_per_positive]
  ad::Var synthetic;              // [B * synthetic_per_positive]
  std::size_t real_per_positive = 1;
  std::size_t synthetic_per_positive = 3;
  std::vector<ad::Var> input_grads;  // each [rows, width]
};

// Score-function critic: for each positive (h, r, t) the synthetic set
// {(h*, r, t), (h, r, t*), (h*, r, t*)} is fused with ReDAF and scored by F.
// `synthetic` holds heads in rows [0, B) and tails in rows [B, 2B). Input
// gradients are taken w.r.t. the synthetic joint embeddings only: h* in the
// first and third triple, t* in the second and third.
CriticScores score_critic(const BoundModel& model, const KgcForward& real, const TrainingBatch& batch,
                          const SyntheticEntities& synthetic, bool with_grads, double eps = kResidualEps);

// MLP critic over concatenated embeddings; reals are h and t, synthetics
// are h* and t*.
CriticScores mlp_critic(const BoundMlp& critic, const KgcForward& real, const SyntheticEntities& synthetic,
                        bool with_grads);

// sum_b [ -mean(real_b) + mean(synthetic_b) ]
ad::Var adv_loss(const CriticScores& s);
// sign * sum over input gradients of (||grad|| - 1)^2, sign = -1 for `paper`.
ad::Var gradient_penalty(const CriticScores& s, GpSign sign);
// -sum_b [ mean log p(real_b) + mean log(1 - p(synthetic_b)) ], p = sigmoid
// clamped to [1e-7, 1 - 1e-7].
ad::Var vanilla_d_loss(const CriticScores& s);
// Non-saturating generator loss: -sum_b mean log p(synthetic_b).
ad::Var vanilla_g_loss(const CriticScores& s);

// Discriminator-side state: the model plus the optional MLP critic.
struct Discriminator {
  ModelParams model;
  std::optional<Mlp> critic;

  std::vector<Tensor*> trainable();
};

struct StepLosses {
  double total = 0.0;
  double kgc = 0.0;
  double adv = 0.0;
  double gp = 0.0;
};

// L_D = L_kgc + lambda1 L_adv with the generator frozen and its output
// detached; one Adam update of the discriminator, phases re-wrapped.
// Draws noise only when the adversarial term is active (enabled and
// lambda1 > 0).
StepLosses discriminator_step(Discriminator& d, const GeneratorParams& gen, const FeatureStore& store,
                              const TrainingBatch& batch, const HyperParams& hp, const ComatOptions& opt,
                              Rng& noise, AdamState& state);

// L_G = -L_adv + lambda2 L_gp with the discriminator frozen; one Adam update
// of the generator. Negatives in `batch` are ignored.
StepLosses generator_step(const Discriminator& d, GeneratorParams& gen, const FeatureStore& store,
                          const TrainingBatch& batch, const HyperParams& hp, const ComatOptions& opt, Rng& noise,
                          AdamState& state);

}  // namespace native
