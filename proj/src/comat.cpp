#include "native/comat.hpp"

#include <numeric>

#include "native/error.hpp"

namespace native {

using ad::Var;

GpSign parse_gp_sign(const std::string& s) {
  if (s == "paper") return GpSign::paper;
  if (s == "standard") return GpSign::standard;
  throw ConfigError("gp_sign must be 'paper' or 'standard', got '" + s + "'");
}

const char* to_string(GpSign s) { return s == GpSign::paper ? "paper" : "standard"; }

GeneratorParams GeneratorParams::initialize(std::size_t fused_count, std::size_t dim, std::size_t noise_dim,
                                            std::uint64_t seed) {
  GeneratorParams g;
  g.fused_count = fused_count;
  g.dim = dim;
  g.noise_dim = noise_dim;
  Rng rng = Rng::stream(seed, "generator");
  const std::size_t width = fused_count * dim;
  g.mlp = Mlp::xavier(width + noise_dim, 2 * width, width, rng);
  return g;
}

std::vector<std::pair<std::string, const Tensor*>> GeneratorParams::named_tensors() const {
  return {{"gen.w1", &mlp.w1}, {"gen.b1", &mlp.b1}, {"gen.w2", &mlp.w2}, {"gen.b2", &mlp.b2}};
}

Mlp init_mlp_critic(std::size_t fused_count, std::size_t dim, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "critic");
  return Mlp::xavier(fused_count * dim, dim, 1, rng);
}

std::vector<std::pair<std::string, const Tensor*>> critic_named_tensors(const Mlp& critic) {
  return {{"critic.w1", &critic.w1}, {"critic.b1", &critic.b1}, {"critic.w2", &critic.w2}, {"critic.b2", &critic.b2}};
}

Var concat_real(const BoundModel& model, const FeatureStore& store, EntityId e) {
  const EntityEncoding enc = encode_entities(model, store, {e});
  return ad::reshape(ad::concat(enc.embeddings), {enc.embeddings.size() * model.params->dim});
}

Var concat_real(const KgcForward& real) {
  std::vector<std::size_t> rows = real.head_rows;
  rows.insert(rows.end(), real.tail_rows.begin(), real.tail_rows.end());
  return ad::gather_rows(ad::concat(real.encoding.embeddings), rows);
}

SyntheticEntities generate(const BoundMlp& gen, Var e_real, Var z, std::size_t fused_count) {
  const Var parts[] = {e_real, z};
  const Var out = mlp_forward(gen, ad::concat(parts), Activation::relu);
  if (out.shape() != e_real.shape()) {
    throw ShapeError("generate: output " + shape_str(out.shape()) + " differs from input " +
                     shape_str(e_real.shape()));
  }
  const std::vector<std::size_t> sizes(fused_count, e_real.shape().back() / fused_count);
  return {ad::split(out, sizes)};
}

Tensor draw_noise(std::size_t n, std::size_t noise_dim, Rng& rng) {
  Tensor z({n, noise_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

namespace {

std::vector<std::size_t> range(std::size_t from, std::size_t to) {
  std::vector<std::size_t> r(to - from);
  std::iota(r.begin(), r.end(), from);
  return r;
}

// [B] x 3 -> [3B] grouped per positive.
Var interleave3(Var a, Var b, Var c) {
  const std::size_t n = a.value().numel();
  const Var cols[] = {ad::reshape(a, {n, 1}), ad::reshape(b, {n, 1}), ad::reshape(c, {n, 1})};
  return ad::reshape(ad::concat(cols), {3 * n});
}

}  // namespace

CriticScores score_critic(const BoundModel& model, const KgcForward& real, const TrainingBatch& batch,
                          const SyntheticEntities& synthetic, bool with_grads, double eps) {
  const std::size_t b = batch.positives.size();
  if (synthetic.parts.empty() || synthetic.parts[0].shape()[0] != 2 * b) {
    throw ShapeError("score_critic: expected 2B synthetic rows");
  }
  std::vector<RelationId> rels;
  for (const Triple& t : batch.positives) rels.push_back(t.relation);
  std::vector<RelationId> rels2 = rels;
  rels2.insert(rels2.end(), rels.begin(), rels.end());

  const Var logits = modality_logits(model, synthetic.parts);
  const Var joint = fuse_rows(model, synthetic.parts, logits, range(0, 2 * b), rels2).joint;
  const Var h_syn = ad::gather_rows(joint, range(0, b));
  const Var t_syn = ad::gather_rows(joint, range(b, 2 * b));

  CriticScores s;
  s.real = real.positive;
  s.real_per_positive = 1;
  s.synthetic_per_positive = 3;
  s.synthetic = interleave3(score_rows(model, h_syn, rels, real.tail_joint),
                            score_rows(model, real.head_joint, rels, t_syn), score_rows(model, h_syn, rels, t_syn));
  if (with_grads) {
    s.input_grads.push_back(score_input_grad(model, h_syn, rels, real.tail_joint, eps).head);
    s.input_grads.push_back(score_input_grad(model, real.head_joint, rels, t_syn, eps).tail);
    const ScoreGrad both = score_input_grad(model, h_syn, rels, t_syn, eps);
    s.input_grads.push_back(both.head);
    s.input_grads.push_back(both.tail);
  }
  return s;
}

CriticScores mlp_critic(const BoundMlp& critic, const KgcForward& real, const SyntheticEntities& synthetic,
                        bool with_grads) {
  const Var x_real = concat_real(real);
  const Var x_syn = ad::concat(synthetic.parts);
  const std::size_t n = x_real.shape()[0];
  CriticScores s;
  s.real = ad::reshape(mlp_forward(critic, x_real, Activation::tanh), {n});
  s.synthetic = ad::reshape(mlp_forward(critic, x_syn, Activation::tanh), {x_syn.shape()[0]});
  s.real_per_positive = 2;
  s.synthetic_per_positive = 2;
  if (with_grads) {
    // d/dx [tanh(x W1 + b1) w2] = ((1 - tanh^2) * w2^T) W1^T
    const Var act = ad::tanh(ad::add_bias(ad::matmul(x_syn, critic.w1), critic.b1));
    const Var slope = ad::add_scalar(ad::neg(ad::square(act)), 1.0);
    const std::size_t hidden = critic.w1.shape()[1];
    const std::vector<std::size_t> zeros(x_syn.shape()[0], 0);
    const Var w2_rows = ad::gather_rows(ad::reshape(critic.w2, {1, hidden}), zeros);
    s.input_grads.push_back(ad::matmul(ad::mul(slope, w2_rows), ad::transpose(critic.w1)));
  }
  return s;
}

Var adv_loss(const CriticScores& s) {
  return ad::sub(ad::scale(ad::sum(s.synthetic), 1.0 / double(s.synthetic_per_positive)),
                 ad::scale(ad::sum(s.real), 1.0 / double(s.real_per_positive)));
}

Var gradient_penalty(const CriticScores& s, GpSign sign) {
  if (s.input_grads.empty()) throw ShapeError("gradient_penalty: critic scores carry no input gradients");
  Var total;
  for (const Var& g : s.input_grads) {
    const Var term = ad::sum(ad::square(ad::add_scalar(ad::row_norm(g), -1.0)));
    total = total.valid() ? ad::add(total, term) : term;
  }
  return sign == GpSign::paper ? ad::neg(total) : total;
}

namespace {

constexpr double kProbFloor = 1e-7;

Var clamped_prob(Var scores) { return ad::clamp(ad::sigmoid(scores), kProbFloor, 1.0 - kProbFloor); }

}  // namespace

Var vanilla_d_loss(const CriticScores& s) {
  const Var real = ad::scale(ad::sum(ad::log(clamped_prob(s.real))), 1.0 / double(s.real_per_positive));
  const Var fake = ad::scale(ad::sum(ad::log(ad::add_scalar(ad::neg(clamped_prob(s.synthetic)), 1.0))),
                             1.0 / double(s.synthetic_per_positive));
  return ad::neg(ad::add(real, fake));
}

Var vanilla_g_loss(const CriticScores& s) {
  return ad::neg(ad::scale(ad::sum(ad::log(clamped_prob(s.synthetic))), 1.0 / double(s.synthetic_per_positive)));
}

std::vector<Tensor*> Discriminator::trainable() {
  std::vector<Tensor*> out = model.trainable();
  if (critic) {
    for (Tensor* t : {&critic->w1, &critic->b1, &critic->w2, &critic->b2}) out.push_back(t);
  }
  return out;
}

namespace {

std::vector<Tensor> gradients(const ad::Tape& tape, const std::vector<Var>& leaves) {
  std::vector<Tensor> out;
  out.reserve(leaves.size());
  for (const Var& v : leaves) out.push_back(tape.grad(v));
  return out;
}

CriticScores run_critic(const BoundModel& model, const std::optional<BoundMlp>& critic, const KgcForward& real,
                        const TrainingBatch& batch, const SyntheticEntities& syn, const ComatOptions& opt,
                        bool with_grads) {
  if (opt.critic == CriticKind::mlp) {
    if (!critic) throw ConfigError("mlp discriminator selected but no critic parameters exist");
    return mlp_critic(*critic, real, syn, with_grads);
  }
  return score_critic(model, real, batch, syn, with_grads);
}

}  // namespace

StepLosses discriminator_step(Discriminator& d, const GeneratorParams& gen, const FeatureStore& store,
                              const TrainingBatch& batch, const HyperParams& hp, const ComatOptions& opt,
                              Rng& noise, AdamState& state) {
  ad::Tape tape;
  const BoundModel model = bind(tape, d.model, true, opt.relation_guidance);
  std::vector<Var> leaves = model.leaves;
  std::optional<BoundMlp> critic;
  if (d.critic) {
    critic = bind_mlp(tape, *d.critic, true);
    for (Var v : {critic->w1, critic->b1, critic->w2, critic->b2}) leaves.push_back(v);
  }

  const KgcForward real = forward_kgc(model, store, batch);
  const Var kgc = kgc_loss(real.positive, real.negative, hp);
  StepLosses out;
  out.kgc = kgc.value().item();
  Var total = kgc;
  if (opt.enabled && hp.lambda1 > 0.0) {
    // Generator output enters as a constant: nothing flows back into it.
    const Var e_real = tape.constant(concat_real(real).value());
    const Var z = tape.constant(draw_noise(2 * batch.positives.size(), gen.noise_dim, noise));
    const SyntheticEntities syn = generate(bind_mlp(tape, gen.mlp, false), e_real, z, gen.fused_count);
    const CriticScores scores = run_critic(model, critic, real, batch, syn, opt, false);
    const Var adv = opt.loss == AdversarialLoss::vanilla ? vanilla_d_loss(scores) : adv_loss(scores);
    out.adv = adv.value().item();
    total = ad::add(kgc, ad::scale(adv, hp.lambda1));
  }
  out.total = total.value().item();
  tape.backward(total);
  const std::vector<Tensor> grads = gradients(tape, leaves);
  adam_step(d.trainable(), grads, state, hp.lr_d);
  d.model.wrap_phases();
  return out;
}

StepLosses generator_step(const Discriminator& d, GeneratorParams& gen, const FeatureStore& store,
                          const TrainingBatch& batch, const HyperParams& hp, const ComatOptions& opt, Rng& noise,
                          AdamState& state) {
  ad::Tape tape;
  const BoundModel model = bind(tape, d.model, false, opt.relation_guidance);
  std::optional<BoundMlp> critic;
  if (d.critic) critic = bind_mlp(tape, *d.critic, false);
  const BoundMlp g = bind_mlp(tape, gen.mlp, true);

  TrainingBatch positives;
  positives.positives = batch.positives;
  const KgcForward real = forward_kgc(model, store, positives);
  const Var z = tape.constant(draw_noise(2 * batch.positives.size(), gen.noise_dim, noise));
  const SyntheticEntities syn = generate(g, concat_real(real), z, gen.fused_count);
  const bool penalize = opt.gradient_penalty && hp.lambda2 > 0.0;
  const CriticScores scores = run_critic(model, critic, real, batch, syn, opt, penalize);

  StepLosses out;
  const Var adv = adv_loss(scores);
  out.adv = adv.value().item();
  Var total = opt.loss == AdversarialLoss::vanilla ? vanilla_g_loss(scores) : ad::neg(adv);
  if (penalize) {
    const Var gp = gradient_penalty(scores, opt.gp_sign);
    out.gp = gp.value().item();
    total = ad::add(total, ad::scale(gp, hp.lambda2));
  }
  out.total = total.value().item();
  tape.backward(total);
  const std::vector<Var> leaves{g.w1, g.b1, g.w2, g.b2};
  adam_step(gen.trainable(), gradients(tape, leaves), state, hp.lr_g);
  return out;
}

}  // namespace native
