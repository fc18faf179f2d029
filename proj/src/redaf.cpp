#include "native/redaf.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "native/error.hpp"

namespace native {

namespace fs = std::filesystem;
using ad::Var;

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("hyperparameter " + what); };
  if (dim < 2 || dim % 2 != 0) fail("dim must be a positive even number");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta must be positive");
  if (negatives < 1) fail("negatives must be at least 1");
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) fail("lambda1 must be non-negative");
  if (!(lambda2 >= 0.0) || !std::isfinite(lambda2)) fail("lambda2 must be non-negative");
  if (noise_dim < 1) fail("noise_dim must be at least 1");
  if (!(lr_d > 0.0) || !std::isfinite(lr_d)) fail("lr_d must be positive");
  if (!(lr_g > 0.0) || !std::isfinite(lr_g)) fail("lr_g must be positive");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (n_critic < 1) fail("n_critic must be at least 1");
}

HyperParams HyperParams::desk() {
  HyperParams hp;
  hp.dim = 64;
  hp.gamma = 6.0;
  hp.negatives = 16;
  hp.noise_dim = 16;
  hp.lr_d = 5e-3;
  hp.lr_g = 5e-3;
  hp.batch_size = 128;
  hp.epochs = 200;
  return hp;
}

nlohmann::ordered_json HyperParams::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim;
  j["gamma"] = gamma;
  j["beta"] = beta;
  j["negatives"] = negatives;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["noise_dim"] = noise_dim;
  j["lr_d"] = lr_d;
  j["lr_g"] = lr_g;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["n_critic"] = n_critic;
  return j;
}

HyperParams HyperParams::from_json(const nlohmann::json& j) {
  HyperParams hp;
  hp.dim = j.value("dim", hp.dim);
  hp.gamma = j.value("gamma", hp.gamma);
  hp.beta = j.value("beta", hp.beta);
  hp.negatives = j.value("negatives", hp.negatives);
  hp.lambda1 = j.value("lambda1", hp.lambda1);
  hp.lambda2 = j.value("lambda2", hp.lambda2);
  hp.noise_dim = j.value("noise_dim", hp.noise_dim);
  hp.lr_d = j.value("lr_d", hp.lr_d);
  hp.lr_g = j.value("lr_g", hp.lr_g);
  hp.batch_size = j.value("batch_size", hp.batch_size);
  hp.epochs = j.value("epochs", hp.epochs);
  hp.n_critic = j.value("n_critic", hp.n_critic);
  return hp;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Mlp Mlp::xavier(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
  Mlp m;
  m.w1 = uniform_tensor({in, hidden}, std::sqrt(6.0 / double(in + hidden)), rng);
  m.b1 = Tensor({hidden});
  m.w2 = uniform_tensor({hidden, out}, std::sqrt(6.0 / double(hidden + out)), rng);
  m.b2 = Tensor({out});
  return m;
}

ModelParams ModelParams::initialize(std::size_t n_entities, std::size_t n_relations, std::size_t dim,
                                    std::vector<ModalityInfo> modalities, std::uint64_t seed) {
  if (dim < 2 || dim % 2 != 0) throw ConfigError("embedding dim must be a positive even number");
  if (n_entities == 0 || n_relations == 0) throw DataError("model needs at least one entity and one relation");
  ModelParams p;
  p.dim = dim;
  p.modalities = std::move(modalities);
  Rng rng = Rng::stream(seed, "init");
  p.entity_embeddings = uniform_tensor({n_entities, dim}, 0.05, rng);
  p.relation_phases = uniform_tensor({n_relations, dim / 2}, std::numbers::pi, rng);
  for (const auto& m : p.modalities) p.projections.push_back(Mlp::xavier(m.dim, dim, dim, rng));
  p.fusion_vector = uniform_tensor({dim}, 0.01, rng);
  p.relation_temperatures = Tensor({n_relations});
  for (std::size_t m = 0; m < p.modalities.size(); ++m) {
    Rng bank = Rng::stream(seed, "missing", m);
    const double bound = 6.0 / std::sqrt(double(p.modalities[m].dim + dim));
    p.missing_features.push_back(uniform_tensor({n_entities, p.modalities[m].dim}, bound, bank));
  }
  p.wrap_phases();
  return p;
}

std::vector<Tensor*> ModelParams::trainable() {
  std::vector<Tensor*> out{&entity_embeddings, &relation_phases};
  for (Mlp& m : projections) {
    for (Tensor* t : {&m.w1, &m.b1, &m.w2, &m.b2}) out.push_back(t);
  }
  out.push_back(&fusion_vector);
  out.push_back(&relation_temperatures);
  return out;
}

std::vector<std::string> ModelParams::trainable_names() const {
  std::vector<std::string> out{"entity_embeddings", "relation_phases"};
  for (const auto& m : modalities) {
    for (const char* part : {"w1", "b1", "w2", "b2"}) out.push_back("proj." + m.name + "." + part);
  }
  out.push_back("fusion_vector");
  out.push_back("relation_temperatures");
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
  auto names = trainable_names();
  auto tensors = const_cast<ModelParams*>(this)->trainable();
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (std::size_t i = 0; i < names.size(); ++i) out.emplace_back(names[i], tensors[i]);
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    out.emplace_back("missing." + modalities[m].name, &missing_features[m]);
  }
  return out;
}

double wrap_phase(double theta) {
  constexpr double pi = std::numbers::pi;
  if (theta > -pi && theta <= pi) return theta;
  double r = std::remainder(theta, 2.0 * pi);
  if (r <= -pi) r += 2.0 * pi;
  if (r > pi) r -= 2.0 * pi;
  return r;
}

void ModelParams::wrap_phases() {
  for (double& v : relation_phases.data()) v = wrap_phase(v);
}

void check_compatible(const ModelParams& params, const FeatureStore& store) {
  if (params.modalities != store.modalities()) {
    std::string want, have;
    for (const auto& m : params.modalities) want += " " + m.name + ":" + std::to_string(m.dim);
    for (const auto& m : store.modalities()) have += " " + m.name + ":" + std::to_string(m.dim);
    throw DataError("model modalities [" + want + " ] do not match dataset [" + have + " ]");
  }
  if (params.entity_count() != store.entity_count()) {
    throw DataError("model has " + std::to_string(params.entity_count()) + " entities, dataset has " +
                    std::to_string(store.entity_count()));
  }
}

// ---------------------------------------------------------------------------

Var mlp_forward(const BoundMlp& mlp, Var x, Activation act) {
  Var h = ad::add_bias(ad::matmul(x, mlp.w1), mlp.b1);
  h = act == Activation::relu ? ad::relu(h) : ad::tanh(h);
  return ad::add_bias(ad::matmul(h, mlp.w2), mlp.b2);
}

BoundMlp bind_mlp(ad::Tape& tape, const Mlp& mlp, bool trainable) {
  return {tape.leaf(mlp.w1, trainable), tape.leaf(mlp.b1, trainable), tape.leaf(mlp.w2, trainable),
          tape.leaf(mlp.b2, trainable)};
}

BoundModel bind(ad::Tape& tape, const ModelParams& params, bool trainable, bool relation_guidance) {
  BoundModel b;
  b.params = &params;
  b.relation_guidance = relation_guidance;
  b.entities = tape.leaf(params.entity_embeddings, trainable);
  b.phases = tape.leaf(params.relation_phases, trainable);
  b.leaves = {b.entities, b.phases};
  for (const Mlp& m : params.projections) {
    b.projections.push_back(bind_mlp(tape, m, trainable));
    const BoundMlp& bm = b.projections.back();
    for (Var v : {bm.w1, bm.b1, bm.w2, bm.b2}) b.leaves.push_back(v);
  }
  Var fusion = tape.leaf(params.fusion_vector, trainable);
  b.fusion_column = ad::reshape(fusion, {params.dim, 1});
  b.temperatures = tape.leaf(params.relation_temperatures, trainable);
  b.leaves.push_back(fusion);
  b.leaves.push_back(b.temperatures);
  return b;
}

namespace {

std::vector<std::size_t> as_index(std::span<const std::uint32_t> ids) { return {ids.begin(), ids.end()}; }

bool is_identity(std::span<const std::size_t> rows, std::size_t n) {
  if (rows.size() != n) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i] != i) return false;
  }
  return true;
}

Var project_modality(const BoundModel& model, const FeatureStore& store, std::size_t m,
                     std::span<const EntityId> entities) {
  const ModelParams& p = *model.params;
  const std::size_t dm = p.modalities[m].dim;
  Tensor raw({entities.size(), dm});
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto src = store.has(m, entities[i]) ? store.feature(m, entities[i])
                                               : p.missing_features[m].row(entities[i]);
    std::copy(src.begin(), src.end(), raw.row(i).begin());
  }
  return mlp_forward(model.projections[m], model.tape().constant(std::move(raw)), Activation::relu);
}

}  // namespace

EntityEncoding encode_entities(const BoundModel& model, const FeatureStore& store, std::vector<EntityId> entities) {
  EntityEncoding enc;
  enc.embeddings.push_back(ad::gather_rows(model.entities, as_index(entities)));
  for (std::size_t m = 0; m < model.params->modalities.size(); ++m) {
    enc.embeddings.push_back(project_modality(model, store, m, entities));
  }
  enc.entities = std::move(entities);
  return enc;
}

Var modality_logits(const BoundModel& model, std::span<const Var> embeddings) {
  std::vector<Var> cols;
  cols.reserve(embeddings.size());
  for (Var e : embeddings) cols.push_back(ad::matmul(ad::tanh(e), model.fusion_column));
  return ad::concat(cols);
}

Var relation_scale(const BoundModel& model, std::span<const RelationId> relations) {
  if (!model.relation_guidance) return model.tape().constant(Tensor({relations.size()}, 1.0));
  return ad::sigmoid(ad::gather_rows(model.temperatures, as_index(relations)));
}

Fusion fuse_rows(const BoundModel& model, std::span<const Var> embeddings, Var logits,
                 std::span<const std::size_t> rows, std::span<const RelationId> relations) {
  if (embeddings.empty()) throw ShapeError("fuse_rows: no embeddings");
  if (rows.size() != relations.size()) throw ShapeError("fuse_rows: rows and relations differ in length");
  const std::size_t n_src = embeddings[0].shape()[0];
  const bool identity = is_identity(rows, n_src);
  auto pick = [&](Var v) { return identity ? v : ad::gather_rows(v, rows); };

  Var scaled = ad::div_col(pick(logits), relation_scale(model, relations));
  Var weights = ad::softmax(scaled);
  const std::vector<std::size_t> ones(embeddings.size(), 1);
  const std::vector<Var> w = ad::split(weights, ones);
  Var joint = ad::mul_col(pick(embeddings[0]), w[0]);
  for (std::size_t m = 1; m < embeddings.size(); ++m) joint = ad::add(joint, ad::mul_col(pick(embeddings[m]), w[m]));
  return {joint, weights};
}

Var relation_rows(const BoundModel& model, std::span<const RelationId> relations) {
  return ad::gather_rows(model.phases, as_index(relations));
}

Var score_rows(const BoundModel& model, Var heads, std::span<const RelationId> relations, Var tails) {
  Var residual = ad::sub(ad::rotate(heads, relation_rows(model, relations)), tails);
  return ad::neg(ad::row_norm(residual));
}

ScoreGrad score_input_grad(const BoundModel& model, Var heads, std::span<const RelationId> relations, Var tails,
                           double eps) {
  Var theta = relation_rows(model, relations);
  Var residual = ad::sub(ad::rotate(heads, theta), tails);
  Var length = ad::row_norm(residual, eps);
  ScoreGrad g;
  g.tail = ad::div_col(residual, length);
  g.head = ad::neg(ad::div_col(ad::rotate(residual, ad::neg(theta)), length));
  return g;
}

std::vector<double> self_adv_weights(std::span<const double> scores, double beta) {
  if (scores.empty()) throw ShapeError("self_adv_weights: need at least one negative");
  double top = beta * scores[0];
  for (double s : scores) top = std::max(top, beta * s);
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) z += p[i] = std::exp(beta * scores[i] - top);
  for (double& v : p) v /= z;
  return p;
}

Tensor self_adv_weights(const Tensor& scores, double beta) {
  Tensor p(scores.shape());
  for (std::size_t b = 0; b < scores.rows(); ++b) {
    const auto w = self_adv_weights(scores.row(b), beta);
    std::copy(w.begin(), w.end(), p.row(b).begin());
  }
  return p;
}

Var kgc_loss(Var positive, Var negative, const HyperParams& hp) {
  return kgc_loss(positive, negative, self_adv_weights(negative.value(), hp.beta), hp);
}

Var kgc_loss(Var positive, Var negative, const Tensor& weights, const HyperParams& hp) {
  const std::size_t batch = positive.value().numel();
  if (positive.shape().size() != 1 || negative.shape().size() != 2 || negative.shape()[0] != batch ||
      weights.shape() != negative.shape()) {
    throw ShapeError("kgc_loss: expected positive [B], negative and weights [B, K], got " +
                     shape_str(positive.shape()) + ", " + shape_str(negative.shape()) + " and " +
                     shape_str(weights.shape()));
  }
  Var pos_term = ad::neg(ad::sum(ad::log_sigmoid(ad::add_scalar(positive, hp.gamma))));
  Var neg_log = ad::log_sigmoid(ad::add_scalar(ad::neg(negative), -hp.gamma));
  Var neg_term = ad::sum(ad::mul(positive.tape()->constant(weights), neg_log));
  return ad::sub(pos_term, neg_term);
}

KgcForward forward_kgc(const BoundModel& model, const FeatureStore& store, const TrainingBatch& batch) {
  const std::size_t b_count = batch.positives.size();
  const std::size_t k = batch.negatives_per_positive;
  if (b_count == 0 || batch.negatives.size() != b_count * k) {
    throw ShapeError("forward_kgc: batch needs B > 0 positives with K negatives each");
  }
  std::vector<std::int64_t> slot(model.params->entity_count(), -1);
  std::vector<EntityId> unique;
  auto row_of = [&](EntityId e) -> std::size_t {
    if (e >= slot.size()) throw ShapeError("forward_kgc: entity id out of range");
    if (slot[e] < 0) {
      slot[e] = static_cast<std::int64_t>(unique.size());
      unique.push_back(e);
    }
    return static_cast<std::size_t>(slot[e]);
  };

  KgcForward out;
  std::vector<std::size_t> rows;
  std::vector<RelationId> rels;
  rows.reserve(b_count * (2 + k));
  rels.reserve(rows.capacity());
  for (const Triple& t : batch.positives) out.head_rows.push_back(row_of(t.head));
  for (const Triple& t : batch.positives) out.tail_rows.push_back(row_of(t.tail));
  rows.insert(rows.end(), out.head_rows.begin(), out.head_rows.end());
  rows.insert(rows.end(), out.tail_rows.begin(), out.tail_rows.end());
  for (int pass = 0; pass < 2; ++pass) {
    for (const Triple& t : batch.positives) rels.push_back(t.relation);
  }
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      rows.push_back(row_of(batch.negatives[b * k + i].entity));
      rels.push_back(batch.positives[b].relation);
    }
  }

  out.encoding = encode_entities(model, store, std::move(unique));
  out.logits = modality_logits(model, out.encoding.embeddings);
  const Var joint = fuse_rows(model, out.encoding.embeddings, out.logits, rows, rels).joint;

  std::vector<std::size_t> heads(b_count), tails(b_count);
  std::iota(heads.begin(), heads.end(), std::size_t{0});
  std::iota(tails.begin(), tails.end(), b_count);
  const std::span<const RelationId> pos_rels(rels.data(), b_count);
  out.head_joint = ad::gather_rows(joint, heads);
  out.tail_joint = ad::gather_rows(joint, tails);
  out.positive = score_rows(model, out.head_joint, pos_rels, out.tail_joint);

  std::vector<std::size_t> neg_heads, neg_tails;
  neg_heads.reserve(b_count * k);
  neg_tails.reserve(b_count * k);
  for (std::size_t b = 0; b < b_count; ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t corrupt = 2 * b_count + b * k + i;
      const bool head = batch.negatives[b * k + i].replace_head;
      neg_heads.push_back(head ? corrupt : b);
      neg_tails.push_back(head ? b_count + b : corrupt);
    }
  }
  if (k == 0) return out;
  const std::span<const RelationId> neg_rels(rels.data() + 2 * b_count, b_count * k);
  out.negative = ad::reshape(
      score_rows(model, ad::gather_rows(joint, neg_heads), neg_rels, ad::gather_rows(joint, neg_tails)),
      {b_count, k});
  return out;
}

// ---------------------------------------------------------------------------

Var encode_modality(const BoundModel& model, const FeatureStore& store, EntityId e, std::string_view modality) {
  const ModelParams& p = *model.params;
  if (e >= p.entity_count()) throw ShapeError("encode_modality: entity id out of range");
  const std::array<EntityId, 1> one{e};
  if (modality == kStructuralModality) {
    return ad::reshape(ad::gather_rows(model.entities, std::vector<std::size_t>{e}), {p.dim});
  }
  for (std::size_t m = 0; m < p.modalities.size(); ++m) {
    if (p.modalities[m].name == modality) return ad::reshape(project_modality(model, store, m, one), {p.dim});
  }
  throw ConfigError("undeclared modality '" + std::string(modality) + "'");
}

Var modality_weights(const BoundModel& model, RelationId r, std::span<const Var> embeddings) {
  if (embeddings.empty()) throw ShapeError("modality_weights: empty embedding map");
  std::vector<Var> rows;
  for (Var e : embeddings) rows.push_back(ad::reshape(e, {1, e.value().numel()}));
  const std::array<std::size_t, 1> row{0};
  const std::array<RelationId, 1> rel{r};
  const Fusion f = fuse_rows(model, rows, modality_logits(model, rows), row, rel);
  return ad::reshape(f.weights, {embeddings.size()});
}

Fusion fuse(const BoundModel& model, const FeatureStore& store, EntityId e, RelationId r) {
  const EntityEncoding enc = encode_entities(model, store, {e});
  const std::array<std::size_t, 1> row{0};
  const std::array<RelationId, 1> rel{r};
  const Fusion f = fuse_rows(model, enc.embeddings, modality_logits(model, enc.embeddings), row, rel);
  return {ad::reshape(f.joint, {model.params->dim}), ad::reshape(f.weights, {enc.embeddings.size()})};
}

Var score(const BoundModel& model, Var head, RelationId r, Var tail) {
  const std::size_t d = model.params->dim;
  const std::array<RelationId, 1> rel{r};
  return ad::reshape(score_rows(model, ad::reshape(head, {1, d}), rel, ad::reshape(tail, {1, d})), {});
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'N', 'K', 'G', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(const fs::path& path, const Tensor& t) {
  std::string buf(kMagic.begin(), kMagic.end());
  put_u32(buf, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  std::ofstream out(path, std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

Tensor read_tensor(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open tensor file");
  const std::string buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  auto fail = [&](const std::string& what) -> DataError { return DataError(path.string() + ": " + what); };
  if (buf.size() < 8 || !std::equal(kMagic.begin(), kMagic.end(), buf.begin())) throw fail("not an NKGT tensor");
  const std::size_t rank = get_le(buf, 4, 4);
  if (rank > 8 || buf.size() < 8 + 4 * rank) throw fail("truncated header");
  Shape shape(rank);
  std::size_t numel = 1;
  for (std::size_t i = 0; i < rank; ++i) numel *= shape[i] = get_le(buf, 8 + 4 * i, 4);
  const std::size_t offset = 8 + 4 * rank;
  if (buf.size() != offset + 8 * numel) throw fail("payload size does not match shape " + shape_str(shape));
  std::vector<double> values(numel);
  for (std::size_t i = 0; i < numel; ++i) values[i] = std::bit_cast<double>(get_le(buf, offset + 8 * i, 8));
  return Tensor(std::move(shape), std::move(values));
}

void save_checkpoint(const fs::path& dir, const ModelParams& model,
                     const std::vector<std::pair<std::string, const Tensor*>>& extra,
                     const nlohmann::ordered_json& hyperparams) {
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["d_e"] = model.dim;
  manifest["modalities"] = nlohmann::ordered_json::array();
  for (const auto& m : model.modalities) manifest["modalities"].push_back({{"name", m.name}, {"dim", m.dim}});
  manifest["n_entities"] = model.entity_count();
  manifest["n_relations"] = model.relation_count();
  manifest["hyperparams"] = hyperparams;
  manifest["tensors"] = nlohmann::ordered_json::array();
  manifest["extra"] = nlohmann::ordered_json::array();
  for (const auto& [name, t] : model.named_tensors()) {
    write_tensor(dir / (name + ".nkgt"), *t);
    manifest["tensors"].push_back(name);
  }
  for (const auto& [name, t] : extra) {
    write_tensor(dir / (name + ".nkgt"), *t);
    manifest["extra"].push_back(name);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError((dir / "manifest.json").string() + ": write failed");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError(dir.string() + ": no checkpoint manifest");
  nlohmann::json manifest;
  Checkpoint ck;
  ModelParams& p = ck.model;
  try {
    std::ifstream in(manifest_path);
    manifest = nlohmann::json::parse(in);
    p.dim = manifest.at("d_e").get<std::size_t>();
    for (const auto& m : manifest.at("modalities")) {
      p.modalities.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
    }
    ck.hyperparams = manifest.value("hyperparams", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  const std::size_t n_e = manifest.value("n_entities", std::size_t{0});
  const std::size_t n_r = manifest.value("n_relations", std::size_t{0});

  auto load = [&](const std::string& name, const Shape& want) {
    Tensor t = read_tensor(dir / (name + ".nkgt"));
    if (t.shape() != want) {
      throw DataError((dir / (name + ".nkgt")).string() + ": shape " + shape_str(t.shape()) + ", expected " +
                      shape_str(want));
    }
    return t;
  };
  p.entity_embeddings = load("entity_embeddings", {n_e, p.dim});
  p.relation_phases = load("relation_phases", {n_r, p.dim / 2});
  for (const auto& m : p.modalities) {
    const std::string base = "proj." + m.name + ".";
    p.projections.push_back({load(base + "w1", {m.dim, p.dim}), load(base + "b1", {p.dim}),
                             load(base + "w2", {p.dim, p.dim}), load(base + "b2", {p.dim})});
    p.missing_features.push_back(load("missing." + m.name, {n_e, m.dim}));
  }
  p.fusion_vector = load("fusion_vector", {p.dim});
  p.relation_temperatures = load("relation_temperatures", {n_r});
  for (const auto& name : manifest.value("extra", nlohmann::json::array())) {
    const std::string s = name.get<std::string>();
    ck.extra.emplace(s, read_tensor(dir / (s + ".nkgt")));
  }
  return ck;
}

}  // namespace native
