#include "native/train_eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "native/error.hpp"

namespace native {

namespace fs = std::filesystem;
using ad::Var;

std::vector<Corruption> negative_sample(const Triple& positive, std::size_t k, std::size_t entity_count, Rng& rng) {
  if (entity_count < 2) throw DataError("negative sampling needs at least 2 entities");
  std::vector<Corruption> out(k);
  for (Corruption& c : out) {
    c.replace_head = rng.coin();
    const EntityId original = c.replace_head ? positive.head : positive.tail;
    // Uniform over the other entities: draw from |E| - 1 and skip the original.
    EntityId e = static_cast<EntityId>(rng.below(entity_count - 1));
    if (e >= original) ++e;
    c.entity = e;
  }
  return out;
}

TrainingBatch make_batch(std::span<const Triple> positives, std::size_t k, std::size_t entity_count, Rng& rng) {
  TrainingBatch batch;
  batch.positives.assign(positives.begin(), positives.end());
  batch.negatives_per_positive = k;
  batch.negatives.reserve(positives.size() * k);
  for (const Triple& t : positives) {
    const auto c = negative_sample(t, k, entity_count, rng);
    batch.negatives.insert(batch.negatives.end(), c.begin(), c.end());
  }
  return batch;
}

TrainResult initial_state(const KnowledgeGraph& kg, const FeatureStore& store, const HyperParams& hp,
                          const TrainOptions& opt) {
  hp.validate();
  if (store.entity_count() != kg.entity_count()) {
    throw DataError("feature store covers " + std::to_string(store.entity_count()) + " entities, graph has " +
                    std::to_string(kg.entity_count()));
  }
  TrainResult s;
  s.discriminator.model =
      ModelParams::initialize(kg.entity_count(), kg.relation_count(), hp.dim, store.modalities(), opt.seed);
  const std::size_t n = s.discriminator.model.fused_count();
  if (opt.comat.enabled) {
    s.generator = GeneratorParams::initialize(n, hp.dim, hp.noise_dim, opt.seed);
    if (opt.comat.critic == CriticKind::mlp) s.discriminator.critic = init_mlp_critic(n, hp.dim, opt.seed);
  }
  return s;
}

void save_training_checkpoint(const fs::path& dir, const TrainResult& state, const nlohmann::ordered_json& config) {
  std::vector<std::pair<std::string, const Tensor*>> extra;
  if (state.generator) extra = state.generator->named_tensors();
  if (state.discriminator.critic) {
    for (const auto& e : critic_named_tensors(*state.discriminator.critic)) extra.push_back(e);
  }
  save_checkpoint(dir, state.discriminator.model, extra, config);
}

void write_losses_csv(const fs::path& path, std::span<const LossRow> rows) {
  std::ofstream out(path);
  out << "epoch,d_loss,g_loss\n";
  char buf[64];
  for (const LossRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.d_loss);
    out << r.epoch << ',' << buf << ',';
    if (r.g_loss) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.g_loss);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

TrainResult train(const KnowledgeGraph& kg, const FeatureStore& store, const HyperParams& hp,
                  const TrainOptions& opt) {
  TrainResult s = initial_state(kg, store, hp, opt);
  if (!opt.out_dir.empty()) fs::create_directories(opt.out_dir);
  if (kg.train.empty() && hp.epochs > 0) throw DataError("training split is empty");

  AdamState d_state = AdamState::for_params(s.discriminator.trainable());
  std::optional<AdamState> g_state;
  if (s.generator) g_state = AdamState::for_params(s.generator->trainable());
  Rng negatives = Rng::stream(opt.seed, "negatives");
  Rng noise = Rng::stream(opt.seed, "noise");

  std::vector<Triple> order = kg.train;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    // Shuffle the sorted split so the order depends on nothing but the epoch.
    order = kg.train;
    Rng shuffle = Rng::stream(opt.seed ^ epoch, "shuffle");
    shuffle.shuffle(order);

    double d_sum = 0.0, g_sum = 0.0;
    std::size_t d_steps = 0, g_steps = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += hp.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      const auto positives = std::span<const Triple>(order).subspan(start, end - start);
      const TrainingBatch batch = make_batch(positives, hp.negatives, kg.entity_count(), negatives);
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(b);
      try {
        const StepLosses ld = discriminator_step(s.discriminator, s.generator ? *s.generator : GeneratorParams{},
                                                 store, batch, hp, opt.comat, noise, d_state);
        if (!std::isfinite(ld.total)) throw NumericError("non-finite discriminator loss");
        d_sum += ld.total;
        ++d_steps;
        if (s.generator && (b + 1) % hp.n_critic == 0) {
          const StepLosses lg =
              generator_step(s.discriminator, *s.generator, store, batch, hp, opt.comat, noise, *g_state);
          if (!std::isfinite(lg.total)) throw NumericError("non-finite generator loss");
          g_sum += lg.total;
          ++g_steps;
        }
      } catch (const NumericError& e) {
        throw NumericError(where + ": " + e.what());
      }
    }

    LossRow row;
    row.epoch = epoch;
    row.d_loss = d_sum / double(d_steps);
    if (g_steps > 0) row.g_loss = g_sum / double(g_steps);
    s.losses.push_back(row);
    if (opt.on_epoch) opt.on_epoch(row);
    if (!opt.out_dir.empty() && opt.save_every > 0 && epoch % opt.save_every == 0 && epoch < hp.epochs) {
      save_training_checkpoint(opt.out_dir / ("checkpoint_epoch_" + std::to_string(epoch)), s, opt.config);
    }
  }
  if (!opt.out_dir.empty()) {
    save_training_checkpoint(opt.out_dir / "checkpoint", s, opt.config);
    write_losses_csv(opt.out_dir / "losses.csv", s.losses);
  }
  return s;
}

// ---------------------------------------------------------------------------

Scorer::Scorer(const ModelParams& params, const FeatureStore& store, bool relation_guidance)
    : params_(&params), store_(&store), relation_guidance_(relation_guidance) {
  check_compatible(params, store);
}

Tensor Scorer::joint(RelationId r) const {
  if (r >= params_->relation_count()) throw DataError("relation id " + std::to_string(r) + " out of range");
  ad::Tape tape;
  const BoundModel model = bind(tape, *params_, false, relation_guidance_);
  std::vector<EntityId> all(entity_count());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<EntityId>(e);
  const EntityEncoding enc = encode_entities(model, *store_, all);
  const Var logits = modality_logits(model, enc.embeddings);
  std::vector<std::size_t> rows(all.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::vector<RelationId> rel(all.size(), r);
  return fuse_rows(model, enc.embeddings, logits, rows, rel).joint.value();
}

namespace {

// Same arithmetic, in the same order, as rotate followed by row_norm.
void rotate_row(std::span<const double> h, std::span<const double> theta, std::span<double> out) {
  const std::size_t half = theta.size();
  for (std::size_t k = 0; k < half; ++k) {
    const double c = std::cos(theta[k]), s = std::sin(theta[k]);
    out[k] = h[k] * c - h[k + half] * s;
    out[k + half] = h[k] * s + h[k + half] * c;
  }
}

double neg_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    ss += d * d;
  }
  return -std::sqrt(ss);
}

}  // namespace

std::vector<double> Scorer::tail_scores(const Tensor& joint, RelationId r, EntityId h) const {
  const auto theta = params_->relation_phases.row(r);
  std::vector<double> rotated(joint.cols());
  rotate_row(joint.row(h), theta, rotated);
  std::vector<double> out(entity_count());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = neg_distance(rotated, joint.row(e));
  return out;
}

std::vector<double> Scorer::head_scores(const Tensor& joint, RelationId r, EntityId t) const {
  const auto theta = params_->relation_phases.row(r);
  std::vector<double> rotated(joint.cols());
  std::vector<double> out(entity_count());
  for (std::size_t e = 0; e < out.size(); ++e) {
    rotate_row(joint.row(e), theta, rotated);
    out[e] = neg_distance(rotated, joint.row(t));
  }
  return out;
}

std::size_t rank_of(std::span<const double> scores, EntityId truth, std::span<const EntityId> filtered) {
  if (truth >= scores.size()) throw DataError("ground-truth entity " + std::to_string(truth) + " is not a candidate");
  const double target = scores[truth];
  std::size_t greater = 0, ties = 0;
  auto skip = filtered.begin();
  for (std::size_t e = 0; e < scores.size(); ++e) {
    while (skip != filtered.end() && *skip < e) ++skip;
    if (e == truth || (skip != filtered.end() && *skip == e)) continue;
    if (scores[e] > target) {
      ++greater;
    } else if (scores[e] == target) {
      ++ties;
    }
  }
  return 1 + greater + ties / 2;
}

namespace {

std::size_t rank_with_joint(const Scorer& scorer, const Tensor& joint, const FilterIndex& filter,
                            const Triple& t, bool predict_head) {
  if (t.head >= scorer.entity_count() || t.tail >= scorer.entity_count()) {
    throw DataError("query entity out of range");
  }
  if (predict_head) {
    return rank_of(scorer.head_scores(joint, t.relation, t.tail), t.head, filter.heads(t.relation, t.tail));
  }
  return rank_of(scorer.tail_scores(joint, t.relation, t.head), t.tail, filter.tails(t.head, t.relation));
}

}  // namespace

std::size_t rank_query(const Scorer& scorer, const FilterIndex& filter, const Triple& triple, bool predict_head) {
  return rank_with_joint(scorer, scorer.joint(triple.relation), filter, triple, predict_head);
}

MetricsReport summarize(std::span<const std::size_t> ranks) {
  MetricsReport r;
  r.n_queries = ranks.size();
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  double rr = 0.0;
  for (std::size_t k : ranks) {
    rr += 1.0 / double(k);
    h1 += k <= 1;
    h3 += k <= 3;
    h10 += k <= 10;
  }
  const double n = ranks.empty() ? 1.0 : double(ranks.size());
  r.mrr = rr / n;
  r.hits = {{1, double(h1) / n}, {3, double(h3) / n}, {10, double(h10) / n}};
  return r;
}

double random_mrr(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = 1; i <= n; ++i) h += 1.0 / double(i);
  return h / double(n);
}

MetricsReport evaluate(std::span<const Triple> split, const Scorer& scorer, const FilterIndex& filter,
                       const EvalOptions& opt) {
  if (split.empty()) throw DataError("evaluation split is empty");
  if (opt.groups && opt.groups->size() != split.size()) {
    throw DataError("group labels do not match the evaluation split");
  }
  const auto t0 = std::chrono::steady_clock::now();

  // Queries grouped by relation so each joint table is built once. ranks[2i]
  // is the head query of split[i], ranks[2i + 1] its tail query.
  std::vector<std::size_t> ranks(2 * split.size(), 0);
  std::map<RelationId, std::vector<std::size_t>> by_relation;
  for (std::size_t i = 0; i < split.size(); ++i) by_relation[split[i].relation].push_back(i);

  const std::size_t threads = std::max<std::size_t>(1, opt.threads);
  for (const auto& [r, items] : by_relation) {
    const Tensor joint = scorer.joint(r);
    const std::size_t n_queries = 2 * items.size();
    auto work = [&](std::size_t from, std::size_t to) {
      for (std::size_t q = from; q < to; ++q) {
        const std::size_t i = items[q / 2];
        ranks[2 * i + q % 2] = rank_with_joint(scorer, joint, filter, split[i], q % 2 == 0);
      }
    };
    if (threads == 1 || n_queries < 2 * threads) {
      work(0, n_queries);
      continue;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t shard = (n_queries + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t from = std::min(n_queries, w * shard), to = std::min(n_queries, from + shard);
      pool.emplace_back([&, w, from, to] {
        try {
          work(from, to);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Reduction in query order, so the sums do not depend on the sharding.
  MetricsReport report = summarize(ranks);
  if (opt.groups) {
    std::map<GroupLabel, std::vector<std::size_t>> split_ranks;
    for (std::size_t i = 0; i < split.size(); ++i) {
      auto& v = split_ranks[(*opt.groups)[i]];
      v.push_back(ranks[2 * i]);
      v.push_back(ranks[2 * i + 1]);
    }
    for (const auto& [g, rs] : split_ranks) report.groups[to_string(g)] = summarize(rs);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["mrr"] = mrr;
  j["hits"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : hits) j["hits"][std::to_string(k)] = v;
  j["n_queries"] = n_queries;
  if (!groups.empty()) {
    j["groups"] = nlohmann::ordered_json::object();
    for (const auto& [name, g] : groups) j["groups"][name] = g.to_json();
  }
  if (!losses.empty()) {
    j["loss_curve"] = nlohmann::ordered_json::array();
    for (const LossRow& r : losses) {
      nlohmann::ordered_json row{{"epoch", r.epoch}, {"d_loss", r.d_loss}};
      row["g_loss"] = r.g_loss ? nlohmann::ordered_json(*r.g_loss) : nlohmann::ordered_json(nullptr);
      j["loss_curve"].push_back(row);
    }
  }
  return j;
}

void write_temperatures_csv(const fs::path& path, const ModelParams& params, const Vocabulary& relations) {
  std::ofstream out(path);
  out << "relation,zeta,sigmoid_zeta\n";
  char buf[128];
  for (std::size_t r = 0; r < params.relation_count(); ++r) {
    const double z = params.relation_temperatures[r];
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", z, 1.0 / (1.0 + std::exp(-z)));
    out << (r < relations.size() ? relations.name(r) : std::to_string(r)) << buf;
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

WeightSummary modality_weight_summary(const ModelParams& params, const FeatureStore& store,
                                      std::span<const Triple> triples, bool relation_guidance) {
  check_compatible(params, store);
  WeightSummary s;
  s.modalities.push_back(std::string(kStructuralModality));
  for (const auto& m : params.modalities) s.modalities.push_back(m.name);

  ad::Tape tape;
  const BoundModel model = bind(tape, params, false, relation_guidance);
  std::vector<EntityId> all(params.entity_count());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<EntityId>(e);
  const EntityEncoding enc = encode_entities(model, store, all);
  const Var logits = modality_logits(model, enc.embeddings);

  std::map<RelationId, std::vector<std::size_t>> rows;
  for (const Triple& t : triples) {
    rows[t.relation].push_back(t.head);
    rows[t.relation].push_back(t.tail);
  }
  for (const auto& [r, ents] : rows) {
    const std::vector<RelationId> rel(ents.size(), r);
    const Tensor w = fuse_rows(model, enc.embeddings, logits, ents, rel).weights.value();
    std::vector<double> mean(s.modalities.size(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
      for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += w.at(i, m);
    }
    for (double& v : mean) v /= double(w.rows());
    s.relations.push_back(r);
    s.weights.push_back(std::move(mean));
  }
  return s;
}

void write_weight_summary_csv(const fs::path& path, const WeightSummary& summary, const Vocabulary& relations) {
  std::ofstream out(path);
  out << "relation";
  for (const auto& m : summary.modalities) out << ',' << m;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < summary.relations.size(); ++i) {
    const RelationId r = summary.relations[i];
    out << (r < relations.size() ? relations.name(r) : std::to_string(r));
    for (double v : summary.weights[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace native
