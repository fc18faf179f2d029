#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "native/error.hpp"
#include "native/train_eval.hpp"
#include "rank_oracle.hpp"
#include "test_util.hpp"
#include "toy_model.hpp"

using namespace native;
using native::testing::oracle_rank;
using native::testing::TempDir;

namespace {

HyperParams tiny_hp() {
  HyperParams hp = HyperParams::desk();
  hp.dim = 8;
  hp.negatives = 4;
  hp.noise_dim = 4;
  hp.batch_size = 16;
  hp.epochs = 3;
  hp.lambda1 = 0.1;
  hp.lambda2 = 0.1;
  return hp;
}

}  // namespace

TEST_CASE("negative sampling") {
  Rng rng(1);
  SUBCASE("two entities force the other one") {
    for (int i = 0; i < 100; ++i) {
      const auto c = negative_sample({0, 0, 1}, 1, 2, rng);
      REQUIRE(c.size() == 1);
      CHECK(c[0].entity == (c[0].replace_head ? 1u : 0u));
    }
  }
  SUBCASE("replacement never equals the original; coin and draw are fair") {
    const Triple t{3, 0, 7};
    const auto c = negative_sample(t, 10000, 10, rng);
    std::size_t heads = 0;
    std::vector<std::size_t> counts[2] = {std::vector<std::size_t>(10, 0), std::vector<std::size_t>(10, 0)};
    for (const Corruption& x : c) {
      CHECK(x.entity != (x.replace_head ? t.head : t.tail));
      CHECK(x.entity < 10);
      heads += x.replace_head;
      ++counts[x.replace_head][x.entity];
    }
    // Binomial(10^4, 1/2): sd 50.
    CHECK(heads > 4800);
    CHECK(heads < 5200);
    // About 5000 / 9 per replacement on each side.
    for (int side = 0; side < 2; ++side) {
      for (EntityId e = 0; e < 10; ++e) {
        if (e == (side ? t.head : t.tail)) {
          CHECK(counts[side][e] == 0);
        } else {
          CHECK(counts[side][e] > 450);
        }
      }
    }
  }
  SUBCASE("a single entity cannot be corrupted") {
    CHECK_THROWS_AS(negative_sample({0, 0, 0}, 1, 1, rng), DataError);
  }
  SUBCASE("batches are row-major with K per positive") {
    const std::vector<Triple> pos{{0, 0, 1}, {2, 1, 3}};
    const TrainingBatch b = make_batch(pos, 5, 4, rng);
    CHECK(b.negatives.size() == 10);
    CHECK(b.negative_triple(1, 0).relation == 1);
  }
}

TEST_CASE("training") {
  const Dataset data = native::testing::toy_dataset(12, 2);
  HyperParams hp = tiny_hp();
  TrainOptions opt;
  opt.seed = 5;

  SUBCASE("zero epochs leave the initialization") {
    hp.epochs = 0;
    const TrainResult r = train(data.kg, data.features, hp, opt);
    CHECK(r.discriminator.model == initial_state(data.kg, data.features, hp, opt).discriminator.model);
    CHECK(r.losses.empty());
  }
  SUBCASE("identical seeds give identical checkpoints") {
    TempDir a("train_a"), b("train_b");
    opt.save_every = 2;
    opt.out_dir = a.path();
    train(data.kg, data.features, hp, opt);
    opt.out_dir = b.path();
    train(data.kg, data.features, hp, opt);
    CHECK(native::testing::snapshot(a.path()) == native::testing::snapshot(b.path()));
    CHECK(std::filesystem::exists(a / "checkpoint_epoch_2" / "manifest.json"));
    CHECK(std::filesystem::exists(a / "checkpoint" / "gen.w1.nkgt"));
    const Checkpoint ck = load_checkpoint(a / "checkpoint");
    CHECK(ck.extra.size() == 4);
  }
  SUBCASE("different seeds differ") {
    const TrainResult r1 = train(data.kg, data.features, hp, opt);
    opt.seed = 6;
    const TrainResult r2 = train(data.kg, data.features, hp, opt);
    CHECK_FALSE(r1.discriminator.model == r2.discriminator.model);
  }
  SUBCASE("without CoMAT the generator loss column stays empty") {
    TempDir dir("train_nocomat");
    opt.comat.enabled = false;
    opt.out_dir = dir.path();
    const TrainResult r = train(data.kg, data.features, hp, opt);
    CHECK_FALSE(r.generator.has_value());
    for (const LossRow& row : r.losses) CHECK_FALSE(row.g_loss.has_value());
    const std::string csv = native::testing::read_file(dir / "losses.csv");
    CHECK(csv.rfind("epoch,d_loss,g_loss\n1,", 0) == 0);
    CHECK(csv.find(",\n2,") != std::string::npos);
  }
  SUBCASE("lambda1 = 0 trains the same model as no CoMAT") {
    hp.lambda1 = 0.0;
    const TrainResult with = train(data.kg, data.features, hp, opt);
    opt.comat.enabled = false;
    const TrainResult without = train(data.kg, data.features, hp, opt);
    CHECK(with.discriminator.model == without.discriminator.model);
    for (const LossRow& row : with.losses) CHECK(row.g_loss.has_value());
  }
  SUBCASE("generator steps follow n_critic") {
    hp.n_critic = 1000;
    const TrainResult r = train(data.kg, data.features, hp, opt);
    // Fewer batches than n_critic: the generator never steps.
    CHECK(r.generator->mlp == initial_state(data.kg, data.features, hp, opt).generator->mlp);
  }
  SUBCASE("mlp critic and vanilla losses train and checkpoint") {
    TempDir dir("train_mlp");
    opt.comat.critic = CriticKind::mlp;
    opt.comat.loss = AdversarialLoss::vanilla;
    opt.out_dir = dir.path();
    const TrainResult r = train(data.kg, data.features, hp, opt);
    CHECK(r.discriminator.critic.has_value());
    CHECK(std::filesystem::exists(dir / "checkpoint" / "critic.w1.nkgt"));
  }
  SUBCASE("phases stay wrapped with unit modulus") {
    hp.epochs = 20;
    hp.lr_d = 0.5;
    const TrainResult r = train(data.kg, data.features, hp, opt);
    for (double th : r.discriminator.model.relation_phases.data()) {
      CHECK(th > -std::numbers::pi);
      CHECK(th <= std::numbers::pi);
      CHECK(std::abs(std::cos(th) * std::cos(th) + std::sin(th) * std::sin(th) - 1.0) <= 1e-12);
    }
  }
  SUBCASE("non-finite features abort with the epoch and batch") {
    Dataset bad = data;
    const std::vector<double> nan(3, std::nan(""));
    bad.features.set(0, bad.kg.train[0].head, nan);
    try {
      train(bad.kg, bad.features, hp, opt);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).rfind("epoch 1 batch ", 0) == 0);
    }
  }
  SUBCASE("loss decreases on the toy data") {
    hp.epochs = 30;
    hp.lr_d = 2e-2;
    opt.comat.enabled = false;
    const TrainResult r = train(data.kg, data.features, hp, opt);
    CHECK(r.losses.back().d_loss < r.losses.front().d_loss);
  }
}

TEST_CASE("rank_of") {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.3};
  CHECK(rank_of(s, 1, {}) == 1);
  CHECK(rank_of(s, 3, {}) == 3);
  const std::vector<EntityId> filtered{1, 2};
  CHECK(rank_of(s, 3, filtered) == 1);
  // The truth itself may appear in the filter list.
  const std::vector<EntityId> with_truth{2, 3};
  CHECK(rank_of(s, 3, with_truth) == 2);
  const std::vector<double> flat(10, -1.0);
  CHECK(rank_of(flat, 4, {}) == 5);
  const std::vector<double> one{-2.0};
  CHECK(rank_of(one, 0, {}) == 1);
  CHECK_THROWS_AS(rank_of(one, 1, {}), DataError);
}

TEST_CASE("scorer agrees with the tape scores") {
  const Dataset data = native::testing::toy_dataset(10, 2);
  FeatureStore store = data.features;
  store.drop(0, 2);
  ModelParams p = ModelParams::initialize(10, 2, 6, store.modalities(), 3);
  native::testing::randomize(p, 4);
  const Scorer scorer(p, store);
  ad::Tape tape;
  const BoundModel m = bind(tape, p, false);
  for (RelationId r = 0; r < 2; ++r) {
    const Tensor joint = scorer.joint(r);
    for (EntityId e = 0; e < 10; ++e) {
      const auto f = fuse(m, store, e, r).joint.value();
      for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(joint.at(e, k) - f[k]) <= 1e-12);
    }
    const auto tails = scorer.tail_scores(joint, r, 3);
    const auto heads = scorer.head_scores(joint, r, 3);
    for (EntityId e = 0; e < 10; ++e) {
      const double t = score(m, fuse(m, store, 3, r).joint, r, fuse(m, store, e, r).joint).value().item();
      const double h = score(m, fuse(m, store, e, r).joint, r, fuse(m, store, 3, r).joint).value().item();
      CHECK(std::abs(tails[e] - t) <= 1e-12);
      CHECK(std::abs(heads[e] - h) <= 1e-12);
    }
  }
}

TEST_CASE("filtered ranks equal the brute-force oracle") {
  for (std::size_t n : {10, 30, 50}) {
    const Dataset data = native::testing::toy_dataset(n, 3, n);
    FeatureStore store = data.features;
    for (EntityId e = 0; e < n; e += 4) store.drop(e % 2, e);
    ModelParams p = ModelParams::initialize(n, 3, 8, store.modalities(), n);
    native::testing::randomize(p, n + 1);
    const Scorer scorer(p, store);
    std::size_t checked = 0;
    for (const Triple& t : data.kg.test) {
      for (bool head : {true, false}) {
        CHECK(rank_query(scorer, data.kg.filter, t, head) == oracle_rank(p, store, data.kg, t, head));
        ++checked;
      }
    }
    CHECK(checked == 2 * data.kg.test.size());
  }
}

TEST_CASE("a known-true competitor never outranks the truth") {
  const Dataset data = native::testing::toy_dataset(10, 2);
  ModelParams p = ModelParams::initialize(10, 2, 4, data.features.modalities(), 1);
  const Scorer scorer(p, data.features);
  const Triple q = data.kg.test[0];
  const Tensor joint = scorer.joint(q.relation);
  const auto scores = scorer.tail_scores(joint, q.relation, q.head);
  // Mark every candidate scoring above the truth as known-true.
  KnowledgeGraph kg = data.kg;
  for (EntityId e = 0; e < 10; ++e) {
    if (scores[e] > scores[q.tail]) kg.valid.push_back({q.head, q.relation, e});
  }
  kg.rebuild_filter();
  CHECK(rank_query(scorer, kg.filter, q, false) == 1);
}

TEST_CASE("metrics") {
  const std::vector<std::size_t> perfect{1, 1, 1};
  const MetricsReport a = summarize(perfect);
  CHECK(a.mrr == 1.0);
  CHECK(a.hits.at(1) == 1.0);
  CHECK(a.hits.at(10) == 1.0);
  const std::vector<std::size_t> mixed{1, 2, 4};
  const MetricsReport b = summarize(mixed);
  CHECK(b.mrr == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(b.hits.at(1) == doctest::Approx(1.0 / 3.0));
  CHECK(b.hits.at(3) == doctest::Approx(2.0 / 3.0));
  CHECK(b.n_queries == 3);
  CHECK(random_mrr(1) == 1.0);
  CHECK(random_mrr(100) == doctest::Approx(0.05187377517639621).epsilon(1e-14));

  const auto j = b.to_json();
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"mrr", "hits", "n_queries"});
}

TEST_CASE("evaluate") {
  const Dataset data = native::testing::toy_dataset(40, 3, 9);
  FeatureStore store = data.features;
  for (EntityId e = 0; e < 40; e += 3) store.drop(0, e);
  ModelParams p = ModelParams::initialize(40, 3, 8, store.modalities(), 2);
  native::testing::randomize(p, 8);
  const Scorer scorer(p, store);
  const auto labels = group_split(data.kg, store);

  EvalOptions one;
  one.groups = &labels;
  const MetricsReport r1 = evaluate(data.kg.test, scorer, data.kg.filter, one);
  EvalOptions four = one;
  four.threads = 4;
  const MetricsReport r4 = evaluate(data.kg.test, scorer, data.kg.filter, four);
  CHECK(r1.to_json() == r4.to_json());

  CHECK(r1.n_queries == 2 * data.kg.test.size());
  std::size_t total = 0;
  for (const auto& [name, g] : r1.groups) total += g.n_queries;
  CHECK(total == r1.n_queries);
  CHECK(r1.hits.at(1) <= r1.hits.at(3));
  CHECK(r1.hits.at(3) <= r1.hits.at(10));
  CHECK(r1.hits.at(10) <= 1.0);
  CHECK(r1.mrr >= r1.hits.at(1));
  CHECK(r1.mrr >= 1.0 / 40.0);
  CHECK(r1.mrr <= 1.0);

  // Untrained model on the complete store: everything in Group1.
  const auto complete = group_split(data.kg, data.features);
  EvalOptions g;
  g.groups = &complete;
  const MetricsReport rc = evaluate(data.kg.test, Scorer(p, data.features), data.kg.filter, g);
  REQUIRE(rc.groups.size() == 1);
  CHECK(rc.groups.begin()->second.n_queries == rc.n_queries);

  CHECK_THROWS_AS(evaluate(std::span<const Triple>{}, scorer, data.kg.filter), DataError);
}

TEST_CASE("reports") {
  const Dataset data = native::testing::toy_dataset(10, 3);
  ModelParams p = ModelParams::initialize(10, 3, 4, data.features.modalities(), 1);
  TempDir dir("reports");
  write_temperatures_csv(dir / "t.csv", p, data.kg.relations);
  const std::string csv = native::testing::read_file(dir / "t.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find(data.kg.relations.name(0) + ",0,0.5\n") != std::string::npos);

  native::testing::randomize(p, 2);
  const WeightSummary s = modality_weight_summary(p, data.features, data.kg.train);
  CHECK(s.modalities == std::vector<std::string>{"S", "image", "text"});
  CHECK_FALSE(s.relations.empty());
  for (const auto& row : s.weights) {
    CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-6);
  }
  write_weight_summary_csv(dir / "w.csv", s, data.kg.relations);
  CHECK(native::testing::read_file(dir / "w.csv").rfind("relation,S,image,text\n", 0) == 0);
}
