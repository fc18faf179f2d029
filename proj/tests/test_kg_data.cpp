#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "native/error.hpp"
#include "native/imbalance.hpp"
#include "native/synth.hpp"
#include "test_util.hpp"

#include <json.hpp>

using namespace native;
using native::testing::TempDir;
using native::testing::write_file;

namespace {

void write_toy(const TempDir& dir, const std::string& image_rows) {
  write_file(dir / "entities.tsv", "a\nb\nc\n");
  write_file(dir / "relations.tsv", "likes\n");
  write_file(dir / "train.tsv", "a\tlikes\tb\nb\tlikes\tc\n");
  write_file(dir / "valid.tsv", "a\tlikes\tc\n");
  write_file(dir / "manifest.json", R"({"modalities": [{"name": "image", "dim": 5}]})");
  write_file(dir / "features/image.tsv", image_rows);
}

std::string error_of(const std::filesystem::path& dir) {
  try {
    load_dataset(dir);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("load toy dataset") {
  TempDir dir("load");
  write_toy(dir, "a\t1 2 3 4 5\nc\t0.5 0.25 -1 2e-3 7\n");
  const Dataset d = load_dataset(dir.path());
  CHECK(d.kg.entity_count() == 3);
  CHECK(d.kg.relation_count() == 1);
  CHECK(d.kg.train.size() == 2);
  CHECK(d.kg.valid.size() == 1);
  CHECK(d.kg.test.empty());
  CHECK(d.features.has(0, 0));
  CHECK_FALSE(d.features.has(0, 1));
  CHECK(d.features.feature(0, 2)[3] == 2e-3);
  CHECK_FALSE(d.features.is_complete(1));
  CHECK(d.kg.filter.size() == 3);
}

TEST_CASE("feature dimension mismatch names file and line") {
  TempDir dir("dim");
  write_toy(dir, "a\t1 2 3 4 5\nb\t1 2 3 4\n");
  const std::string msg = error_of(dir.path());
  CHECK(contains(msg, "image.tsv:2:"));
  CHECK(contains(msg, "dimension mismatch"));
}

TEST_CASE("unknown entity in feature file names file and line") {
  TempDir dir("unknown");
  write_toy(dir, "a\t1 2 3 4 5\n\nzed\t1 2 3 4 5\n");
  const std::string msg = error_of(dir.path());
  CHECK(contains(msg, "image.tsv:3:"));
  CHECK(contains(msg, "zed"));
}

TEST_CASE("malformed inputs are rejected") {
  TempDir dir("bad");
  write_toy(dir, "a\t1 2 x 4 5\n");
  CHECK(contains(error_of(dir.path()), "malformed number"));
  write_toy(dir, "a\t1 2 3 4 5\na\t1 2 3 4 5\n");
  CHECK(contains(error_of(dir.path()), "duplicate"));
  write_toy(dir, "");
  write_file(dir / "train.tsv", "a\tlikes\n");
  CHECK(contains(error_of(dir.path()), "train.tsv:1:"));
  write_file(dir / "train.tsv", "a\thates\tb\n");
  CHECK(contains(error_of(dir.path()), "unknown relation"));
  write_file(dir / "train.tsv", "");
  std::filesystem::remove(dir / "features/image.tsv");
  CHECK(contains(error_of(dir.path()), "missing feature file"));
}

TEST_CASE("write then load round-trips exactly") {
  TempDir a("rt-a");
  SynthSpec spec;
  spec.entities = 30;
  spec.relations = 3;
  spec.clusters = 5;
  const Dataset original = generate_synthetic(spec);
  write_dataset(original, a.path());
  const Dataset back = load_dataset(a.path());
  CHECK(back.kg.entities.names() == original.kg.entities.names());
  CHECK(back.kg.train == original.kg.train);
  CHECK(back.kg.valid == original.kg.valid);
  CHECK(back.kg.test == original.kg.test);
  CHECK(back.features == original.features);
}

TEST_CASE("filter index holds exactly the union of splits") {
  const Dataset d = generate_synthetic(SynthSpec{});
  std::set<Triple> all;
  for (const auto* split : {&d.kg.train, &d.kg.valid, &d.kg.test}) {
    for (const Triple& t : *split) {
      all.insert(t);
      const auto& tails = d.kg.filter.tails(t.head, t.relation);
      const auto& heads = d.kg.filter.heads(t.relation, t.tail);
      CHECK(std::binary_search(tails.begin(), tails.end(), t.tail));
      CHECK(std::binary_search(heads.begin(), heads.end(), t.head));
      CHECK(d.kg.filter.contains(t));
    }
  }
  CHECK(d.kg.filter.size() == all.size());
  std::size_t listed = 0;
  for (EntityId h = 0; h < d.kg.entity_count(); ++h) {
    for (RelationId r = 0; r < d.kg.relation_count(); ++r) {
      for (EntityId t : d.kg.filter.tails(h, r)) {
        CHECK(all.contains(Triple{h, r, t}));
        ++listed;
      }
    }
  }
  CHECK(listed == all.size());
}

TEST_CASE("gen_synth is byte-identical across runs") {
  TempDir a("synth-a"), b("synth-b");
  SynthSpec spec;
  spec.entities = 100;
  spec.relations = 10;
  spec.seed = 7;
  gen_synth(spec, a.path());
  gen_synth(spec, b.path());
  const std::string snap = native::testing::snapshot(a.path());
  CHECK(snap == native::testing::snapshot(b.path()));
  CHECK(snap.size() > 1000);

  const Dataset d = load_dataset(a.path());
  CHECK(d.kg.entity_count() == 100);
  CHECK(d.kg.relation_count() == 10);
  CHECK(d.features.modality_count() == 2);
  for (EntityId e = 0; e < 100; ++e) CHECK(d.features.is_complete(e));
}

TEST_CASE("synthetic features sit within the noise box of exactly one centroid") {
  SynthSpec spec;
  spec.entities = 100;
  spec.clusters = 5;
  const Dataset d = generate_synthetic(spec);
  // Regenerate centroids independently from the seed.
  const SynthTruth truth = synth_truth(spec);
  const double radius = spec.noise + 1e-6;  // values are rounded to 6 decimals
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    for (EntityId e = 0; e < spec.entities; ++e) {
      const auto f = d.features.feature(m, e);
      int inside = 0;
      std::size_t which = 0;
      for (std::size_t c = 0; c < spec.clusters; ++c) {
        double dist = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) dist = std::max(dist, std::abs(f[j] - truth.centroids[m][c][j]));
        if (dist <= radius) {
          ++inside;
          which = c;
        }
      }
      CHECK(inside == 1);
      CHECK(which == truth.cluster_of[e]);
    }
  }
}

TEST_CASE("synthetic splits partition the triples 80/10/10") {
  SynthSpec spec;
  const Dataset d = generate_synthetic(spec);
  const SynthTruth truth = synth_truth(spec);
  const std::size_t total = d.kg.train.size() + d.kg.valid.size() + d.kg.test.size();
  CHECK(d.kg.filter.size() == total);
  CHECK(d.kg.train.size() == static_cast<std::size_t>(std::round(0.8 * double(total))));
  CHECK(d.kg.valid.size() == static_cast<std::size_t>(std::round(0.1 * double(total))));
  for (const auto* split : {&d.kg.train, &d.kg.valid, &d.kg.test}) {
    for (const Triple& t : *split) {
      CHECK(truth.cluster_of[t.tail] == (truth.cluster_of[t.head] + truth.shift[t.relation]) % spec.clusters);
    }
  }
}

TEST_CASE("gen_synth rejects degenerate sizes") {
  SynthSpec spec;
  spec.entities = 9;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = SynthSpec{};
  spec.modalities = {{"image", 1}};
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
  spec = SynthSpec{};
  spec.clusters = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("perturb drop counts") {
  SynthSpec spec;
  spec.entities = 100;
  const Dataset d = generate_synthetic(spec);

  SUBCASE("eta 0 is the identity") {
    for (auto level : {ImbalanceLevel::entity, ImbalanceLevel::modality}) {
      const auto r = perturb(d.features, d.kg, {0.0, level, 3});
      CHECK(r.features == d.features);
      CHECK(r.dropped_slots.empty());
    }
  }
  SUBCASE("eta 1 at entity level empties the store") {
    const auto r = perturb(d.features, d.kg, {1.0, ImbalanceLevel::entity, 3});
    for (EntityId e = 0; e < 100; ++e) CHECK(r.features.entry_count(e) == 0);
  }
  SUBCASE("eta 0.5 at entity level drops exactly 50 entities") {
    const auto r = perturb(d.features, d.kg, {0.5, ImbalanceLevel::entity, 3});
    CHECK(r.dropped_entities.size() == 50);
    std::size_t empty = 0;
    for (EntityId e = 0; e < 100; ++e) empty += r.features.entry_count(e) == 0;
    CHECK(empty == 50);
  }
  SUBCASE("exact counts for every eta and level") {
    for (double eta : {0.2, 0.3, 0.5, 0.8}) {
      const auto ent = perturb(d.features, d.kg, {eta, ImbalanceLevel::entity, 11});
      CHECK(ent.dropped_entities.size() == drop_count(eta, 100));
      const auto mod = perturb(d.features, d.kg, {eta, ImbalanceLevel::modality, 11});
      for (std::size_t m = 0; m < 2; ++m) {
        CHECK(d.features.present_count(m) - mod.features.present_count(m) == drop_count(eta, 100));
      }
    }
  }
  SUBCASE("modality level counts against present entries") {
    FeatureStore partial = d.features;
    for (EntityId e = 0; e < 30; ++e) partial.drop(0, e);
    const auto r = perturb(partial, d.kg, {0.25, ImbalanceLevel::modality, 5});
    CHECK(r.features.present_count(0) == 70 - 18);  // round(17.5) = 18
    CHECK(r.features.present_count(1) == 75);
  }
  SUBCASE("deterministic by seed") {
    const auto a = perturb(d.features, d.kg, {0.3, ImbalanceLevel::modality, 42});
    const auto b = perturb(d.features, d.kg, {0.3, ImbalanceLevel::modality, 42});
    const auto c = perturb(d.features, d.kg, {0.3, ImbalanceLevel::modality, 43});
    CHECK(a.features == b.features);
    CHECK(a.dropped_slots == b.dropped_slots);
    CHECK(a.dropped_slots != c.dropped_slots);
  }
  SUBCASE("invalid eta") {
    CHECK_THROWS_AS(perturb(d.features, d.kg, {1.5, ImbalanceLevel::entity, 1}), ConfigError);
    CHECK_THROWS_AS(perturb(d.features, d.kg, {-0.1, ImbalanceLevel::entity, 1}), ConfigError);
    CHECK_THROWS_AS(parse_imbalance_level("row"), ConfigError);
  }
}

TEST_CASE("drop_count rounds half away from zero") {
  CHECK(drop_count(0.5, 3) == 2);
  CHECK(drop_count(0.3, 100) == 30);
  CHECK(drop_count(0.25, 70) == 18);
  CHECK(drop_count(1.0, 7) == 7);
}

TEST_CASE("perturbed dataset copy") {
  TempDir src("p-src"), dst("p-dst"), zero("p-zero");
  SynthSpec spec;
  spec.entities = 40;
  gen_synth(spec, src.path());
  const Dataset d = load_dataset(src.path());
  const ImbalanceSpec is{0.3, ImbalanceLevel::entity, 9};
  const auto r = perturb(d.features, d.kg, is);
  write_perturbed_dataset(src.path(), dst.path(), d, r, is);
  const Dataset back = load_dataset(dst.path());
  CHECK(back.features == r.features);
  CHECK(back.kg.train == d.kg.train);
  CHECK(native::testing::read_file(dst / "train.tsv") == native::testing::read_file(src / "train.tsv"));
  const auto manifest = nlohmann::json::parse(native::testing::read_file(dst / "drop_manifest.json"));
  CHECK(manifest["dropped_entities"].size() == 12);
  CHECK(manifest["dropped"].size() == 24);

  const ImbalanceSpec none{0.0, ImbalanceLevel::entity, 9};
  write_perturbed_dataset(src.path(), zero.path(), d, perturb(d.features, d.kg, none), none);
  for (const char* f : {"features/image.tsv", "features/text.tsv"}) {
    CHECK(native::testing::read_file(zero / f) == native::testing::read_file(src / f));
  }
}

TEST_CASE("group_split") {
  SynthSpec spec;
  const Dataset d = generate_synthetic(spec);
  REQUIRE_FALSE(d.kg.test.empty());

  auto labels = group_split(d.kg, d.features);
  CHECK(labels.size() == d.kg.test.size());
  CHECK(std::all_of(labels.begin(), labels.end(), [](GroupLabel g) { return g == GroupLabel::group1; }));

  const auto full = perturb(d.features, d.kg, {1.0, ImbalanceLevel::entity, 1});
  labels = group_split(d.kg, full.features);
  CHECK(std::all_of(labels.begin(), labels.end(), [](GroupLabel g) { return g == GroupLabel::group3; }));

  const Triple first = d.kg.test.front();
  FeatureStore one = d.features;
  one.drop(1, first.tail);
  labels = group_split(d.kg, one);
  CHECK(labels.front() == (first.head == first.tail ? GroupLabel::group3 : GroupLabel::group2));

  const auto half = perturb(d.features, d.kg, {0.5, ImbalanceLevel::modality, 2});
  labels = group_split(d.kg, half.features);
  std::size_t counts[4] = {};
  for (GroupLabel g : labels) ++counts[static_cast<int>(g)];
  CHECK(counts[1] + counts[2] + counts[3] == d.kg.test.size());
  CHECK(counts[2] > 0);
}
