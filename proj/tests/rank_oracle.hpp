#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "native/redaf.hpp"

namespace native::testing {

// Brute-force rank: every candidate fused and scored on its own through the
// single-triple tape path, optionally filtered against the raw splits, then
// sorted by score.
inline std::size_t oracle_rank(const ModelParams& params, const FeatureStore& store, const KnowledgeGraph& kg,
                               const Triple& q, bool predict_head, bool filtered = true,
                               bool relation_guidance = true) {
  std::set<Triple> known;
  if (filtered) {
    known.insert(kg.train.begin(), kg.train.end());
    known.insert(kg.valid.begin(), kg.valid.end());
    known.insert(kg.test.begin(), kg.test.end());
  }
  ad::Tape tape;
  const BoundModel m = bind(tape, params, false, relation_guidance);
  std::vector<std::pair<double, EntityId>> scored;
  double truth_score = 0.0;
  for (EntityId e = 0; e < params.entity_count(); ++e) {
    Triple c = q;
    (predict_head ? c.head : c.tail) = e;
    const double s =
        score(m, fuse(m, store, c.head, c.relation).joint, c.relation, fuse(m, store, c.tail, c.relation).joint)
            .value()
            .item();
    if (c == q) {
      truth_score = s;
    } else if (!known.contains(c)) {
      scored.emplace_back(s, e);
    }
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t greater = 0;
  while (greater < scored.size() && scored[greater].first > truth_score) ++greater;
  std::size_t ties = 0;
  while (greater + ties < scored.size() && scored[greater + ties].first == truth_score) ++ties;
  return 1 + greater + ties / 2;
}

}  // namespace native::testing
