#pragma once

#include <cstddef>
#include <vector>

#include "native/kg_data.hpp"

namespace native {

// One corrupted copy of a positive triple: `entity` replaces the head when
// `replace_head` is set, the tail otherwise.
struct Corruption {
  EntityId entity = 0;
  bool replace_head = false;
};

// Positives plus K corruptions each, stored row-major: corruption i of
// positive b is negatives[b * K + i].
struct TrainingBatch {
  std::vector<Triple> positives;
  std::vector<Corruption> negatives;
  std::size_t negatives_per_positive = 0;

  Triple negative_triple(std::size_t b, std::size_t i) const {
    Triple t = positives[b];
    const Corruption& c = negatives[b * negatives_per_positive + i];
    (c.replace_head ? t.head : t.tail) = c.entity;
    return t;
  }
};

}  // namespace native
