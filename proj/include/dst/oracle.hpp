#pragma once

#include <set>

#include "dst/core.hpp"

namespace dst {

// Ground truth over the full multiset: exact per-value counts plus exact rank
// queries over (value, seq) keys. Trackers are judged against this.
class ExactOracle {
 public:
  explicit ExactOracle(Value u) : keys_(u) {}

  void insert(Key k) { keys_.insert(k); }

  int64_t size() const { return keys_.size(); }
  Value universe() const { return keys_.universe(); }
  int64_t count(Value v) const { return keys_.count_value(v); }
  int64_t rank(Key k) const { return keys_.rank(k); }
  int64_t rank_of_value(Value v) const { return keys_.rank(make_key(v, 0)); }
  Key select(int64_t r) const { return keys_.select(r); }
  int64_t count_range(Key lo, Key hi) const { return keys_.count_range(lo, hi); }
  bool contains(Key k) const { return keys_.contains(k); }

  struct HHSets {
    std::set<Value> mandatory;  // count >= phi*|A|
    std::set<Value> forbidden;  // count <  (phi-eps)*|A|, among values present
  };

  // Direct evaluation of the approximation contract over all present values.
  HHSets admissible_hh(const Rat& phi, const Rat& eps) const;

  bool hh_mandatory(Value v, const Rat& phi) const {
    return int_ge_ratmul(count(v), phi, size());
  }
  bool hh_forbidden(Value v, const Rat& phi, const Rat& eps) const {
    return cmp_int_ratmul(count(v), phi - eps, size()) < 0;
  }

  // A member key x is an admissible answer for the phi-quantile at error eps
  // iff some phi' in [phi-eps, phi+eps] has at most phi'|A| items below x and
  // at most (1-phi')|A| above, i.e. (phi-eps)|A| - 1 <= rank(x) <= (phi+eps)|A|.
  bool quantile_admissible(Key x, const Rat& phi, const Rat& eps) const {
    int64_t r = rank(x);
    int64_t n = size();
    return cmp_int_ratmul(r + 1, phi - eps, n) >= 0 && int_le_ratmul(r, phi + eps, n);
  }

  // Inclusive 0-based rank window of admissible member keys.
  std::pair<int64_t, int64_t> admissible_quantile_ranks(const Rat& phi, const Rat& eps) const;

 private:
  OrderedMultiset keys_;
};

}  // namespace dst
