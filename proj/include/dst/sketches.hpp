#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "dst/core.hpp"

namespace dst {

// Space-Saving: c monitored counters; an unmonitored arrival evicts the
// current minimum and inherits its count as overestimation bound.
class SpaceSavingSketch {
 public:
  explicit SpaceSavingSketch(int64_t capacity) : cap_(capacity) {
    if (capacity < 1) throw std::invalid_argument("space-saving capacity must be >= 1");
  }

  void insert(Value x);

  struct Estimate {
    int64_t lower = 0;  // count - err, never above the true count
    int64_t upper = 0;  // count, never below the true count
  };
  Estimate estimate(Value x) const;

  int64_t stream_length() const { return n_; }
  int64_t capacity() const { return cap_; }
  int64_t monitored() const { return int64_t(counters_.size()); }
  int64_t min_count() const { return by_count_.empty() ? 0 : by_count_.begin()->first; }
  int64_t sum_counts() const;

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [v, c] : counters_) f(v, c.count, c.err);
  }

 private:
  struct Counter {
    int64_t count = 0;
    int64_t err = 0;
    std::multimap<int64_t, Value>::iterator pos;
  };
  void reposition(std::unordered_map<Value, Counter>::iterator it);

  int64_t cap_;
  int64_t n_ = 0;
  std::unordered_map<Value, Counter> counters_;
  std::multimap<int64_t, Value> by_count_;
};

// Greenwald-Khanna quantile summary over 64-bit keys. Maintains for every
// tuple g + range <= floor(2*eps*n), which bounds any rank answer by eps*n.
class GKSketch {
 public:
  explicit GKSketch(Rat eps) : eps_(eps) {
    if (eps.num <= 0) throw std::invalid_argument("gk eps must be positive");
    int64_t per = eps_.den / (2 * eps_.num);
    compress_period_ = per < 1 ? 1 : per;
  }

  void insert(Key k);

  // Estimated number of inserted keys strictly below k; |error| <= eps*n.
  int64_t rank(Key k) const;

  // A stored key whose rank is within eps*n of the target rank.
  Key select(int64_t target_rank) const;

  // Stored keys nearest local ranks spacing-1, 2*spacing-1, ...; used to ship
  // per-site summaries at a fixed granularity.
  std::vector<Key> spaced_keys(Key lo, Key hi, int64_t spacing) const;

  int64_t size() const { return n_; }
  int64_t tuples() const { return int64_t(tuples_.size()); }
  int64_t band_cap() const { return floor_mul(eps_ * Rat(2, 1), n_); }
  bool band_ok() const;

 private:
  struct Tuple {
    Key key;
    int64_t g;
    int64_t range;  // the classical delta
  };
  void compress();

  Rat eps_;
  int64_t compress_period_;
  int64_t n_ = 0;
  int64_t since_compress_ = 0;
  std::vector<Tuple> tuples_;
};

}  // namespace dst
