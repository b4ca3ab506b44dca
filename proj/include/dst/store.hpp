#pragma once

#include <memory>

#include "dst/core.hpp"
#include "dst/sketches.hpp"

namespace dst {

// A site's view of its own items, exact or summarized. All rank-style
// answers are exact in exact mode and eps'-approximate in sketch mode.
class SiteStore {
 public:
  SiteStore(TrackerMode mode, Value u, const Rat& sketch_eps) : mode_(mode) {
    if (mode_ == TrackerMode::exact) exact_ = std::make_unique<OrderedMultiset>(u);
    else gk_ = std::make_unique<GKSketch>(sketch_eps);
  }

  void insert(Key k) {
    ++n_;
    if (exact_) exact_->insert(k);
    else gk_->insert(k);
  }

  int64_t size() const { return n_; }

  int64_t rank(Key k) const { return exact_ ? exact_->rank(k) : gk_->rank(k); }

  int64_t count_range(Key lo, Key hi) const { return rank(hi + 1) - rank(lo + 1); }

  std::vector<Key> spaced_keys(Key lo, Key hi, int64_t spacing) const {
    return exact_ ? exact_->spaced_keys(lo, hi, spacing) : gk_->spaced_keys(lo, hi, spacing);
  }

  const OrderedMultiset* exact() const { return exact_.get(); }

 private:
  TrackerMode mode_;
  std::unique_ptr<OrderedMultiset> exact_;
  std::unique_ptr<GKSketch> gk_;
  int64_t n_ = 0;
};

}  // namespace dst
