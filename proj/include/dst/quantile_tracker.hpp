#pragma once

#include "dst/core.hpp"
#include "dst/store.hpp"

namespace dst {

// Single phi-quantile tracking. Per round (|A| doubling): the coordinator
// keeps separators partitioning the key space into intervals of [eps*m/8,
// eps*m/2] items, plus the tracked item M with left/right drift counters.
// Sites report drift and per-interval growth in ceil(eps*m/8k) increments;
// an imbalance of eps*m/2 in the weighted drift relocates M onto a nearby
// separator via exact-count probes; an interval estimate reaching 3*eps*m/8
// splits that interval.
class QuantileTracker {
 public:
  QuantileTracker(const TrackerConfig& cfg, Channel& ch);

  void on_arrival(const ArrivalEvent& ev);

  bool in_warmup() const { return warmup_; }
  int64_t warmup_target() const { return warmup_target_; }

  // The currently tracked quantile item.
  Key query() const;

  // --- introspection ---
  struct IntervalInfo {
    Key lo, hi;       // (lo, hi]
    int64_t est;      // coordinator's underestimate of the content
  };
  std::vector<IntervalInfo> intervals() const;
  const std::vector<Key>& boundaries() const { return boundaries_; }
  Key tracked() const { return m_key_; }
  int64_t round_start_size() const { return m0_; }
  int64_t count_estimate() const { return cnt_n_; }
  int64_t drift_left() const { return dl_; }
  int64_t drift_right() const { return dr_; }
  int64_t drift_threshold() const { return t_dr_; }
  int64_t interval_threshold() const { return t_iv_; }
  int64_t split_trigger() const { return t_split_; }
  int64_t round_epoch() const { return round_epoch_; }
  int64_t relocation_epoch() const { return reloc_epoch_; }
  int64_t relocations_this_round() const { return relocs_this_round_; }
  int64_t splits_this_round() const { return splits_this_round_; }
  int64_t drift_updates_this_round() const { return drift_updates_this_round_; }
  int64_t interval_updates_this_round() const { return iv_updates_this_round_; }

  // Step-1 movement target for the median case, kept for unit checks.
  static int64_t relocation_distance(int64_t left, int64_t right) {
    return (left - right) / 2;
  }

 private:
  struct Site {
    SiteStore store;
    int64_t pend_l = 0, pend_r = 0, pend_n = 0;
    std::vector<int64_t> pend_iv;
    Site(TrackerMode mode, Value u, const Rat& se) : store(mode, u, se) {}
  };

  void init_round();
  void relocate();
  void split(size_t idx);
  bool drift_trigger() const;
  size_t interval_of(Key k) const;
  int64_t poll_exact_rank(Key y);        // probe episode, k requests+replies
  int64_t exact_rank_nosend(Key y) const;
  Key interval_lo(size_t idx) const { return idx == 0 ? kKeyLow : boundaries_[idx - 1]; }
  Key interval_hi(size_t idx) const {
    return idx == boundaries_.size() ? key_high(cfg_.u) : boundaries_[idx];
  }

  TrackerConfig cfg_;
  Rat eps_p_;
  Channel& ch_;
  std::vector<Site> sites_;

  bool warmup_ = true;
  int64_t warmup_target_ = 0;
  OrderedMultiset warm_store_;

  // round state
  int64_t m0_ = 0;
  int64_t cnt_n_ = 0;
  Key m_key_ = 0;
  int64_t dl_ = 0, dr_ = 0;
  std::vector<Key> boundaries_;
  std::vector<int64_t> est_;
  int64_t t_dr_ = 1, t_iv_ = 1, t_cnt_ = 1, t_split_ = 1, t_half_ = 1;

  int64_t round_epoch_ = 0, reloc_epoch_ = 0;
  int64_t relocs_this_round_ = 0, splits_this_round_ = 0;
  int64_t drift_updates_this_round_ = 0, iv_updates_this_round_ = 0;
  int64_t round_id_ = 0;
};

}  // namespace dst
