#pragma once

#include <optional>
#include <set>

#include "dst/core.hpp"
#include "dst/sketches.hpp"

namespace dst {

// Heavy-hitter tracking. Sites keep increment counters against the threshold
// ceil(eps * S_j.m / 3k); crossing it emits an all-signal (total count) or an
// item-signal (per item). After k all-signals the coordinator polls exact
// local totals and rebroadcasts m, starting a new round. Classification:
// C.m_x / C.m >= phi - eps/2, evaluated in exact rational arithmetic. (With
// C.m_x underestimating by at most eps*m/3 and C.m in [m(1-eps/3), m], the
// estimated ratio sits within eps/2 of the true one, so this threshold admits
// every item at or above phi*m and rejects everything below (phi-eps)*m.)
class HHTracker {
 public:
  HHTracker(const TrackerConfig& cfg, Channel& ch);

  void on_arrival(const ArrivalEvent& ev);

  bool in_warmup() const { return warmup_; }
  int64_t warmup_target() const { return warmup_target_; }

  bool is_heavy(Value x) const;
  const std::set<Value>& reported() const { return reported_; }

  // --- introspection ---
  int64_t coord_m() const { return c_m_; }
  int64_t coord_mx(Value x) const {
    auto it = c_mx_.find(x);
    return it == c_mx_.end() ? 0 : it->second;
  }
  template <typename F>
  void for_each_coord_mx(F&& f) const {
    for (const auto& [v, c] : c_mx_) f(v, c);
  }
  int64_t site_m_estimate(int j) const { return sites_[j].s_m; }
  int64_t site_local_n(int j) const { return sites_[j].local_n; }
  int64_t site_threshold(int j) const { return threshold(j); }
  int64_t site_pending_total(int j) const { return sites_[j].d_m; }
  int64_t site_pending_item(int j, Value x) const {
    auto it = sites_[j].d_mx.find(x);
    return it == sites_[j].d_mx.end() ? 0 : it->second;
  }
  // Copies of an item a site can still absorb before it must send a message.
  int64_t remaining_to_trigger(int j, Value x) const;
  int64_t resync_epoch() const { return resync_epoch_; }
  int64_t allsignals_since_resync() const { return allsig_count_; }
  int64_t total_item_signals() const { return n_item_signals_; }
  int64_t total_all_signals() const { return n_all_signals_; }

 private:
  struct Site {
    int64_t s_m = 0;
    int64_t d_m = 0;
    std::unordered_map<Value, int64_t> d_mx;      // exact mode
    std::unordered_map<Value, int64_t> local_mx;  // exact mode
    int64_t local_n = 0;
    std::optional<SpaceSavingSketch> ss;                // sketch mode
    std::unordered_map<Value, int64_t> last_reported;   // sketch mode
  };

  int64_t threshold(int j) const {
    const Site& s = sites_[j];
    __int128 num = i128(eps_p_.num) * s.s_m;
    int64_t den = eps_p_.den * 3 * cfg_.k;
    int64_t t = int64_t((num + den - 1) / den);
    return t < 1 ? 1 : t;
  }

  void finish_warmup();
  void coord_item_signal(Value x, int64_t v);
  void coord_all_signal(int64_t v);
  void resync();
  void reclassify(Value x);
  void prune_reported();

  TrackerConfig cfg_;
  Rat eps_p_;
  Channel& ch_;
  std::vector<Site> sites_;

  bool warmup_ = true;
  int64_t warmup_target_ = 0;
  int64_t warmup_seen_ = 0;

  int64_t c_m_ = 0;
  std::unordered_map<Value, int64_t> c_mx_;
  int allsig_count_ = 0;
  std::set<Value> reported_;
  int64_t resync_epoch_ = 0;
  int64_t round_id_ = 0;
  int64_t n_item_signals_ = 0;
  int64_t n_all_signals_ = 0;
};

}  // namespace dst
