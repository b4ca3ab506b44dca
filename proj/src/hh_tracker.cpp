#include "dst/hh_tracker.hpp"

namespace dst {

HHTracker::HHTracker(const TrackerConfig& cfg, Channel& ch)
    : cfg_(cfg), eps_p_(cfg.protocol_eps()), ch_(ch), sites_(cfg.k) {
  cfg_.validate_common();
  if (cmp_int_ratmul(0, cfg_.phi - cfg_.eps, 1) > 0)
    throw std::invalid_argument("heavy hitters require phi >= eps");
  // Forward everything until m = k/eps so the protocol starts exact.
  warmup_target_ = int64_t((i128(cfg_.k) * cfg_.eps.den + cfg_.eps.num - 1) / cfg_.eps.num);
  if (cfg_.warmup_items > warmup_target_) warmup_target_ = cfg_.warmup_items;
  if (cfg_.mode == TrackerMode::sketch) {
    int64_t cap = int64_t((i128(32) * cfg_.eps.den + cfg_.eps.num - 1) / cfg_.eps.num);
    for (auto& s : sites_) s.ss.emplace(cap);
  }
}

void HHTracker::on_arrival(const ArrivalEvent& ev) {
  Site& s = sites_[ev.site];
  Value x = ev.item;
  s.local_n++;
  if (cfg_.mode == TrackerMode::exact) {
    s.local_mx[x]++;
  } else {
    s.ss->insert(x);
    // Exact counts are kept through warm-up only, to seed the reporting
    // baseline; the sketch takes over afterwards.
    if (warmup_) s.local_mx[x]++;
  }

  if (warmup_) {
    ch_.site_to_coord(ev.site, MsgKind::warmup_forward, 1);
    c_m_++;
    c_mx_[x]++;
    reclassify(x);
    prune_reported();
    if (++warmup_seen_ >= warmup_target_) finish_warmup();
    return;
  }

  int64_t t = threshold(ev.site);
  bool send_item = false;
  int64_t item_v = 0;

  if (cfg_.mode == TrackerMode::exact) {
    int64_t& dx = s.d_mx[x];
    dx++;
    if (dx >= t) {
      send_item = true;
      item_v = dx;
      s.d_mx.erase(x);
    }
  } else {
    auto est = s.ss->estimate(x);
    int64_t reported = 0;
    auto it = s.last_reported.find(x);
    if (it != s.last_reported.end()) reported = it->second;
    int64_t pending = est.lower - reported;
    if (pending >= t) {
      send_item = true;
      item_v = pending;
      s.last_reported[x] = est.lower;
    }
  }

  s.d_m++;
  bool send_all = s.d_m >= t;

  if (send_item) {
    ch_.site_to_coord(ev.site, MsgKind::item_signal, 2);
    n_item_signals_++;
    coord_item_signal(x, item_v);
  }
  if (send_all) {
    s.d_m = 0;
    ch_.site_to_coord(ev.site, MsgKind::all_signal, 1);
    n_all_signals_++;
    coord_all_signal(t);
  }
}

void HHTracker::finish_warmup() {
  warmup_ = false;
  // The coordinator saw everything, so C.m is exact; announce it.
  ch_.broadcast(MsgKind::broadcast_state, 1);
  for (int j = 0; j < cfg_.k; ++j) {
    sites_[j].s_m = c_m_;
    sites_[j].d_m = 0;
    sites_[j].d_mx.clear();
    if (cfg_.mode == TrackerMode::sketch) {
      // Everything so far reached the coordinator verbatim, so the reporting
      // baseline is the exact local count. Keeps C.m_x an underestimate.
      auto& s = sites_[j];
      s.last_reported.clear();
      for (const auto& [v, c] : s.local_mx) s.last_reported[v] = c;
      s.local_mx.clear();
    }
  }
  ch_.ledger().snapshot_round(round_id_++);
}

void HHTracker::coord_item_signal(Value x, int64_t v) {
  c_mx_[x] += v;
  reclassify(x);
}

void HHTracker::coord_all_signal(int64_t v) {
  c_m_ += v;
  prune_reported();
  if (++allsig_count_ >= cfg_.k) resync();
}

void HHTracker::resync() {
  // Poll exact local totals, set C.m = m, broadcast it; sites reset their
  // total-count increment (per-item increments are kept).
  int64_t m = 0;
  for (int j = 0; j < cfg_.k; ++j) m += sites_[j].local_n;
  ch_.poll(1, [](int) { return 1; });
  c_m_ = m;
  ch_.broadcast(MsgKind::broadcast_state, 1);
  for (auto& s : sites_) {
    s.s_m = m;
    s.d_m = 0;
  }
  allsig_count_ = 0;
  resync_epoch_++;
  prune_reported();
  ch_.ledger().snapshot_round(round_id_++);
}

bool HHTracker::is_heavy(Value x) const {
  if (c_m_ <= 0) return false;
  auto it = c_mx_.find(x);
  if (it == c_mx_.end()) return false;
  // 2 * C.m_x * phi.den * eps.den >= C.m * (2 phi.num eps.den - eps.num phi.den)
  __int128 lhs = i128(2) * it->second * cfg_.phi.den * cfg_.eps.den;
  __int128 rhs = i128(c_m_) * (i128(2) * cfg_.phi.num * cfg_.eps.den - i128(cfg_.eps.num) * cfg_.phi.den);
  return lhs >= rhs;
}

void HHTracker::reclassify(Value x) {
  if (is_heavy(x)) reported_.insert(x);
  else reported_.erase(x);
}

void HHTracker::prune_reported() {
  for (auto it = reported_.begin(); it != reported_.end();) {
    if (!is_heavy(*it)) it = reported_.erase(it);
    else ++it;
  }
}

int64_t HHTracker::remaining_to_trigger(int j, Value x) const {
  if (warmup_) return 1;
  const Site& s = sites_[j];
  int64_t t = threshold(j);
  int64_t dm = s.d_m;
  int64_t dx = 0;
  if (cfg_.mode == TrackerMode::exact) {
    auto it = s.d_mx.find(x);
    if (it != s.d_mx.end()) dx = it->second;
  } else {
    auto est = s.ss->estimate(x);
    auto it = s.last_reported.find(x);
    int64_t reported = it == s.last_reported.end() ? 0 : it->second;
    dx = est.lower - reported;
    if (dx < 0) dx = 0;
  }
  int64_t worst = std::max(dm, dx);
  int64_t rem = t - worst;
  return rem < 1 ? 1 : rem;
}

}  // namespace dst
