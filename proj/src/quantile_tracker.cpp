#include "dst/quantile_tracker.hpp"

#include <algorithm>

namespace dst {

namespace {
// ceil(r.num * x / (r.den * div))
int64_t ceil_scaled(const Rat& r, int64_t x, int64_t div) {
  __int128 num = i128(r.num) * x;
  __int128 den = i128(r.den) * div;
  int64_t v = int64_t((num + den - 1) / den);
  return v;
}
int64_t floor_scaled(const Rat& r, int64_t x, int64_t div) {
  return int64_t((i128(r.num) * x) / (i128(r.den) * div));
}
}  // namespace

QuantileTracker::QuantileTracker(const TrackerConfig& cfg, Channel& ch)
    : cfg_(cfg), eps_p_(cfg.protocol_eps()), ch_(ch), warm_store_(cfg.u) {
  cfg_.validate_common();
  Rat sketch_eps = cfg_.eps * Rat(1, 32);
  sites_.reserve(cfg_.k);
  for (int j = 0; j < cfg_.k; ++j) sites_.emplace_back(cfg_.mode, cfg_.u, sketch_eps);
  // The interval machinery needs eps*m >= max(256, 32k) for its integer
  // margins; below that every arrival is forwarded verbatim.
  int64_t w = std::max<int64_t>(256, 32 * cfg_.k);
  warmup_target_ = int64_t((i128(w) * eps_p_.den + eps_p_.num - 1) / eps_p_.num);
  if (cfg_.warmup_items > warmup_target_) warmup_target_ = cfg_.warmup_items;
}

size_t QuantileTracker::interval_of(Key k) const {
  return size_t(std::lower_bound(boundaries_.begin(), boundaries_.end(), k) - boundaries_.begin());
}

int64_t QuantileTracker::exact_rank_nosend(Key y) const {
  int64_t r = 0;
  for (const auto& s : sites_) r += s.store.rank(y);
  return r;
}

int64_t QuantileTracker::poll_exact_rank(Key y) {
  for (int j = 0; j < cfg_.k; ++j) ch_.coord_to_site(MsgKind::probe_request, 1);
  int64_t r = 0;
  for (int j = 0; j < cfg_.k; ++j) {
    r += sites_[j].store.rank(y);
    ch_.site_to_coord(j, MsgKind::probe_reply, 1);
  }
  return r;
}

void QuantileTracker::on_arrival(const ArrivalEvent& ev) {
  Key key = make_key(ev.item, ev.seq);
  Site& s = sites_[ev.site];
  s.store.insert(key);

  if (warmup_) {
    ch_.site_to_coord(ev.site, MsgKind::warmup_forward, 1);
    warm_store_.insert(key);
    if (warm_store_.size() >= warmup_target_) init_round();
    return;
  }

  bool want_reloc = false;
  bool want_round = false;

  if (key < m_key_) {
    if (++s.pend_l >= t_dr_) {
      s.pend_l = 0;
      ch_.site_to_coord(ev.site, MsgKind::drift_update, 2);
      drift_updates_this_round_++;
      dl_ += t_dr_;
      want_reloc = drift_trigger();
    }
  } else {
    if (++s.pend_r >= t_dr_) {
      s.pend_r = 0;
      ch_.site_to_coord(ev.site, MsgKind::drift_update, 2);
      drift_updates_this_round_++;
      dr_ += t_dr_;
      want_reloc = drift_trigger();
    }
  }

  size_t idx = interval_of(key);
  if (++s.pend_iv[idx] >= t_iv_) {
    s.pend_iv[idx] = 0;
    ch_.site_to_coord(ev.site, MsgKind::interval_update, 2);
    iv_updates_this_round_++;
    est_[idx] += t_iv_;
  }

  if (++s.pend_n >= t_cnt_) {
    s.pend_n = 0;
    ch_.site_to_coord(ev.site, MsgKind::all_signal, 1);
    cnt_n_ += t_cnt_;
    if (cnt_n_ >= 2 * m0_) want_round = true;
  }

  if (want_round) {
    init_round();
    return;
  }
  if (want_reloc && drift_trigger()) relocate();
  for (size_t i = 0; i < est_.size();) {
    if (est_[i] >= t_split_) {
      split(i);
      // recheck from the same position: a fresh child can sit at the trigger
    } else {
      ++i;
    }
  }
}

bool QuantileTracker::drift_trigger() const {
  __int128 w = i128(cfg_.phi.den - cfg_.phi.num) * dl_ - i128(cfg_.phi.num) * dr_;
  if (w < 0) w = -w;
  return 2 * w >= i128(cfg_.phi.den) * t_half_;
}

void QuantileTracker::init_round() {
  warmup_ = false;
  // Sizes.
  int64_t n = 0;
  for (auto& s : sites_) n += s.store.size();
  ch_.poll(1, [](int) { return 1; });
  m0_ = n;
  cnt_n_ = n;
  int64_t k = cfg_.k;
  t_dr_ = std::max<int64_t>(1, ceil_scaled(eps_p_, m0_, 8 * k));
  t_iv_ = t_dr_;
  t_cnt_ = t_dr_;
  t_half_ = ceil_scaled(eps_p_, m0_, 2);
  t_split_ = ceil_scaled(eps_p_, 3 * m0_, 8);

  // Announce the round; sites derive the summary spacing from m0.
  ch_.broadcast(MsgKind::broadcast_state, 1);
  int64_t spacing = std::max<int64_t>(1, floor_scaled(eps_p_, n, 64 * k));
  std::vector<Key> pool;
  for (int j = 0; j < k; ++j) {
    auto keys = sites_[j].store.spaced_keys(kKeyLow, key_high(cfg_.u), spacing);
    ch_.site_to_coord(j, MsgKind::poll_reply, std::max<size_t>(size_t(1), keys.size()));
    pool.insert(pool.end(), keys.begin(), keys.end());
  }
  std::sort(pool.begin(), pool.end());
  if (pool.empty()) throw std::logic_error("round init with no shipped separators");

  // est(pool[i]) = (i+1)*spacing - 1 underestimates the global rank by less
  // than k*spacing: boundaries cut at uniform targets land in [eps m/8, m/4].
  auto nearest = [&](int64_t target) -> size_t {
    int64_t want = (target + 1) / spacing;  // index with est closest to target
    int64_t lo = want - 2 > 0 ? want - 2 : 0;
    size_t best = size_t(lo);
    int64_t bestd = -1;
    for (int64_t i = lo; i <= want + 2 && i < int64_t(pool.size()); ++i) {
      int64_t est = (i + 1) * spacing - 1;
      int64_t d = est > target ? est - target : target - est;
      if (bestd < 0 || d < bestd) { bestd = d; best = size_t(i); }
    }
    return best;
  };

  int64_t ni = std::max<int64_t>(2, (16 * eps_p_.den + 3 * eps_p_.num - 1) / (3 * eps_p_.num));
  if (ni > n) ni = std::max<int64_t>(2, n / 2);
  boundaries_.clear();
  int64_t prev_idx = -1;
  for (int64_t i = 1; i < ni; ++i) {
    int64_t target = i * n / ni;
    int64_t idx = int64_t(nearest(target));
    if (idx <= prev_idx) idx = prev_idx + 1;
    if (idx >= int64_t(pool.size())) break;
    boundaries_.push_back(pool[size_t(idx)]);
    prev_idx = idx;
  }

  int64_t target_m = floor_mul(cfg_.phi, n);
  if (target_m > n - 1) target_m = n - 1;
  m_key_ = pool[nearest(target_m)];

  ch_.broadcast(MsgKind::broadcast_state, int64_t(boundaries_.size()) + 1);

  size_t cnt_iv = boundaries_.size() + 1;
  est_.assign(cnt_iv, 0);
  for (int j = 0; j < k; ++j) {
    sites_[j].pend_iv.assign(cnt_iv, 0);
    sites_[j].pend_l = sites_[j].pend_r = sites_[j].pend_n = 0;
  }
  ch_.poll(1, [&](int) { return int64_t(cnt_iv); });
  for (int j = 0; j < k; ++j) {
    int64_t prev = 0;
    for (size_t i = 0; i < cnt_iv; ++i) {
      int64_t r = i + 1 == cnt_iv ? sites_[j].store.size()
                                  : sites_[j].store.rank(boundaries_[i] + 1);
      est_[i] += r - prev;
      prev = r;
    }
  }

  dl_ = dr_ = 0;
  relocs_this_round_ = 0;
  splits_this_round_ = 0;
  drift_updates_this_round_ = 0;
  iv_updates_this_round_ = 0;
  round_epoch_++;
  reloc_epoch_++;  // drift baselines restart with the round
  ch_.ledger().snapshot_round(round_id_++);
}

void QuantileTracker::relocate() {
  // Step 1: exact totals on each side of the tracked item.
  int64_t left = 0, n = 0;
  ch_.poll(1, [](int) { return 2; });
  for (auto& s : sites_) {
    left += s.store.rank(m_key_);
    n += s.store.size();
  }

  // |rank - phi*n| <= eps*m0/4 ?
  auto within_tol = [&](int64_t r) {
    __int128 diff = i128(r) * cfg_.phi.den - i128(cfg_.phi.num) * n;
    if (diff < 0) diff = -diff;
    return diff * 4 * eps_p_.den <= i128(eps_p_.num) * m0_ * cfg_.phi.den;
  };

  if (!within_tol(left)) {
    bool move_left = i128(left) * cfg_.phi.den > i128(cfg_.phi.num) * n;
    Key best_key = m_key_;
    __int128 best_dist = i128(left) * cfg_.phi.den - i128(cfg_.phi.num) * n;
    if (best_dist < 0) best_dist = -best_dist;
    size_t at = interval_of(m_key_);
    int probes = 0;
    if (move_left) {
      for (size_t i = at; i > 0 && probes < 24; --i, ++probes) {
        Key y = boundaries_[i - 1];
        if (y >= m_key_) continue;
        int64_t r = poll_exact_rank(y);
        __int128 d = i128(r) * cfg_.phi.den - i128(cfg_.phi.num) * n;
        if (d < 0) d = -d;
        if (d < best_dist) { best_dist = d; best_key = y; }
        if (within_tol(r)) break;
      }
    } else {
      for (size_t i = at; i < boundaries_.size() && probes < 24; ++i, ++probes) {
        Key y = boundaries_[i];
        if (y <= m_key_) continue;
        int64_t r = poll_exact_rank(y);
        __int128 d = i128(r) * cfg_.phi.den - i128(cfg_.phi.num) * n;
        if (d < 0) d = -d;
        if (d < best_dist) { best_dist = d; best_key = y; }
        if (within_tol(r)) break;
      }
    }
    m_key_ = best_key;
  }

  // Step 3: reset drift state everywhere in the same episode.
  ch_.broadcast(MsgKind::broadcast_state, 1);
  for (auto& s : sites_) s.pend_l = s.pend_r = 0;
  dl_ = dr_ = 0;
  reloc_epoch_++;
  relocs_this_round_++;
}

void QuantileTracker::split(size_t idx) {
  Key lo = interval_lo(idx), hi = interval_hi(idx);
  int64_t k = cfg_.k;
  int64_t spacing = std::max<int64_t>(1, floor_scaled(eps_p_, m0_, 16 * k));

  for (int j = 0; j < k; ++j) ch_.coord_to_site(MsgKind::probe_request, 2);
  std::vector<Key> pool;
  int64_t n_iv = 0;
  for (int j = 0; j < k; ++j) {
    auto keys = sites_[j].store.spaced_keys(lo, hi, spacing);
    n_iv += sites_[j].store.count_range(lo, hi);
    ch_.site_to_coord(j, MsgKind::probe_reply, int64_t(keys.size()) + 1);
    pool.insert(pool.end(), keys.begin(), keys.end());
  }
  std::sort(pool.begin(), pool.end());
  if (pool.empty()) throw std::logic_error("interval split found no candidate separators");

  int64_t target = n_iv / 2;
  // start at the candidate whose one-sided estimate is nearest the half point
  size_t start = 0;
  int64_t bestd = -1;
  for (size_t i = 0; i < pool.size(); ++i) {
    int64_t est = int64_t(i + 1) * spacing - 1;
    int64_t d = est > target ? est - target : target - est;
    if (bestd < 0 || d < bestd) { bestd = d; start = i; }
  }

  auto child_ok = [&](int64_t c) {
    return i128(c) * 8 * eps_p_.den >= i128(eps_p_.num) * m0_;
  };

  Key chosen = 0;
  int64_t chosen_left = -1;
  int64_t best_min = -1;
  Key best_key = 0;
  int64_t best_left = 0;
  for (int step = 0; step < 16; ++step) {
    // expanding walk: start, start+1, start-1, start+2, ...
    int64_t off = (step + 1) / 2;
    if (step % 2 == 1) off = -off;
    int64_t i = int64_t(start) + off;
    if (i < 0 || i >= int64_t(pool.size())) continue;
    Key y = pool[size_t(i)];
    for (int j = 0; j < k; ++j) ch_.coord_to_site(MsgKind::probe_request, 1);
    int64_t cl = 0;
    for (int j = 0; j < k; ++j) {
      cl += sites_[j].store.count_range(lo, y);
      ch_.site_to_coord(j, MsgKind::probe_reply, 1);
    }
    int64_t mn = std::min(cl, n_iv - cl);
    if (mn > best_min) { best_min = mn; best_key = y; best_left = cl; }
    if (child_ok(cl) && child_ok(n_iv - cl)) {
      chosen = y;
      chosen_left = cl;
      break;
    }
  }
  if (chosen_left < 0) {
    if (cfg_.mode == TrackerMode::exact)
      throw std::logic_error("no admissible split separator; interval maintenance broken");
    chosen = best_key;
    chosen_left = best_left;
  }

  boundaries_.insert(boundaries_.begin() + idx, chosen);
  est_[idx] = n_iv - chosen_left;
  est_.insert(est_.begin() + idx, chosen_left);
  ch_.broadcast(MsgKind::broadcast_state, 2);
  for (auto& s : sites_) {
    s.pend_iv.insert(s.pend_iv.begin() + idx, 0);
    s.pend_iv[idx] = 0;
    s.pend_iv[idx + 1] = 0;
  }
  splits_this_round_++;
}

Key QuantileTracker::query() const {
  if (warmup_) {
    int64_t n = warm_store_.size();
    if (n == 0) throw std::logic_error("query before any arrivals");
    int64_t r = floor_mul(cfg_.phi, n);
    if (r > n - 1) r = n - 1;
    return warm_store_.select(r);
  }
  return m_key_;
}

std::vector<QuantileTracker::IntervalInfo> QuantileTracker::intervals() const {
  std::vector<IntervalInfo> out;
  for (size_t i = 0; i < est_.size(); ++i) out.push_back({interval_lo(i), interval_hi(i), est_[i]});
  return out;
}

}  // namespace dst
