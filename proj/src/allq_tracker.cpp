#include "dst/allq_tracker.hpp"

#include <algorithm>

namespace dst {

namespace {
int64_t ceil_scaled(const Rat& r, int64_t x, int64_t div) {
  __int128 num = i128(r.num) * x;
  __int128 den = i128(r.den) * div;
  return int64_t((num + den - 1) / den);
}
int64_t floor_scaled(const Rat& r, int64_t x, int64_t div) {
  return int64_t((i128(r.num) * x) / (i128(r.den) * div));
}
}  // namespace

AllQTracker::AllQTracker(const TrackerConfig& cfg, Channel& ch)
    : cfg_(cfg), eps_p_(cfg.protocol_eps()), ch_(ch), warm_store_(cfg.u) {
  cfg_.validate_common();
  if (4 * eps_p_.num > eps_p_.den)
    throw std::invalid_argument("all-quantiles tracking supports eps <= 1/4");
  // Height bound: smallest h with (8/5)^h >= 2/eps.
  __int128 p8 = 1, p5 = 1;
  int h = 0;
  while (h < 48) {
    ++h;
    p8 *= 8;
    p5 *= 5;
    if (p8 * eps_p_.num >= 2 * p5 * eps_p_.den) break;
  }
  if (h >= 48) throw std::invalid_argument("eps too small for the tree height computation");
  h_ = h;
  theta_ = Rat(eps_p_.num, eps_p_.den * 2 * h_);

  int64_t w = std::max<int64_t>(256, 32 * cfg_.k);
  warmup_target_ = int64_t((i128(w) * eps_p_.den + eps_p_.num - 1) / eps_p_.num);
  if (cfg_.warmup_items > warmup_target_) warmup_target_ = cfg_.warmup_items;

  Rat sketch_eps = theta_ * Rat(1, 4);
  sites_.reserve(cfg_.k);
  for (int j = 0; j < cfg_.k; ++j) sites_.emplace_back(cfg_.mode, cfg_.u, sketch_eps);

  check_config_fits();
}

// Worst-case depth of a rebuild over `content` items: each level keeps at
// most 9/16 of the parent, stopping at the leaf threshold.
int64_t AllQTracker::rebuild_depth_bound(int64_t content) const {
  int64_t c = content;
  int64_t d = 0;
  while (c > t_stop_ && d < 64) {
    c = (c * 9 + 15) / 16;
    ++d;
  }
  return d;
}

void AllQTracker::check_config_fits() const {
  // A full rebuild at maximum round content must fit under h.
  int64_t mref = warmup_target_;
  int64_t t_leaf = floor_scaled(eps_p_, mref * (h_ - 2), 2 * h_);
  int64_t t_stop = t_leaf - floor_scaled(eps_p_, mref, 64) - 1;
  if (t_stop < 2) throw std::invalid_argument("eps/height combination leaves no leaf capacity");
  int64_t c = mref + (mref + 1) / 2 + mref / 8;  // round cap plus count slack
  int64_t d = 0;
  int64_t cur = c;
  while (cur > t_stop && d < 64) {
    cur = (cur * 9 + 15) / 16;
    ++d;
  }
  if (d > h_)
    throw std::invalid_argument(
        "eps rejected: a full rebuild cannot respect the height bound at this eps");
}

int AllQTracker::alloc_node() {
  int id;
  if (!free_ids_.empty()) {
    id = free_ids_.back();
    free_ids_.pop_back();
    nodes_[id] = Node{};
  } else {
    id = int(nodes_.size());
    nodes_.push_back(Node{});
    for (auto& s : sites_) s.pend.push_back(0);
  }
  nodes_[id].alive = true;
  return id;
}

void AllQTracker::free_subtree(int u, std::vector<int>& freed) {
  if (u < 0) return;
  free_subtree(nodes_[u].left, freed);
  free_subtree(nodes_[u].right, freed);
  nodes_[u].alive = false;
  nodes_[u].left = nodes_[u].right = -1;
  freed.push_back(u);
}

void AllQTracker::on_arrival(const ArrivalEvent& ev) {
  Key key = make_key(ev.item, ev.seq);
  Site& s = sites_[ev.site];
  s.store.insert(key);

  if (warmup_) {
    ch_.site_to_coord(ev.site, MsgKind::warmup_forward, 1);
    warm_store_.insert(key);
    if (warm_store_.size() >= warmup_target_) init_round();
    return;
  }

  std::vector<int> touched;
  int cur = root_;
  while (cur >= 0) {
    if (++s.pend[cur] >= t_node_) {
      s.pend[cur] = 0;
      ch_.site_to_coord(ev.site, MsgKind::interval_update, 2);
      nodes_[cur].s += t_node_;
      touched.push_back(cur);
    }
    if (nodes_[cur].leaf()) break;
    cur = key <= nodes_[cur].splitter ? nodes_[cur].left : nodes_[cur].right;
  }

  bool want_round = false;
  if (++s.pend_n >= t_cnt_) {
    s.pend_n = 0;
    ch_.site_to_coord(ev.site, MsgKind::all_signal, 1);
    cnt_n_ += t_cnt_;
    if (cnt_n_ >= m0_ + (m0_ + 1) / 2) want_round = true;
  }

  if (want_round) {
    init_round();
    return;
  }
  if (!touched.empty()) resolve(touched);
}

void AllQTracker::resolve(std::vector<int>& touched) {
  for (int guard = 0; guard < 1 << 16; ++guard) {
    // Balance violations adjacent to recently changed counts, highest first.
    int viol = -1;
    auto consider_pair = [&](int u, int v) {
      if (u < 0 || v < 0 || !nodes_[u].alive || !nodes_[v].alive) return;
      int64_t su = nodes_[u].s, sv = nodes_[v].s;
      bool bad = 4 * sv < su || 4 * sv > 3 * su;
      if (!bad) return;
      if (viol < 0 || nodes_[u].depth < nodes_[viol].depth ||
          (nodes_[u].depth == nodes_[viol].depth && nodes_[u].lo < nodes_[viol].lo))
        viol = u;
    };
    for (int t : touched) {
      if (t < 0 || !nodes_[t].alive) continue;
      consider_pair(nodes_[t].parent, t);
      if (!nodes_[t].leaf()) {
        consider_pair(t, nodes_[t].left);
        consider_pair(t, nodes_[t].right);
      }
    }
    if (viol >= 0) {
      int up = nodes_[viol].parent;
      int fresh = rebuild(viol);
      rebuilds_this_round_++;
      touched.clear();
      touched.push_back(fresh);
      if (up >= 0) touched.push_back(up);
      continue;
    }
    // Leaf splits.
    int split = -1;
    for (int t : touched) {
      if (t < 0 || !nodes_[t].alive || !nodes_[t].leaf()) continue;
      if (nodes_[t].s > t_leaf_ && (split < 0 || nodes_[t].lo < nodes_[split].lo)) split = t;
    }
    if (split >= 0) {
      int at = fit_rebuild_root(split);
      int up = nodes_[at].parent;
      int fresh = rebuild(at);
      leaf_splits_this_round_++;
      touched.clear();
      touched.push_back(fresh);
      if (up >= 0) touched.push_back(up);
      continue;
    }
    return;
  }
  throw std::logic_error("structure maintenance failed to reach quiescence");
}

// Lowest node on the leaf's ancestor path whose rebuild provably stays inside
// the height bound.
int AllQTracker::fit_rebuild_root(int leaf) const {
  int cur = leaf;
  while (cur >= 0) {
    int64_t content_bound = nodes_[cur].s + ceil_mul(theta_, m0_) + t_node_ * cfg_.k;
    if (nodes_[cur].depth + rebuild_depth_bound(content_bound) <= h_) return cur;
    cur = nodes_[cur].parent;
  }
  return root_;
}

int AllQTracker::build_segment(const std::vector<Key>& pool, int64_t spacing, Key lo, Key hi,
                               size_t a, size_t b, int64_t content, int depth, int parent,
                               std::vector<int>& created) {
  int id = alloc_node();
  created.push_back(id);
  Node& nd = nodes_[id];
  nd.lo = lo;
  nd.hi = hi;
  nd.depth = depth;
  nd.parent = parent;
  nd.s = content < 0 ? 0 : content;

  // Usable splitters: keys strictly inside (lo, hi).
  size_t cand_end = b;
  while (cand_end > a && pool[cand_end - 1] >= hi) --cand_end;
  if (content <= t_stop_ || cand_end <= a) {
    if (depth > h_) throw std::logic_error("leaf below the height bound during rebuild");
    return id;
  }
  if (depth >= h_) throw std::logic_error("rebuild would exceed the height bound");

  auto prefix_est = [&](size_t i) -> int64_t {  // est count in (lo_rebuild, pool[i]]
    return int64_t(i + 1) * spacing - 1;
  };
  int64_t base = a == 0 ? 0 : prefix_est(a - 1);
  int64_t target = base + content / 2;
  // pick the candidate with prefix estimate nearest the midpoint
  size_t best = a;
  int64_t bestd = -1;
  size_t guess = size_t(std::max<int64_t>(0, (target + 1) / spacing - 1));
  size_t from = guess > a + 2 ? guess - 2 : a;
  for (size_t i = from; i < cand_end && i <= guess + 2; ++i) {
    int64_t d = prefix_est(i) > target ? prefix_est(i) - target : target - prefix_est(i);
    if (bestd < 0 || d < bestd) { bestd = d; best = i; }
  }
  if (bestd < 0) {  // guess window missed the segment; scan it
    for (size_t i = a; i < cand_end; ++i) {
      int64_t d = prefix_est(i) > target ? prefix_est(i) - target : target - prefix_est(i);
      if (bestd < 0 || d < bestd) { bestd = d; best = i; }
    }
  }

  Key split_key = pool[best];
  int64_t left_content = prefix_est(best) - base;
  if (left_content < 1) left_content = 1;
  if (left_content >= content) left_content = content - 1;

  nd.splitter = split_key;
  int l = build_segment(pool, spacing, lo, split_key, a, best + 1, left_content, depth + 1, id, created);
  int r = build_segment(pool, spacing, split_key, hi, best + 1, b, content - left_content, depth + 1,
                        id, created);
  nodes_[id].left = l;
  nodes_[id].right = r;
  return id;
}

int AllQTracker::rebuild(int u) {
  Key lo = nodes_[u].lo, hi = nodes_[u].hi;
  int parent = nodes_[u].parent;
  int depth = nodes_[u].depth;
  int k = cfg_.k;

  // Ship per-site summaries of the range plus exact counts.
  for (int j = 0; j < k; ++j) ch_.coord_to_site(MsgKind::probe_request, 2);
  std::vector<Key> pool;
  int64_t content = 0;
  for (int j = 0; j < k; ++j) {
    auto keys = sites_[j].store.spaced_keys(lo, hi, s_pool_);
    content += sites_[j].store.count_range(lo, hi);
    ch_.site_to_coord(j, MsgKind::probe_reply, int64_t(keys.size()) + 1);
    pool.insert(pool.end(), keys.begin(), keys.end());
  }
  std::sort(pool.begin(), pool.end());

  bool was_root = u == root_;
  std::vector<int> freed;
  free_subtree(u, freed);
  std::vector<int> created;
  int fresh = build_segment(pool, s_pool_, lo, hi, 0, pool.size(), content, depth, parent, created);
  if (was_root) {
    root_ = fresh;
  } else if (parent >= 0) {
    if (nodes_[parent].left == u) nodes_[parent].left = fresh;
    else nodes_[parent].right = fresh;
  }
  // Propagate the exact root count upward replacement: fresh took u's place.

  // Structure broadcast, then exact counts for every new node.
  ch_.broadcast(MsgKind::broadcast_state, std::max<int64_t>(1, 2 * int64_t(created.size())));
  ch_.poll(1, [&](int) { return int64_t(created.size()); });
  for (int id : created) {
    int64_t s = 0;
    for (int j = 0; j < k; ++j) s += sites_[j].store.count_range(nodes_[id].lo, nodes_[id].hi);
    nodes_[id].s = s;
    for (auto& st : sites_) st.pend[id] = 0;
  }
  structure_epoch_++;
  return fresh;
}

void AllQTracker::init_round() {
  warmup_ = false;
  int64_t n = 0;
  for (auto& s : sites_) n += s.store.size();
  ch_.poll(1, [](int) { return 1; });
  m0_ = n;
  cnt_n_ = n;
  int64_t k = cfg_.k;
  t_node_ = std::max<int64_t>(1, ceil_scaled(theta_, m0_, k));
  t_cnt_ = std::max<int64_t>(1, ceil_scaled(theta_, 2 * m0_, k));
  t_leaf_ = floor_scaled(eps_p_, m0_ * (h_ - 2), 2 * h_);
  t_stop_ = t_leaf_ - floor_scaled(eps_p_, m0_, 64) - 1;
  if (t_stop_ < 1) t_stop_ = 1;
  s_pool_ = std::max<int64_t>(1, floor_scaled(eps_p_, m0_, 128 * k));
  ch_.broadcast(MsgKind::broadcast_state, 1);

  if (root_ < 0) {
    root_ = alloc_node();
    nodes_[root_].lo = kKeyLow;
    nodes_[root_].hi = key_high(cfg_.u);
    nodes_[root_].depth = 0;
  }
  rebuild(root_);
  for (auto& s : sites_) s.pend_n = 0;
  rebuilds_this_round_ = 0;
  leaf_splits_this_round_ = 0;
  round_epoch_++;
  ch_.ledger().snapshot_round(round_id_++);
}

int64_t AllQTracker::rank_estimate(Key k) const {
  if (warmup_) return warm_store_.rank(k);
  int64_t r = 0;
  int cur = root_;
  while (cur >= 0 && !nodes_[cur].leaf()) {
    if (k <= nodes_[cur].splitter) {
      cur = nodes_[cur].left;
    } else {
      r += nodes_[nodes_[cur].left].s;
      cur = nodes_[cur].right;
    }
  }
  return r;
}

Key AllQTracker::quantile(const Rat& phi) const {
  if (phi.num < 0 || cmp_int_ratmul(1, phi, 1) < 0)
    throw std::invalid_argument("phi must be in [0,1]");
  if (warmup_) {
    int64_t n = warm_store_.size();
    if (n == 0) throw std::logic_error("quantile query before any arrivals");
    int64_t r = floor_mul(phi, n);
    if (r > n - 1) r = n - 1;
    return warm_store_.select(r);
  }
  int64_t np = std::max(m0_, cnt_n_);
  int64_t target = floor_mul(phi, np);
  int cur = root_;
  int64_t off = 0;
  while (!nodes_[cur].leaf()) {
    int64_t ls = nodes_[nodes_[cur].left].s;
    if (target <= off + ls) {
      cur = nodes_[cur].left;
    } else {
      off += ls;
      cur = nodes_[cur].right;
    }
  }
  const Node& leaf = nodes_[cur];
  Key lo_b = leaf.lo, hi_b = leaf.hi;
  bool lo_real = lo_b != kKeyLow;
  bool hi_real = hi_b != key_high(cfg_.u);
  if (!lo_real && !hi_real) throw std::logic_error("degenerate single-leaf tree");
  if (!lo_real) return hi_b;
  if (!hi_real) return lo_b;
  int64_t d_lo = target - off;
  if (d_lo < 0) d_lo = -d_lo;
  int64_t d_hi = off + leaf.s - target;
  if (d_hi < 0) d_hi = -d_hi;
  return d_lo <= d_hi ? lo_b : hi_b;
}

std::set<Value> AllQTracker::heavy_hitters(const Rat& phi) const {
  std::set<Value> out;
  if (warmup_) {
    int64_t n = warm_store_.size();
    if (n == 0) return out;
    warm_store_.for_each_value([&](Value v, int64_t c) {
      if (int_ge_ratmul(c, phi - cfg_.eps, n)) out.insert(v);
    });
    return out;
  }
  int64_t np = std::max(m0_, cnt_n_);
  std::set<Value> candidates;
  for (const auto& nd : nodes_) {
    if (nd.alive && !nd.leaf()) candidates.insert(key_value(nd.splitter));
  }
  // report iff est > phi*np - ((h+1)*theta*m0 + t_leaf)
  for (Value v : candidates) {
    int64_t est = rank_estimate(make_key(v + 1, 0)) - rank_estimate(make_key(v, 0));
    __int128 l = i128(est) * phi.den * theta_.den;
    __int128 r = i128(phi.num) * theta_.den * np -
                 i128(phi.den) * theta_.num * m0_ * (h_ + 1) -
                 i128(phi.den) * theta_.den * t_leaf_;
    if (l > r) out.insert(v);
  }
  return out;
}

void AllQTracker::dump_tree(std::ostream& os) const {
  // preorder: depth interval_lo interval_hi splitter s_u
  struct Walk {
    const AllQTracker* t;
    std::ostream& os;
    void go(int u) {
      if (u < 0) return;
      const Node& n = t->nodes_[u];
      os << n.depth << ' ' << n.lo << ' ' << n.hi << ' ' << (n.leaf() ? 0 : n.splitter) << ' '
         << n.s << '\n';
      go(n.left);
      go(n.right);
    }
  } w{this, os};
  w.go(root_);
}

std::vector<AllQTracker::NodeView> AllQTracker::nodes() const {
  std::vector<NodeView> out;
  for (int i = 0; i < int(nodes_.size()); ++i) {
    const Node& n = nodes_[i];
    if (!n.alive) continue;
    out.push_back({n.lo, n.hi, n.splitter, n.depth, n.s, n.leaf(), i, n.left, n.right, n.parent});
  }
  return out;
}

int AllQTracker::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_)
    if (n.alive && n.depth > d) d = n.depth;
  return d;
}

}  // namespace dst
