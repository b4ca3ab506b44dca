#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dst {

// Items live in U = {1,...,u}. For quantile order statistics every arrival is
// made distinct by appending its arrival index: key = (value, seq), compared
// lexicographically. Keys pack into 64 bits, so ordering is integer ordering.
using Value = uint32_t;
using Key = uint64_t;

inline constexpr int kSeqBits = 39;
inline constexpr uint64_t kSeqMask = (uint64_t(1) << kSeqBits) - 1;
inline constexpr uint64_t kMaxUniverse = (uint64_t(1) << 23) - 1;

inline Key make_key(Value value, uint64_t seq) {
  return (uint64_t(value) << kSeqBits) | seq;
}
inline Value key_value(Key k) { return Value(k >> kSeqBits); }
inline uint64_t key_seq(Key k) { return k & kSeqMask; }

// Sentinels bracketing every real key: value 0 below, value u+1 above.
inline constexpr Key kKeyLow = 0;
inline Key key_high(Value u) { return make_key(u + 1, 0); }

struct ArrivalEvent {
  uint64_t seq = 0;  // strictly increasing arrival index, 1-based
  int site = 0;      // 0-based site id
  Value item = 0;
};

// Exact rational, used for eps/phi so every threshold comparison is
// deterministic integer arithmetic.
struct Rat {
  int64_t num = 0;
  int64_t den = 1;

  Rat() = default;
  Rat(int64_t n, int64_t d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) { num = -num; den = -den; }
    int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) { num /= g; den /= g; }
  }

  double to_double() const { return double(num) / double(den); }
  bool is_zero() const { return num == 0; }

  Rat operator*(const Rat& o) const { return Rat(num * o.num, den * o.den); }
  Rat operator+(const Rat& o) const { return Rat(num * o.den + o.num * den, den * o.den); }
  Rat operator-(const Rat& o) const { return Rat(num * o.den - o.num * den, den * o.den); }
  bool operator==(const Rat& o) const { return num == o.num && den == o.den; }
};

// Parses a plain decimal like "0.05" or "3/40" exactly.
Rat parse_rat(const std::string& s);

inline __int128 i128(int64_t x) { return __int128(x); }

// ceil(r * x) for x >= 0.
inline int64_t ceil_mul(const Rat& r, int64_t x) {
  __int128 p = i128(r.num) * x;
  __int128 q = i128(r.den);
  return int64_t((p + q - 1) / q);
}
// floor(r * x) for x >= 0.
inline int64_t floor_mul(const Rat& r, int64_t x) {
  return int64_t((i128(r.num) * x) / r.den);
}
// sign of (a - r*x)
inline int cmp_int_ratmul(int64_t a, const Rat& r, int64_t x) {
  __int128 lhs = i128(a) * r.den;
  __int128 rhs = i128(r.num) * x;
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}
inline bool int_ge_ratmul(int64_t a, const Rat& r, int64_t x) { return cmp_int_ratmul(a, r, x) >= 0; }
inline bool int_le_ratmul(int64_t a, const Rat& r, int64_t x) { return cmp_int_ratmul(a, r, x) <= 0; }

// ---------------------------------------------------------------------------
// Communication accounting.
//
// One word = one integer payload field. An item key counts as one word even
// though it carries the tie-breaking arrival index. A broadcast is recorded as
// k directed coordinator->site messages. A poll is k one-word requests plus
// k replies of whatever size the replies are.
// ---------------------------------------------------------------------------

enum class MsgKind : int {
  warmup_forward = 0,
  all_signal,
  item_signal,
  drift_update,
  interval_update,
  poll_request,
  poll_reply,
  broadcast_state,
  probe_request,
  probe_reply,
  kCount,
};
inline constexpr int kMsgKinds = int(MsgKind::kCount);
const char* msg_kind_name(MsgKind k);

enum class Direction { site_to_coord, coord_to_site, broadcast };

struct Message {
  Direction dir = Direction::site_to_coord;
  MsgKind kind = MsgKind::all_signal;
  int64_t words = 1;
};

struct LedgerCounts {
  int64_t messages = 0;
  int64_t words = 0;
  bool operator==(const LedgerCounts&) const = default;
};

class CostLedger {
 public:
  explicit CostLedger(int k = 1) : k_(k) {}

  void record(const Message& m) {
    if (m.words < 1) throw std::invalid_argument("message with zero payload");
    int64_t copies = (m.dir == Direction::broadcast) ? k_ : 1;
    auto& c = by_kind_[int(m.kind)];
    c.messages += copies;
    c.words += copies * m.words;
    total_.messages += copies;
    total_.words += copies * m.words;
  }

  // Stores the cumulative counts under a strictly increasing round id.
  void snapshot_round(int64_t round) {
    if (!snaps_.empty() && round <= snaps_.back().round)
      throw std::invalid_argument("snapshot round ids must increase");
    snaps_.push_back({round, total_, by_kind_});
  }

  const LedgerCounts& total() const { return total_; }
  const LedgerCounts& by_kind(MsgKind k) const { return by_kind_[int(k)]; }
  LedgerCounts sum_over_kinds() const {
    LedgerCounts s;
    for (auto& c : by_kind_) { s.messages += c.messages; s.words += c.words; }
    return s;
  }

  struct Snapshot {
    int64_t round;
    LedgerCounts total;
    std::array<LedgerCounts, kMsgKinds> by_kind;
  };
  const std::vector<Snapshot>& snapshots() const { return snaps_; }

  // Messages between snapshot i-1 and i (i=0: since ledger creation).
  LedgerCounts round_delta(size_t i) const {
    if (i >= snaps_.size()) throw std::out_of_range("no such snapshot");
    LedgerCounts prev = i == 0 ? LedgerCounts{} : snaps_[i - 1].total;
    return {snaps_[i].total.messages - prev.messages, snaps_[i].total.words - prev.words};
  }

  int k() const { return k_; }
  bool operator==(const CostLedger& o) const {
    return k_ == o.k_ && total_ == o.total_ && by_kind_ == o.by_kind_ &&
           snaps_size_equal(o);
  }

 private:
  bool snaps_size_equal(const CostLedger& o) const {
    if (snaps_.size() != o.snaps_.size()) return false;
    for (size_t i = 0; i < snaps_.size(); ++i) {
      if (snaps_[i].round != o.snaps_[i].round || !(snaps_[i].total == o.snaps_[i].total) ||
          snaps_[i].by_kind != o.snaps_[i].by_kind)
        return false;
    }
    return true;
  }

  int k_;
  LedgerCounts total_;
  std::array<LedgerCounts, kMsgKinds> by_kind_{};
  std::vector<Snapshot> snaps_;
};

// The star network: k sites, one coordinator, instant channels. Trackers call
// these helpers so every episode lands in the ledger with the right shape.
class Channel {
 public:
  Channel(int k) : k_(k), ledger_(k), site_msgs_(k, 0) {}

  void site_to_coord(int site, MsgKind kind, int64_t words) {
    ledger_.record({Direction::site_to_coord, kind, words});
    site_msgs_[site]++;
  }
  void coord_to_site(MsgKind kind, int64_t words) {
    ledger_.record({Direction::coord_to_site, kind, words});
  }
  void broadcast(MsgKind kind, int64_t words) {
    ledger_.record({Direction::broadcast, kind, words});
  }
  // k requests of `req_words` + k replies sized by the caller.
  template <typename ReplyWords>
  void poll(int64_t req_words, ReplyWords&& reply_words_for_site,
            MsgKind req = MsgKind::poll_request, MsgKind rep = MsgKind::poll_reply) {
    for (int j = 0; j < k_; ++j) ledger_.record({Direction::coord_to_site, req, req_words});
    for (int j = 0; j < k_; ++j) {
      int64_t w = reply_words_for_site(j);
      site_to_coord(j, rep, std::max<int64_t>(1, w));
    }
  }

  CostLedger& ledger() { return ledger_; }
  const CostLedger& ledger() const { return ledger_; }
  int k() const { return k_; }
  const std::vector<int64_t>& per_site_messages() const { return site_msgs_; }

 private:
  int k_;
  CostLedger ledger_;
  std::vector<int64_t> site_msgs_;
};

// ---------------------------------------------------------------------------
// Configuration shared by the trackers.
// ---------------------------------------------------------------------------

enum class TrackerMode { exact, sketch };

struct TrackerConfig {
  int k = 2;
  Rat eps{1, 10};
  Rat phi{1, 2};
  Value u = 1 << 20;
  TrackerMode mode = TrackerMode::exact;
  // 0 = default policy (k/eps items for the heavy-hitter tracker,
  // max(256,32k)/eps for the quantile trackers); otherwise a floor on the
  // number of verbatim-forwarded items before the protocol starts.
  int64_t warmup_items = 0;

  void validate_common() const {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (eps.num <= 0 || cmp_int_ratmul(1, eps, 1) <= 0)
      throw std::invalid_argument("eps must be in (0,1)");
    if (phi.num < 0 || cmp_int_ratmul(1, phi, 1) < 0)
      throw std::invalid_argument("phi must be in [0,1]");
    if (u < 2 || u > kMaxUniverse) throw std::invalid_argument("universe size out of range");
  }

  // Protocol error parameter: in sketch mode the protocol runs at 3eps/4 and
  // the per-site summaries absorb the remaining quarter.
  Rat protocol_eps() const {
    return mode == TrackerMode::sketch ? eps * Rat(3, 4) : eps;
  }
};

// ---------------------------------------------------------------------------
// Order-statistics containers.
// ---------------------------------------------------------------------------

template <typename T>
class Fenwick {
 public:
  explicit Fenwick(size_t n = 0) : n_(n), tree_(n + 1, 0) {}
  void resize(size_t n) { n_ = n; tree_.assign(n + 1, 0); }
  void add(size_t i, T delta) {  // 1-based index
    for (; i <= n_; i += i & (~i + 1)) tree_[i] += delta;
  }
  T prefix(size_t i) const {  // sum of [1..i]
    if (i > n_) i = n_;
    T s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }
  // Smallest index v with prefix(v) > r (r 0-based); n_+1 if none.
  size_t select(T r) const {
    size_t pos = 0;
    size_t pw = 1;
    while ((pw << 1) <= n_) pw <<= 1;
    for (; pw > 0; pw >>= 1) {
      if (pos + pw <= n_ && tree_[pos + pw] <= r) {
        pos += pw;
        r -= tree_[pos];
      }
    }
    return pos + 1;
  }
  size_t size() const { return n_; }

 private:
  size_t n_;
  std::vector<T> tree_;
};

// Multiset of keys over universe [1,u] with exact rank/select/range counts.
// Per-value arrival indexes stay sorted because global seq is increasing.
class OrderedMultiset {
 public:
  explicit OrderedMultiset(Value u = 0) : u_(u), by_value_(u + 1) {}

  void reset(Value u) {
    u_ = u;
    by_value_.resize(u + 1);
    seqs_.clear();
    n_ = 0;
  }

  void insert(Key k) {
    Value v = key_value(k);
    if (v < 1 || v > u_) throw std::invalid_argument("item outside universe");
    by_value_.add(v, 1);
    seqs_[v].push_back(key_seq(k));
    ++n_;
  }

  int64_t size() const { return n_; }
  Value universe() const { return u_; }

  int64_t count_value(Value v) const {
    auto it = seqs_.find(v);
    return it == seqs_.end() ? 0 : int64_t(it->second.size());
  }

  // Number of keys strictly below k.
  int64_t rank(Key k) const {
    Value v = key_value(k);
    if (v < 1) return 0;
    if (v > u_) return n_;
    int64_t below = by_value_.prefix(v - 1);
    auto it = seqs_.find(v);
    if (it != seqs_.end()) {
      uint64_t s = key_seq(k);
      below += std::lower_bound(it->second.begin(), it->second.end(), s) - it->second.begin();
    }
    return below;
  }

  bool contains(Key k) const {
    auto it = seqs_.find(key_value(k));
    if (it == seqs_.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), key_seq(k));
  }

  // r-th smallest key, 0-based.
  Key select(int64_t r) const {
    if (r < 0 || r >= n_) throw std::out_of_range("select out of range");
    size_t v = by_value_.select(int32_t(r));
    int64_t before = by_value_.prefix(v - 1);
    const auto& vec = seqs_.at(Value(v));
    return make_key(Value(v), vec[size_t(r - before)]);
  }

  // Count of keys in (lo, hi].
  int64_t count_range(Key lo, Key hi) const {
    return rank(hi + 1) - rank(lo + 1);
  }

  template <typename F>
  void for_each_value(F&& f) const {
    for (const auto& [v, vec] : seqs_) f(v, int64_t(vec.size()));
  }

  // Keys at local ranks spacing-1, 2*spacing-1, ... within (lo, hi].
  std::vector<Key> spaced_keys(Key lo, Key hi, int64_t spacing) const {
    std::vector<Key> out;
    int64_t base = rank(lo + 1);
    int64_t cnt = rank(hi + 1) - base;
    for (int64_t r = spacing - 1; r < cnt; r += spacing) out.push_back(select(base + r));
    return out;
  }

 private:
  Value u_;
  Fenwick<int32_t> by_value_;
  std::unordered_map<Value, std::vector<uint64_t>> seqs_;
  int64_t n_ = 0;
};

}  // namespace dst
