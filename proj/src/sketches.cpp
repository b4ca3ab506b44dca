#include "dst/sketches.hpp"

#include <algorithm>

namespace dst {

// --------------------------------- Space-Saving ---------------------------

void SpaceSavingSketch::reposition(std::unordered_map<Value, Counter>::iterator it) {
  by_count_.erase(it->second.pos);
  it->second.pos = by_count_.emplace(it->second.count, it->first);
}

void SpaceSavingSketch::insert(Value x) {
  ++n_;
  auto it = counters_.find(x);
  if (it != counters_.end()) {
    it->second.count++;
    reposition(it);
    return;
  }
  if (int64_t(counters_.size()) < cap_) {
    Counter c;
    c.count = 1;
    c.err = 0;
    auto [ins, ok] = counters_.emplace(x, c);
    (void)ok;
    ins->second.pos = by_count_.emplace(1, x);
    return;
  }
  // Evict the minimum; the newcomer inherits its count as error bound.
  auto min_it = by_count_.begin();
  int64_t min_count = min_it->first;
  Value victim = min_it->second;
  by_count_.erase(min_it);
  counters_.erase(victim);
  Counter c;
  c.count = min_count + 1;
  c.err = min_count;
  auto [ins, ok] = counters_.emplace(x, c);
  (void)ok;
  ins->second.pos = by_count_.emplace(c.count, x);
}

SpaceSavingSketch::Estimate SpaceSavingSketch::estimate(Value x) const {
  auto it = counters_.find(x);
  if (it != counters_.end()) return {it->second.count - it->second.err, it->second.count};
  // Not monitored: zero if the sketch never filled, else bounded by the min.
  if (int64_t(counters_.size()) < cap_) return {0, 0};
  return {0, min_count()};
}

int64_t SpaceSavingSketch::sum_counts() const {
  int64_t s = 0;
  for (const auto& [v, c] : counters_) s += c.count;
  return s;
}

// --------------------------------- Greenwald-Khanna -----------------------

void GKSketch::insert(Key k) {
  ++n_;
  auto it = std::lower_bound(tuples_.begin(), tuples_.end(), k,
                             [](const Tuple& t, Key key) { return t.key < key; });
  Tuple t;
  t.key = k;
  t.g = 1;
  if (it == tuples_.begin() || it == tuples_.end()) {
    t.range = 0;
  } else {
    t.range = std::max<int64_t>(0, band_cap() - 1);
  }
  tuples_.insert(it, t);
  if (++since_compress_ >= compress_period_) {
    compress();
    since_compress_ = 0;
  }
}

void GKSketch::compress() {
  if (tuples_.size() < 3) return;
  int64_t cap = band_cap();
  std::vector<Tuple> out;
  out.reserve(tuples_.size());
  out.push_back(tuples_.front());
  // Greedily fold tuples into their successor while the band permits; the
  // first and last tuples are kept so the extremes stay represented.
  int64_t pending_g = 0;
  for (size_t i = 1; i + 1 < tuples_.size(); ++i) {
    const Tuple& cur = tuples_[i];
    const Tuple& nxt = tuples_[i + 1];
    if (pending_g + cur.g + nxt.g + nxt.range <= cap) {
      pending_g += cur.g;
    } else {
      Tuple t = cur;
      t.g += pending_g;
      pending_g = 0;
      out.push_back(t);
    }
  }
  Tuple last = tuples_.back();
  last.g += pending_g;
  out.push_back(last);
  tuples_.swap(out);
}

bool GKSketch::band_ok() const {
  int64_t cap = std::max<int64_t>(1, band_cap());
  for (size_t i = 1; i < tuples_.size(); ++i)
    if (tuples_[i].g + tuples_[i].range > cap) return false;
  return true;
}

int64_t GKSketch::rank(Key k) const {
  if (tuples_.empty() || k <= tuples_.front().key) return 0;
  if (k > tuples_.back().key) return n_;
  int64_t rmin = 0;
  for (size_t i = 0; i + 1 < tuples_.size(); ++i) {
    rmin += tuples_[i].g;
    if (tuples_[i + 1].key >= k) {
      return rmin + (tuples_[i + 1].g + tuples_[i + 1].range) / 2;
    }
  }
  return n_;
}

Key GKSketch::select(int64_t target) const {
  if (tuples_.empty()) throw std::logic_error("select on empty gk sketch");
  // First tuple whose rmax exceeds target + eps*n, answer its predecessor.
  int64_t rmin = 0;
  for (size_t i = 0; i < tuples_.size(); ++i) {
    rmin += tuples_[i].g;
    int64_t rmax = rmin + tuples_[i].range;
    if (cmp_int_ratmul(rmax - target, eps_, n_) > 0) {
      return tuples_[i == 0 ? 0 : i - 1].key;
    }
  }
  return tuples_.back().key;
}

std::vector<Key> GKSketch::spaced_keys(Key lo, Key hi, int64_t spacing) const {
  std::vector<Key> out;
  int64_t base = rank(lo + 1);
  int64_t cnt = rank(hi + 1) - base;
  for (int64_t r = spacing - 1; r < cnt; r += spacing) {
    Key k = select(base + r);
    if (k <= lo || k > hi) continue;
    if (!out.empty() && out.back() >= k) continue;
    out.push_back(k);
  }
  return out;
}

}  // namespace dst
