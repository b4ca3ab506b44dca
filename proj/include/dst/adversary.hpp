#pragma once

#include <functional>

#include "dst/core.hpp"

namespace dst {

// Round construction that flips two groups of l items between frequency
// phi*m_i and (phi - eps')*m_i with eps' = 2*eps, forcing Omega(log n)
// heavy-hitter set changes. Valid only when l = 1/(2*phi - eps') is a
// positive integer.
struct HHLowerBoundPlan {
  Rat phi;
  Rat eps;
  Rat eps2;        // eps' = 2 eps
  int64_t l = 0;   // group size
  Rat beta;        // per-round copies factor
  Rat growth;      // m_{i+1} / m_i = phi / (phi - eps')
  int64_t m0 = 0;  // initial multiset size
  Value first_item = 1;

  static HHLowerBoundPlan make(const Rat& phi, const Rat& eps, int64_t min_m0 = 0);
};

struct RoundMark {
  int64_t round = 0;
  int64_t start_seq = 0;  // first arrival seq of the round (1-based)
  int64_t m_start = 0;    // multiset size when the round starts
};

struct GeneratedStream {
  std::vector<Value> items;
  std::vector<RoundMark> rounds;
  // For the heavy-hitter plan: [start,end) arrival index windows during
  // which one designated item transitions to heavy, with the item.
  struct Window {
    int64_t begin = 0, end = 0;  // 0-based index into items
    Value item = 0;
    int64_t round = 0;
  };
  std::vector<Window> windows;
};

// Emits the initial frequency-exact block, then rounds of ceil(beta*m_i)
// copies of each item of the inactive group, until at least n items.
GeneratedStream gen_hh_lb_stream(const HHLowerBoundPlan& plan, int64_t n);

// Binary-universe median flip-flop: round i inserts ceil(4eps/(1/2-2eps)*m_i)
// copies of item (i mod 2), swapping the majority every round. Items are
// encoded as values 1 and 2.
GeneratedStream gen_median_lb_stream(const Rat& eps, int64_t n);

// White-box adversary. `remaining(j)` must return how many further copies of
// the designated item site j absorbs before it communicates; the attack
// routes each transition window in bursts at the momentarily cheapest site.
class WhiteboxPlacer {
 public:
  using RemainingFn = std::function<int64_t(int site, Value item)>;

  WhiteboxPlacer(int k, RemainingFn remaining) : k_(k), remaining_(std::move(remaining)) {}

  // Chooses the site for the next copy of `item` inside a transition window
  // of `total` copies. Sticky per-burst: picks argmin remaining among sites
  // not yet used in this window while the unused pool lasts.
  int place(Value item, int64_t total);
  void window_reset();

 private:
  int k_;
  RemainingFn remaining_;
  Value cur_item_ = 0;
  int burst_site_ = -1;
  int64_t burst_left_ = 0;
  int64_t burst_size_ = 0;
  std::vector<int> used_;
};

// Checks the reporting inequality sum_j (n_j - 1) < bound that every correct
// deterministic tracker must maintain mid-transition.
bool thresholds_admit_missed_change(const std::vector<int64_t>& remaining, int64_t bound);

}  // namespace dst
