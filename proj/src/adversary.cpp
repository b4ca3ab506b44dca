#include "dst/adversary.hpp"

#include <numeric>

namespace dst {

HHLowerBoundPlan HHLowerBoundPlan::make(const Rat& phi, const Rat& eps, int64_t min_m0) {
  HHLowerBoundPlan p;
  p.phi = phi;
  p.eps = eps;
  p.eps2 = eps * Rat(2, 1);
  Rat two_phi_minus = phi * Rat(2, 1) - p.eps2;
  if (two_phi_minus.num <= 0)
    throw std::invalid_argument("hh lower-bound plan needs phi > eps");
  if (two_phi_minus.den % two_phi_minus.num != 0)
    throw std::invalid_argument(
        "hh lower-bound plan needs 1/(2*phi - 2*eps) integral; pick phi = (1/l + 2*eps)/2 "
        "for an integer group size l");
  p.l = two_phi_minus.den / two_phi_minus.num;
  Rat denom = phi - p.eps2;
  if (denom.num <= 0) throw std::invalid_argument("hh lower-bound plan needs phi > 2*eps");
  if (cmp_int_ratmul(0, phi - eps * Rat(3, 1), 1) >= 0)
    throw std::invalid_argument("hh lower-bound plan needs phi > 3*eps");
  p.beta = p.eps2 * two_phi_minus * Rat(denom.den, denom.num);
  p.growth = phi * Rat(denom.den, denom.num);
  int64_t base = std::lcm(phi.den, denom.den);
  int64_t scale = min_m0 > 0 ? (min_m0 + base - 1) / base : 1;
  p.m0 = base * scale;
  return p;
}

GeneratedStream gen_hh_lb_stream(const HHLowerBoundPlan& plan, int64_t n) {
  GeneratedStream out;
  out.items.reserve(size_t(n) + size_t(plan.m0));
  int64_t l = plan.l;

  // Initial block: group 0 at phi*m0, group 1 at (phi-eps')*m0.
  int64_t hi = floor_mul(plan.phi, plan.m0);
  int64_t lo = floor_mul(plan.phi - plan.eps2, plan.m0);
  for (int64_t t = 0; t < l; ++t)
    for (int64_t c = 0; c < hi; ++c) out.items.push_back(Value(1 + t));
  for (int64_t t = 0; t < l; ++t)
    for (int64_t c = 0; c < lo; ++c) out.items.push_back(Value(1 + l + t));

  int64_t m = plan.m0;
  int64_t round = 0;
  while (int64_t(out.items.size()) < n) {
    out.rounds.push_back({round, int64_t(out.items.size()) + 1, m});
    int b = int(round % 2);
    // copies of each item of the currently light group, in sequence
    int64_t copies = ceil_mul(plan.beta, m);
    for (int64_t t = 0; t < l; ++t) {
      Value item = Value(1 + (1 - b) * l + t);
      GeneratedStream::Window w;
      w.begin = int64_t(out.items.size());
      w.item = item;
      w.round = round;
      for (int64_t c = 0; c < copies; ++c) out.items.push_back(item);
      w.end = int64_t(out.items.size());
      out.windows.push_back(w);
    }
    m += l * copies;
    ++round;
  }
  return out;
}

GeneratedStream gen_median_lb_stream(const Rat& eps, int64_t n) {
  if (cmp_int_ratmul(1, eps * Rat(8, 1), 1) <= 0)
    throw std::invalid_argument("median lower-bound stream needs eps < 1/8");
  GeneratedStream out;
  Rat half(1, 2);
  Rat lo_f = half - eps * Rat(2, 1);
  Rat hi_f = half + eps * Rat(2, 1);
  Rat rate = (eps * Rat(4, 1)) * Rat(lo_f.den, lo_f.num);  // 4eps / (1/2 - 2eps)

  int64_t base = std::lcm(lo_f.den, hi_f.den);
  int64_t m0 = base;
  while (ceil_mul(rate, m0) < 1) m0 += base;

  // Initial block: item 1 (bit 0) light, item 2 (bit 1) heavy, interleaved.
  int64_t c0 = floor_mul(lo_f, m0);
  int64_t c1 = m0 - c0;
  int64_t e0 = 0, e1 = 0;
  for (int64_t i = 0; i < m0; ++i) {
    if (e0 * c1 <= e1 * c0) { out.items.push_back(1); ++e0; }
    else { out.items.push_back(2); ++e1; }
  }

  int64_t m = m0;
  int64_t round = 0;
  while (int64_t(out.items.size()) < n) {
    out.rounds.push_back({round, int64_t(out.items.size()) + 1, m});
    Value b = Value(1 + round % 2);
    int64_t copies = ceil_mul(rate, m);
    GeneratedStream::Window w;
    w.begin = int64_t(out.items.size());
    w.item = b;
    w.round = round;
    for (int64_t c = 0; c < copies; ++c) out.items.push_back(b);
    w.end = int64_t(out.items.size());
    out.windows.push_back(w);
    m += copies;
    ++round;
  }
  return out;
}

int WhiteboxPlacer::place(Value item, int64_t total) {
  if (item != cur_item_) {
    cur_item_ = item;
    used_.clear();
    burst_site_ = -1;
    burst_left_ = 0;
    burst_size_ = std::max<int64_t>(1, (2 * total + k_ - 1) / k_);
  }
  if (burst_left_ == 0) {
    if (int(used_.size()) >= k_) used_.clear();
    int best = -1;
    int64_t best_rem = 0;
    for (int j = 0; j < k_; ++j) {
      bool seen = false;
      for (int u : used_)
        if (u == j) { seen = true; break; }
      if (seen) continue;
      int64_t rem = remaining_(j, item);
      if (best < 0 || rem < best_rem) { best = j; best_rem = rem; }
    }
    burst_site_ = best;
    used_.push_back(best);
    burst_left_ = burst_size_;
  }
  --burst_left_;
  return burst_site_;
}

void WhiteboxPlacer::window_reset() {
  cur_item_ = 0;
  used_.clear();
  burst_site_ = -1;
  burst_left_ = 0;
}

bool thresholds_admit_missed_change(const std::vector<int64_t>& remaining, int64_t bound) {
  int64_t s = 0;
  for (int64_t r : remaining) s += r - 1;
  return s >= bound;
}

}  // namespace dst
