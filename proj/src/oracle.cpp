#include "dst/oracle.hpp"

namespace dst {

ExactOracle::HHSets ExactOracle::admissible_hh(const Rat& phi, const Rat& eps) const {
  if (size() < 1) throw std::logic_error("admissible_hh on empty multiset");
  HHSets out;
  int64_t n = size();
  keys_.for_each_value([&](Value v, int64_t c) {
    if (int_ge_ratmul(c, phi, n)) out.mandatory.insert(v);
    else if (cmp_int_ratmul(c, phi - eps, n) < 0) out.forbidden.insert(v);
  });
  return out;
}

std::pair<int64_t, int64_t> ExactOracle::admissible_quantile_ranks(const Rat& phi,
                                                                   const Rat& eps) const {
  if (size() < 1) throw std::logic_error("admissible_quantile on empty multiset");
  int64_t n = size();
  // lowest r with r+1 >= (phi-eps)n , highest r with r <= (phi+eps)n
  int64_t lo = ceil_mul(phi - eps, n) - 1;
  if (lo < 0) lo = 0;
  int64_t hi = floor_mul(phi + eps, n);
  if (hi > n - 1) hi = n - 1;
  return {lo, hi};
}

}  // namespace dst
