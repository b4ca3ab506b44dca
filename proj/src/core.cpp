#include "dst/core.hpp"

#include <cctype>

namespace dst {

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::warmup_forward: return "warmup-forward";
    case MsgKind::all_signal: return "all-signal";
    case MsgKind::item_signal: return "item-signal";
    case MsgKind::drift_update: return "drift-update";
    case MsgKind::interval_update: return "interval-update";
    case MsgKind::poll_request: return "poll-request";
    case MsgKind::poll_reply: return "poll-reply";
    case MsgKind::broadcast_state: return "broadcast-state";
    case MsgKind::probe_request: return "probe-request";
    case MsgKind::probe_reply: return "probe-reply";
    default: return "?";
  }
}

Rat parse_rat(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty rational");
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    int64_t n = std::stoll(s.substr(0, slash));
    int64_t d = std::stoll(s.substr(slash + 1));
    return Rat(n, d);
  }
  bool neg = s[0] == '-';
  size_t i = neg || s[0] == '+' ? 1 : 0;
  int64_t num = 0, den = 1;
  bool seen_dot = false, seen_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c == '.') {
      if (seen_dot) throw std::invalid_argument("bad rational: " + s);
      seen_dot = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      seen_digit = true;
      num = num * 10 + (c - '0');
      if (seen_dot) den *= 10;
      if (den > 1000000000000LL) throw std::invalid_argument("rational too fine: " + s);
    } else {
      throw std::invalid_argument("bad rational: " + s);
    }
  }
  if (!seen_digit) throw std::invalid_argument("bad rational: " + s);
  return Rat(neg ? -num : num, den);
}

}  // namespace dst
