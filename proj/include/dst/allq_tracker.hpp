#pragma once

#include <ostream>
#include <set>

#include "dst/core.hpp"
#include "dst/store.hpp"

namespace dst {

// All-quantiles tracking: a binary tree over the key space whose node counts
// s_u are maintained within theta*m = eps*m/(2h) of the truth by per-node
// site counters. Ranks come from summing left-sibling counts down a root-to-
// leaf path (error < h*theta*m plus one leaf). Balance violations
// (s_v outside [s_u/4, 3 s_u/4]) trigger partial rebuilds at the highest
// violating node; leaves split once their count passes the leaf threshold;
// rounds restart the structure when |A| grows by half.
class AllQTracker {
 public:
  AllQTracker(const TrackerConfig& cfg, Channel& ch);

  void on_arrival(const ArrivalEvent& ev);

  bool in_warmup() const { return warmup_; }
  int64_t warmup_target() const { return warmup_target_; }

  // Estimated number of keys strictly below k; never overestimates, error
  // below eps*m.
  int64_t rank_estimate(Key k) const;
  // An item whose rank is within eps|A| of phi|A|.
  Key quantile(const Rat& phi) const;
  // (2 eps)-approximate phi-heavy hitters extracted from the structure.
  std::set<Value> heavy_hitters(const Rat& phi) const;

  void dump_tree(std::ostream& os) const;

  // --- introspection ---
  struct NodeView {
    Key lo, hi, splitter;
    int depth;
    int64_t s;
    bool leaf;
    int id, left, right, parent;
  };
  std::vector<NodeView> nodes() const;
  int height_bound() const { return h_; }
  Rat theta() const { return theta_; }
  int64_t round_start_size() const { return m0_; }
  int64_t count_estimate() const { return cnt_n_; }
  int64_t node_threshold() const { return t_node_; }
  int64_t leaf_split_threshold() const { return t_leaf_; }
  int64_t round_epoch() const { return round_epoch_; }
  int64_t structure_epoch() const { return structure_epoch_; }
  int64_t rebuilds_this_round() const { return rebuilds_this_round_; }
  int64_t leaf_splits_this_round() const { return leaf_splits_this_round_; }
  int max_depth() const;

 private:
  struct Node {
    Key lo = 0, hi = 0;
    Key splitter = 0;
    int left = -1, right = -1, parent = -1;
    int depth = 0;
    int64_t s = 0;
    bool alive = false;
    bool leaf() const { return left < 0; }
  };
  struct Site {
    SiteStore store;
    std::vector<int64_t> pend;
    int64_t pend_n = 0;
    Site(TrackerMode mode, Value u, const Rat& se) : store(mode, u, se) {}
  };

  void init_round();
  void resolve(std::vector<int>& touched);
  int rebuild(int u);  // returns the fresh subtree root id
  int build_segment(const std::vector<Key>& pool, int64_t spacing, Key lo, Key hi,
                    size_t a, size_t b, int64_t content, int depth, int parent,
                    std::vector<int>& created);
  int alloc_node();
  void free_subtree(int u, std::vector<int>& freed);
  int64_t rebuild_depth_bound(int64_t content) const;
  int fit_rebuild_root(int leaf) const;
  void check_config_fits() const;

  TrackerConfig cfg_;
  Rat eps_p_;
  Rat theta_;
  int h_ = 0;
  Channel& ch_;
  std::vector<Site> sites_;

  bool warmup_ = true;
  int64_t warmup_target_ = 0;
  OrderedMultiset warm_store_;

  std::vector<Node> nodes_;
  std::vector<int> free_ids_;
  int root_ = -1;

  int64_t m0_ = 0;
  int64_t cnt_n_ = 0;
  int64_t t_node_ = 1, t_cnt_ = 1, t_leaf_ = 1, t_stop_ = 1, s_pool_ = 1;

  int64_t round_epoch_ = 0, structure_epoch_ = 0;
  int64_t rebuilds_this_round_ = 0, leaf_splits_this_round_ = 0;
  int64_t round_id_ = 0;
};

}  // namespace dst
