#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "mapless/kdtree.hpp"
#include "mapless/picomap.hpp"
#include "mapless/types.hpp"

namespace mapless {

// Proximity oracle used by the tree and corridor builders. PicoMap is the
// production source; tests substitute analytic fields.
using SafeRadiusFn = std::function<QueryResult(const Vec3&)>;

SafeRadiusFn make_query_fn(const PicoMap& map);

struct FstParams {
  std::size_t n_samples = 200;
  std::size_t k_nn = 5;
  double r_inflate = 0.3;
  double alpha_threshold = deg_to_rad(60.0);
  double prune_factor = 0.3;
  double beta = 2.0;
  double uniform_fraction = 0.5;
  std::size_t max_balls = 12;
  double edge_check_step = 0.15;
  double sfc_r_min = 0.1;
};

struct FstNode {
  Vec3 position = Vec3::Zero();
  int parent = -1;
  std::vector<int> children;  // surviving children only
  double cost = 0.0;
  int score = 0;
  double safe_radius = 0.0;
  Vec3 nearest_obstacle = Vec3::Zero();
  bool active = true;
  // Sibling-normalised weight recorded when the branch rooted here was cut.
  double prune_weight = std::numeric_limits<double>::quiet_NaN();
};

// Node ids equal insertion order; a parent always precedes its children.
class FstTree {
 public:
  FstTree(const Vec3& root, const QueryResult& root_query);

  int add_node(int parent, const Vec3& position, const QueryResult& query);
  void cut_branch(int id, double weight);

  std::size_t size() const { return nodes_.size(); }
  std::size_t active_count() const;
  const FstNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  FstNode& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<FstNode>& nodes() const { return nodes_; }
  std::vector<FstNode>& nodes() { return nodes_; }
  bool is_leaf(int id) const { return node(id).children.empty(); }
  std::vector<int> active_leaves() const;
  std::vector<int> path_to(int id) const;  // root first
  const DynamicKdTree& dynamic_index() const { return index_; }

 private:
  std::vector<FstNode> nodes_;
  DynamicKdTree index_;
};

struct Ball {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  bool contains(const Vec3& p, double slack = 0.0) const { return (p - center).norm() <= radius + slack; }
};

struct BallCorridor {
  std::vector<Ball> balls;
  std::vector<Vec3> source_path;
  bool reaches_path_end = false;  // marching consumed the whole path
  bool empty() const { return balls.empty(); }
};

struct GaussianComponent {
  double weight = 0.0;
  Vec3 mean = Vec3::Zero();
  double stddev = 0.0;
};

struct ResampleDistribution {
  std::vector<GaussianComponent> components;
  double uniform_fraction = 1.0;
};

std::vector<Vec3> batch_sample(const Box& region, std::size_t n, const ResampleDistribution* prior,
                               std::uint64_t seed);

std::vector<Vec3> sort_by_root_distance(std::vector<Vec3> samples, const Vec3& root);

// Checkpoints strictly between the endpoints at spacing <= step; the far
// endpoint is the caller's responsibility.
std::vector<Vec3> edge_checkpoints(const Vec3& from, const Vec3& to, double step);
bool edge_collision_free(const Vec3& from, const Vec3& to, const SafeRadiusFn& query, double r_inflate,
                         double step);

FstTree build_fst(const Vec3& root, std::span<const Vec3> sorted_samples, const SafeRadiusFn& query,
                  const FstParams& params);

int leaf_score(const FstTree& tree, int id, double alpha_threshold);
void score_tree(FstTree& tree, double alpha_threshold);

// Breadth-first sibling-normalised pruning. When every sibling scores zero the
// one whose subtree holds the leaf nearest `goal` survives.
void prune_tree(FstTree& tree, double prune_factor, const Vec3& goal);

// Root-to-leaf node ids for the surviving leaf nearest `goal` (ties: lower cost).
std::vector<int> extract_path(const FstTree& tree, const Vec3& goal);
std::vector<Vec3> path_positions(const FstTree& tree, std::span<const int> path);

BallCorridor generate_sfc(std::span<const Vec3> path, const SafeRadiusFn& query, std::size_t max_balls,
                          double r_min);

ResampleDistribution make_resample_distribution(const BallCorridor& previous, double beta,
                                                double uniform_fraction);

// `id parent_id x y z cost score safe_radius` rows for the surviving nodes.
void write_tree_dump(std::ostream& out, const FstTree& tree);
// `x y z r` rows.
void write_corridor_dump(std::ostream& out, const BallCorridor& corridor);

}  // namespace mapless
