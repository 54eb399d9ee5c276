#include "mapless/fst.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <random>
#include <tuple>

#include "mapless/error.hpp"

namespace mapless {

SafeRadiusFn make_query_fn(const PicoMap& map) {
  return [&map](const Vec3& x) { return map.safe_radius_query(x); };
}

// ---------------------------------------------------------------------------
// FstTree

FstTree::FstTree(const Vec3& root, const QueryResult& root_query) {
  FstNode node;
  node.position = root;
  node.safe_radius = root_query.r_safe;
  node.nearest_obstacle = root_query.x_obstacle;
  nodes_.push_back(std::move(node));
  index_.insert(root);
}

int FstTree::add_node(int parent, const Vec3& position, const QueryResult& query) {
  const int id = static_cast<int>(nodes_.size());
  FstNode node;
  node.position = position;
  node.parent = parent;
  node.cost = nodes_.at(parent).cost + (position - nodes_[parent].position).norm();
  node.safe_radius = query.r_safe;
  node.nearest_obstacle = query.x_obstacle;
  nodes_.push_back(std::move(node));
  nodes_[parent].children.push_back(id);
  index_.insert(position);
  return id;
}

void FstTree::cut_branch(int id, double weight) {
  FstNode& n = node(id);
  if (n.parent >= 0) std::erase(node(n.parent).children, id);
  n.prune_weight = weight;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    node(cur).active = false;
    for (int c : node(cur).children) stack.push_back(c);
  }
}

std::size_t FstTree::active_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const FstNode& n) { return n.active; }));
}

std::vector<int> FstTree::active_leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].active && nodes_[i].children.empty()) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> FstTree::path_to(int id) const {
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Vec3> batch_sample(const Box& region, std::size_t n, const ResampleDistribution* prior,
                               std::uint64_t seed) {
  if (region.empty()) throw Error(ErrorCode::invalid_argument, "sampling region is empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::size_t n_mix = 0;
  if (prior != nullptr && !prior->components.empty()) {
    n_mix = static_cast<std::size_t>(std::llround((1.0 - prior->uniform_fraction) * static_cast<double>(n)));
    n_mix = std::min(n_mix, n);
  }

  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n_mix; ++i) {
    const double u = unit(rng);
    std::size_t k = 0;
    double acc = prior->components[0].weight;
    while (u >= acc && k + 1 < prior->components.size()) acc += prior->components[++k].weight;
    const GaussianComponent& c = prior->components[k];
    const double gx = normal(rng);
    const double gy = normal(rng);
    const double gz = normal(rng);
    out.push_back(region.clamp(c.mean + c.stddev * Vec3(gx, gy, gz)));
  }
  const Vec3 extent = region.extent();
  for (std::size_t i = n_mix; i < n; ++i) {
    const double ux = unit(rng);
    const double uy = unit(rng);
    const double uz = unit(rng);
    out.push_back(region.min + Vec3(ux * extent.x(), uy * extent.y(), uz * extent.z()));
  }
  return out;
}

std::vector<Vec3> sort_by_root_distance(std::vector<Vec3> samples, const Vec3& root) {
  std::stable_sort(samples.begin(), samples.end(), [&](const Vec3& a, const Vec3& b) {
    return (a - root).squaredNorm() < (b - root).squaredNorm();
  });
  return samples;
}

// ---------------------------------------------------------------------------
// Build

std::vector<Vec3> edge_checkpoints(const Vec3& from, const Vec3& to, double step) {
  std::vector<Vec3> out;
  const double len = (to - from).norm();
  if (step <= 0.0 || len <= step) return out;
  const auto m = static_cast<std::size_t>(std::ceil(len / step));
  for (std::size_t j = 1; j < m; ++j) out.push_back(from + (double(j) / double(m)) * (to - from));
  return out;
}

bool edge_collision_free(const Vec3& from, const Vec3& to, const SafeRadiusFn& query, double r_inflate,
                         double step) {
  const double len = (to - from).norm();
  if (step <= 0.0 || len <= step) return true;
  const auto m = static_cast<std::size_t>(std::ceil(len / step));
  // Check from the new node backwards: obstacles near the sample fail fastest.
  for (std::size_t j = m - 1; j >= 1; --j) {
    if (query(from + (double(j) / double(m)) * (to - from)).r_safe < r_inflate) return false;
  }
  return true;
}

FstTree build_fst(const Vec3& root, std::span<const Vec3> sorted_samples, const SafeRadiusFn& query,
                  const FstParams& params) {
  FstTree tree(root, query(root));
  struct Candidate {
    double total;
    double distance;
    int id;
  };
  std::vector<Candidate> candidates;
  for (const Vec3& sample : sorted_samples) {
    const QueryResult q = query(sample);
    if (q.r_safe < params.r_inflate) continue;

    candidates.clear();
    for (const Neighbor& nb : tree.dynamic_index().knn(sample, params.k_nn)) {
      const int id = static_cast<int>(nb.index);
      candidates.push_back({tree.node(id).cost + nb.distance, nb.distance, id});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.total, a.distance, a.id) < std::tie(b.total, b.distance, b.id);
    });
    // The cheapest collision-free candidate is the first one that passes.
    for (const Candidate& c : candidates) {
      if (edge_collision_free(tree.node(c.id).position, sample, query, params.r_inflate, params.edge_check_step)) {
        tree.add_node(c.id, sample, q);
        break;
      }
    }
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Score and prune

int leaf_score(const FstTree& tree, int id, double alpha_threshold) {
  const FstNode& n = tree.node(id);
  if (n.parent < 0) return 0;
  const Vec3 spanning = n.position - tree.node(n.parent).position;
  const Vec3 to_obstacle = n.nearest_obstacle - n.position;
  const double alpha = std::atan2(spanning.cross(to_obstacle).norm(), spanning.dot(to_obstacle));
  return alpha < alpha_threshold ? 0 : 1;
}

void score_tree(FstTree& tree, double alpha_threshold) {
  auto& nodes = tree.nodes();
  for (auto& n : nodes) n.score = 0;
  // Children have larger ids than their parents, so a descending sweep is a
  // post-order traversal.
  for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
    FstNode& n = nodes[id];
    if (!n.active) continue;
    if (n.children.empty()) n.score = leaf_score(tree, id, alpha_threshold);
    if (n.parent >= 0) nodes[n.parent].score += n.score;
  }
}

void prune_tree(FstTree& tree, double prune_factor, const Vec3& goal) {
  auto& nodes = tree.nodes();
  // Distance from goal to the nearest leaf in each subtree, for the zero-score guard.
  std::vector<double> nearest_leaf(nodes.size(), std::numeric_limits<double>::infinity());
  for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
    const FstNode& n = nodes[id];
    if (!n.active) continue;
    if (n.children.empty()) nearest_leaf[id] = (n.position - goal).norm();
    if (n.parent >= 0) nearest_leaf[n.parent] = std::min(nearest_leaf[n.parent], nearest_leaf[id]);
  }

  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    const std::vector<int> children = nodes[id].children;
    if (children.empty()) continue;
    int max_score = 0;
    for (int c : children) max_score = std::max(max_score, nodes[c].score);

    if (max_score == 0) {
      int keep = children.front();
      for (int c : children) {
        if (nearest_leaf[c] < nearest_leaf[keep]) keep = c;
      }
      for (int c : children) {
        if (c != keep) tree.cut_branch(c, 0.0);
      }
      queue.push_back(keep);
      continue;
    }
    for (int c : children) {
      const double w = double(nodes[c].score) / double(max_score);
      if (w < prune_factor) {
        tree.cut_branch(c, w);
      } else {
        queue.push_back(c);
      }
    }
  }
}

std::vector<int> extract_path(const FstTree& tree, const Vec3& goal) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int id : tree.active_leaves()) {
    const double d = (tree.node(id).position - goal).norm();
    if (d < best_d || (d == best_d && tree.node(id).cost < tree.node(best).cost)) {
      best = id;
      best_d = d;
    }
  }
  return tree.path_to(best);
}

std::vector<Vec3> path_positions(const FstTree& tree, std::span<const int> path) {
  std::vector<Vec3> out;
  out.reserve(path.size());
  for (int id : path) out.push_back(tree.node(id).position);
  return out;
}

// ---------------------------------------------------------------------------
// Corridor

namespace {

constexpr double kInsideSlack = 1e-12;

// First point after (seg, t) where the polyline leaves the ball around
// `center`. Returns false when the remainder stays inside the ball.
bool first_exit(std::span<const Vec3> path, const Vec3& center, double radius, std::size_t& seg, double& t,
                Vec3& exit_point) {
  for (std::size_t s = seg; s + 1 < path.size(); ++s) {
    const Vec3& a = path[s];
    const Vec3& b = path[s + 1];
    if ((b - center).norm() <= radius + kInsideSlack) continue;  // convexity: segment stays inside
    const Vec3 d = b - a;
    const Vec3 f = a - center;
    const double dd = d.squaredNorm();
    const double fd = f.dot(d);
    const double disc = std::max(0.0, fd * fd - dd * (f.squaredNorm() - radius * radius));
    const double root = std::clamp((-fd + std::sqrt(disc)) / dd, 0.0, 1.0);
    seg = s;
    t = root;
    exit_point = a + root * d;
    return true;
  }
  return false;
}

}  // namespace

BallCorridor generate_sfc(std::span<const Vec3> path, const SafeRadiusFn& query, std::size_t max_balls,
                          double r_min) {
  if (path.empty()) throw Error(ErrorCode::invalid_argument, "generate_sfc needs a non-empty path");
  BallCorridor corridor;
  corridor.source_path.assign(path.begin(), path.end());
  if (max_balls == 0) return corridor;

  const double r0 = query(path.front()).r_safe;
  if (r0 <= r_min) return corridor;
  corridor.balls.push_back({path.front(), r0});

  std::size_t seg = 0;
  double t = 0.0;
  while (corridor.balls.size() < max_balls) {
    const Ball& last = corridor.balls.back();
    Vec3 next;
    if (!first_exit(path, last.center, last.radius, seg, t, next)) {
      corridor.reaches_path_end = true;
      break;
    }
    const double r = query(next).r_safe;
    if (r <= r_min) break;
    corridor.balls.push_back({next, r});
  }
  if (!corridor.reaches_path_end && corridor.balls.size() == max_balls) {
    const Ball& last = corridor.balls.back();
    std::size_t s = seg;
    double tt = t;
    Vec3 unused;
    corridor.reaches_path_end = !first_exit(path, last.center, last.radius, s, tt, unused);
  }
  return corridor;
}

ResampleDistribution make_resample_distribution(const BallCorridor& previous, double beta, double uniform_fraction) {
  ResampleDistribution dist;
  dist.uniform_fraction = uniform_fraction;
  double total = 0.0;
  for (const Ball& b : previous.balls) total += b.radius * b.radius * b.radius;
  if (total <= 0.0) return dist;
  for (const Ball& b : previous.balls) {
    dist.components.push_back({b.radius * b.radius * b.radius / total, b.center, b.radius / beta});
  }
  return dist;
}

void write_tree_dump(std::ostream& out, const FstTree& tree) {
  out << "# id parent_id x y z cost score safe_radius\n";
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const FstNode& n = tree.nodes()[i];
    if (!n.active) continue;
    out << i << ' ' << n.parent << ' ' << n.position.x() << ' ' << n.position.y() << ' ' << n.position.z() << ' '
        << n.cost << ' ' << n.score << ' ' << n.safe_radius << '\n';
  }
}

void write_corridor_dump(std::ostream& out, const BallCorridor& corridor) {
  out << "# x y z r\n";
  for (const Ball& b : corridor.balls) {
    out << b.center.x() << ' ' << b.center.y() << ' ' << b.center.z() << ' ' << b.radius << '\n';
  }
}

}  // namespace mapless
