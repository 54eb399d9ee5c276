#include "mapless/trajgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <Eigen/LU>

#include "mapless/error.hpp"

namespace mapless {

namespace {

// k! / (k - r)!
double falling(int k, int r) {
  double out = 1.0;
  for (int i = 0; i < r; ++i) out *= (k - i);
  return out;
}

constexpr double kDiskEps = 1e-9;

}  // namespace

// ---------------------------------------------------------------------------
// PolySpline

PolySpline::PolySpline(std::vector<Coeffs> pieces, std::vector<double> durations, std::vector<Vec3> waypoints)
    : pieces_(std::move(pieces)), durations_(std::move(durations)), waypoints_(std::move(waypoints)) {
  if (pieces_.size() != durations_.size() || pieces_.empty()) {
    throw Error(ErrorCode::invalid_argument, "spline needs one duration per piece");
  }
  for (double d : durations_) {
    if (!(d > 0.0)) throw Error(ErrorCode::invalid_argument, "piece durations must be positive");
    total_ += d;
  }
}

Vec3 PolySpline::piece_derivative(std::size_t piece, double tau, int order) const {
  const Coeffs& c = pieces_[piece];
  Vec3 out = Vec3::Zero();
  double tp = 1.0;
  for (int k = order; k < 6; ++k) {
    out += falling(k, order) * tp * c.col(k);
    tp *= tau;
  }
  return out;
}

Vec3 PolySpline::derivative(double t, int order) const {
  t = std::clamp(t, 0.0, total_);
  std::size_t j = 0;
  while (j + 1 < pieces_.size() && t > durations_[j]) {
    t -= durations_[j];
    ++j;
  }
  return piece_derivative(j, std::min(t, durations_[j]), order);
}

PolySpline PolySpline::dilated(double k) const {
  std::vector<Coeffs> pieces = pieces_;
  std::vector<double> durations = durations_;
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    double scale = 1.0;
    for (int c = 0; c < 6; ++c) {
      pieces[j].col(c) *= scale;
      scale /= k;
    }
    durations[j] *= k;
  }
  return PolySpline(std::move(pieces), std::move(durations), waypoints_);
}

double PolySpline::jerk_energy() const {
  double energy = 0.0;
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    const double T = durations_[j];
    for (int axis = 0; axis < 3; ++axis) {
      const double a = 6.0 * pieces_[j](axis, 3);
      const double b = 24.0 * pieces_[j](axis, 4);
      const double c = 60.0 * pieces_[j](axis, 5);
      energy += a * a * T + a * b * T * T + (b * b + 2.0 * a * c) * std::pow(T, 3) / 3.0 +
                b * c * std::pow(T, 4) / 2.0 + c * c * std::pow(T, 5) / 5.0;
    }
  }
  return energy;
}

std::vector<SplineSample> sample_spline(const PolySpline& spline, int per_piece) {
  per_piece = std::max(per_piece, 1);
  std::vector<SplineSample> out;
  out.reserve(spline.piece_count() * per_piece + 1);
  double start = 0.0;
  for (std::size_t j = 0; j < spline.piece_count(); ++j) {
    const double T = spline.durations()[j];
    for (int i = (j == 0 ? 0 : 1); i <= per_piece; ++i) {
      const double tau = T * i / per_piece;
      out.push_back({start + tau, j, spline.piece_derivative(j, tau, 0)});
    }
    start += T;
  }
  return out;
}

DynamicsPeak sampled_peaks(const PolySpline& spline, int per_piece) {
  per_piece = std::max(per_piece, 1);
  DynamicsPeak peak;
  for (std::size_t j = 0; j < spline.piece_count(); ++j) {
    const double T = spline.durations()[j];
    for (int i = 0; i <= per_piece; ++i) {
      const double tau = T * i / per_piece;
      peak.max_speed = std::max(peak.max_speed, spline.piece_derivative(j, tau, 1).norm());
      peak.max_acceleration = std::max(peak.max_acceleration, spline.piece_derivative(j, tau, 2).norm());
    }
  }
  return peak;
}

// ---------------------------------------------------------------------------
// Gates

GateCircle intersect_balls(const Ball& b1, const Ball& b2) {
  const Vec3 delta = b2.center - b1.center;
  const double d = delta.norm();
  if (d >= b1.radius + b2.radius) throw Error(ErrorCode::degenerate_gate, "balls are tangent or disjoint");
  if (d <= std::abs(b1.radius - b2.radius)) throw Error(ErrorCode::no_gate, "one ball contains the other");
  const Vec3 u = delta / d;
  const double h = (d * d + b1.radius * b1.radius - b2.radius * b2.radius) / (2.0 * d);
  return {b1.center + h * u, std::sqrt(std::max(0.0, b1.radius * b1.radius - h * h)), u};
}

double distance_to_disk(const Vec3& p, const GateCircle& gate) {
  const Vec3 rel = p - gate.center;
  const double h = gate.normal.dot(rel);
  const double rho = (rel - h * gate.normal).norm();
  if (rho <= gate.radius) return std::abs(h);
  return std::hypot(h, rho - gate.radius);
}

Vec3 closest_point_on_disk(const Vec3& p, const GateCircle& gate) {
  const Vec3 rel = p - gate.center;
  const Vec3 planar = rel - gate.normal.dot(rel) * gate.normal;
  const double rho = planar.norm();
  if (rho <= gate.radius) return gate.center + planar;
  return gate.center + gate.radius * planar / rho;
}

std::vector<GateCircle> corridor_gates(const BallCorridor& corridor, double margin) {
  std::vector<GateCircle> gates;
  for (std::size_t i = 0; i + 1 < corridor.balls.size(); ++i) {
    GateCircle g = intersect_balls(corridor.balls[i], corridor.balls[i + 1]);
    g.radius = std::max(g.radius - margin, 0.1 * g.radius);
    gates.push_back(g);
  }
  return gates;
}

// ---------------------------------------------------------------------------
// Polynomial solves

PolySpline boundary_quintic(const BoundaryCondition& bc, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorCode::invalid_argument, "quintic duration must be positive");
  const double durations[1] = {duration};
  return solve_min_jerk(bc, {}, durations);
}

PolySpline solve_min_jerk(const BoundaryCondition& bc, std::span<const Vec3> waypoints,
                          std::span<const double> durations) {
  const std::size_t m = waypoints.size() + 1;
  if (durations.size() != m) throw Error(ErrorCode::invalid_argument, "need one duration per piece");
  for (double d : durations) {
    if (!(d > 0.0)) throw Error(ErrorCode::invalid_argument, "piece durations must be positive");
  }
  const std::size_t n = 6 * m;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, 3);

  // Unknowns are per-piece coefficients in normalised time s = tau / T.
  auto put = [&](std::size_t row, std::size_t piece, double s, int order, double sign) {
    const double inv_t = std::pow(durations[piece], -order);
    double sp = 1.0;
    for (int k = order; k < 6; ++k) {
      A(row, 6 * piece + k) += sign * falling(k, order) * sp * inv_t;
      sp *= s;
    }
  };

  const Vec3& origin = bc.p_o;
  std::size_t row = 0;
  const Vec3 start[3] = {Vec3::Zero(), bc.v_o, bc.a_o};
  for (int r = 0; r < 3; ++r, ++row) {
    put(row, 0, 0.0, r, 1.0);
    B.row(row) = start[r].transpose();
  }
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const Vec3 w = waypoints[i] - origin;
    put(row, i, 1.0, 0, 1.0);
    B.row(row++) = w.transpose();
    put(row, i + 1, 0.0, 0, 1.0);
    B.row(row++) = w.transpose();
    for (int r = 1; r <= 4; ++r, ++row) {
      put(row, i, 1.0, r, 1.0);
      put(row, i + 1, 0.0, r, -1.0);
    }
  }
  const Vec3 end[3] = {bc.p_f - origin, bc.v_f, bc.a_f};
  for (int r = 0; r < 3; ++r, ++row) {
    put(row, m - 1, 1.0, r, 1.0);
    B.row(row) = end[r].transpose();
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::MatrixXd X = lu.solve(B);
  X += lu.solve(B - A * X);

  std::vector<PolySpline::Coeffs> pieces(m);
  for (std::size_t j = 0; j < m; ++j) {
    double scale = 1.0;
    for (int k = 0; k < 6; ++k) {
      pieces[j].col(k) = X.row(6 * j + k).transpose() * scale;
      scale /= durations[j];
    }
    pieces[j].col(0) += origin;
  }
  return PolySpline(std::move(pieces), std::vector<double>(durations.begin(), durations.end()),
                    std::vector<Vec3>(waypoints.begin(), waypoints.end()));
}

std::vector<double> allocate_times(const BoundaryCondition& bc, std::span<const Vec3> waypoints, const Limits& limits) {
  std::vector<Vec3> pts;
  pts.push_back(bc.p_o);
  pts.insert(pts.end(), waypoints.begin(), waypoints.end());
  pts.push_back(bc.p_f);

  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = arc.back();
  const double v = limits.v_m;
  const double a = limits.a_m;

  // Time at which a rest-to-rest trapezoidal profile covering `total` reaches s.
  auto time_at = [&](double s) {
    if (total >= v * v / a) {
      const double t_acc = v / a;
      const double s_acc = 0.5 * v * v / a;
      const double t_total = total / v + v / a;
      if (s <= s_acc) return std::sqrt(2.0 * s / a);
      if (s <= total - s_acc) return t_acc + (s - s_acc) / v;
      return t_total - std::sqrt(std::max(0.0, 2.0 * (total - s) / a));
    }
    const double t_total = 2.0 * std::sqrt(total / a);
    if (s <= 0.5 * total) return std::sqrt(2.0 * s / a);
    return t_total - std::sqrt(std::max(0.0, 2.0 * (total - s) / a));
  };

  const double min_piece = 0.05;
  std::vector<double> durations;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    durations.push_back(std::max(min_piece, time_at(arc[i]) - time_at(arc[i - 1])));
  }
  return durations;
}

bool within_limits(const PolySpline& spline, const Limits& limits, int per_piece) {
  const DynamicsPeak peak = sampled_peaks(spline, per_piece);
  return peak.max_speed <= limits.v_m && peak.max_acceleration <= limits.a_m;
}

PolySpline solve_with_waypoints(const BoundaryCondition& bc, std::span<const Vec3> waypoints, const Limits& limits,
                                const TrajParams& params) {
  const std::vector<double> base = allocate_times(bc, waypoints, limits);
  double base_total = 0.0;
  for (double d : base) base_total += d;

  auto solve_scaled = [&](double scale) {
    std::vector<double> durations = base;
    for (double& d : durations) d *= scale;
    return solve_min_jerk(bc, waypoints, durations);
  };

  // Golden-section search on log(scale) for jerk energy + rho * T.
  double scale = 1.0;
  if (limits.rho > 0.0) {
    auto cost = [&](double log_s) {
      const double s = std::exp(log_s);
      return solve_scaled(s).jerk_energy() + limits.rho * s * base_total;
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::log(0.2);
    double hi = std::log(5.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = cost(x1);
    double f2 = cost(x2);
    for (int it = 0; it < 14; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - phi * (hi - lo);
        f1 = cost(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + phi * (hi - lo);
        f2 = cost(x2);
      }
    }
    scale = std::exp(0.5 * (lo + hi));
  }

  PolySpline spline = solve_scaled(scale);
  if (within_limits(spline, limits, params.dt_sample_div)) return spline;

  // Uniform dilation until the sampled limits hold.
  double k = 1.0;
  bool feasible = false;
  for (int it = 0; it < 80 && !feasible; ++it) {
    k *= params.dilation_ratio;
    spline = solve_scaled(scale * k);
    feasible = within_limits(spline, limits, params.dt_sample_div);
  }
  if (!feasible) return spline;

  double lo = k / params.dilation_ratio;
  double hi = k;
  for (int it = 0; it < params.refine_steps; ++it) {
    const double mid = std::sqrt(lo * hi);
    PolySpline candidate = solve_scaled(scale * mid);
    if (within_limits(candidate, limits, params.dt_sample_div)) {
      hi = mid;
      spline = std::move(candidate);
    } else {
      lo = mid;
    }
  }
  return spline;
}

// ---------------------------------------------------------------------------
// Waypoint insertion

double circle_violation(const GateCircle& gate, std::span<const SplineSample> samples) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const double d = distance_to_disk(s.position, gate);
    if (d <= kDiskEps) return 0.0;
    best = std::min(best, d);
  }
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const Vec3& a = samples[i].position;
    const Vec3& b = samples[i + 1].position;
    const double ha = gate.normal.dot(a - gate.center);
    const double hb = gate.normal.dot(b - gate.center);
    if ((ha > 0.0 && hb < 0.0) || (ha < 0.0 && hb > 0.0)) {
      const Vec3 x = a + (ha / (ha - hb)) * (b - a);
      if ((x - gate.center).norm() <= gate.radius + kDiskEps) return 0.0;
    } else if (std::abs(ha) <= kDiskEps && std::abs(hb) <= kDiskEps) {
      const Vec3 ab = b - a;
      const double len2 = ab.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((gate.center - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      if ((a + t * ab - gate.center).norm() <= gate.radius + kDiskEps) return 0.0;
    }
  }
  return best;
}

double circle_violation(const GateCircle& gate, const PolySpline& spline, int per_piece) {
  const auto samples = sample_spline(spline, per_piece);
  return circle_violation(gate, samples);
}

std::optional<WaypointChoice> insert_waypoint(std::span<const SplineSample> samples, std::span<const GateCircle> gates) {
  std::optional<WaypointChoice> best;
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const double d = circle_violation(gates[i], samples);
    if (d > 0.0 && (!best || d > best->violation)) best = WaypointChoice{i, Vec3::Zero(), d};
  }
  if (!best) return best;
  const GateCircle& gate = gates[best->gate];
  const SplineSample* nearest = &samples.front();
  double nearest_d = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    const double d = distance_to_disk(s.position, gate);
    if (d < nearest_d) {
      nearest_d = d;
      nearest = &s;
    }
  }
  best->point = closest_point_on_disk(nearest->position, gate);
  return best;
}

double containment_slack(const Vec3& p, const BallCorridor& corridor) {
  double slack = -std::numeric_limits<double>::infinity();
  for (const Ball& b : corridor.balls) slack = std::max(slack, b.radius - (p - b.center).norm());
  return slack;
}

TrajectoryResult generate_trajectory(const BallCorridor& corridor, const BoundaryCondition& bc, const Limits& limits,
                                     const TrajParams& params) {
  if (corridor.balls.empty()) throw Error(ErrorCode::invalid_argument, "empty corridor");
  if (!corridor.balls.front().contains(bc.p_o, 1e-9) || !corridor.balls.back().contains(bc.p_f, 1e-9)) {
    throw Error(ErrorCode::invalid_argument, "boundary positions must lie in the first and last corridor balls");
  }
  const std::vector<GateCircle> gates = corridor_gates(corridor, params.gate_margin);

  TrajectoryResult result;
  result.gate_count = gates.size();
  const std::size_t cap = gates.size() + 4;

  // Waypoints keyed by corridor order: ball b -> 2b, gate i -> 2i + 1.
  std::map<std::size_t, Vec3> waypoints;
  auto ordered = [&] {
    std::vector<Vec3> out;
    for (const auto& [key, p] : waypoints) out.push_back(p);
    return out;
  };

  PolySpline spline = solve_with_waypoints(bc, {}, limits, params);
  while (true) {
    const auto samples = sample_spline(spline, params.dt_sample_div);
    const auto choice = insert_waypoint(samples, gates);
    result.max_violation.push_back(choice ? choice->violation : 0.0);

    if (choice) {
      waypoints[2 * choice->gate + 1] = choice->point;
      ++result.gate_waypoints;
    } else {
      // Every gate is crossed; confirm ball containment of the samples.
      const SplineSample* worst = nullptr;
      double worst_slack = 0.0;
      for (const auto& s : samples) {
        const double slack = containment_slack(s.position, corridor);
        if (slack < worst_slack) {
          worst_slack = slack;
          worst = &s;
        }
      }
      if (worst == nullptr) break;
      std::size_t ball = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < corridor.balls.size(); ++b) {
        const double slack = corridor.balls[b].radius - (worst->position - corridor.balls[b].center).norm();
        if (slack > best) {
          best = slack;
          ball = b;
        }
      }
      const Ball& target = corridor.balls[ball];
      const Vec3 dir = worst->position - target.center;
      const double pull = std::max(0.0, target.radius - std::min(params.gate_margin, 0.5 * target.radius));
      waypoints[2 * ball] = target.center + pull * dir / dir.norm();
      ++result.containment_waypoints;
    }

    if (++result.iterations > cap) {
      throw Error(ErrorCode::no_containment, "waypoint insertion exceeded the iteration cap");
    }
    const std::vector<Vec3> wps = ordered();
    spline = solve_with_waypoints(bc, wps, limits, params);
  }

  if (!within_limits(spline, limits, params.dt_sample_div)) {
    throw Error(ErrorCode::infeasible, "time dilation did not reach the dynamic limits");
  }
  result.spline = std::move(spline);
  return result;
}

bool commit_decision(const PolySpline& candidate, const PolySpline* current, const Vec3& goal) {
  if (current == nullptr || current->empty()) return true;
  return (candidate.end_position() - goal).norm() < (current->end_position() - goal).norm();
}

void write_trajectory_dump(std::ostream& out, const PolySpline& spline) {
  out << "# pieces " << spline.piece_count() << " duration " << spline.duration() << '\n';
  for (std::size_t j = 0; j < spline.piece_count(); ++j) {
    out << "piece " << j << ' ' << spline.durations()[j] << '\n';
    for (int axis = 0; axis < 3; ++axis) {
      for (int k = 0; k < 6; ++k) out << (k ? " " : "") << spline.pieces()[j](axis, k);
      out << '\n';
    }
  }
}

void write_sampled_csv(std::ostream& out, const PolySpline& spline, double dt, double t_offset) {
  out << "t,x,y,z,vx,vy,vz,ax,ay,az\n";
  const auto steps = static_cast<long>(std::ceil(spline.duration() / dt));
  for (long i = 0; i <= steps; ++i) {
    const double t = std::min(i * dt, spline.duration());
    const Vec3 p = spline.position(t);
    const Vec3 v = spline.velocity(t);
    const Vec3 a = spline.acceleration(t);
    out << t + t_offset << ',' << p.x() << ',' << p.y() << ',' << p.z() << ',' << v.x() << ',' << v.y() << ','
        << v.z() << ',' << a.x() << ',' << a.y() << ',' << a.z() << '\n';
  }
}

}  // namespace mapless
