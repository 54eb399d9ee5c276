#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mapless/fst.hpp"
#include "mapless/types.hpp"

namespace mapless {

struct BoundaryCondition {
  Vec3 p_o = Vec3::Zero();
  Vec3 v_o = Vec3::Zero();
  Vec3 a_o = Vec3::Zero();
  Vec3 p_f = Vec3::Zero();
  Vec3 v_f = Vec3::Zero();
  Vec3 a_f = Vec3::Zero();
};

struct Limits {
  double v_m = 2.0;
  double a_m = 3.0;
  double rho = 100.0;  // weight of total duration against jerk energy
};

struct TrajParams {
  int dt_sample_div = 200;      // samples per piece
  double dilation_ratio = 1.2;
  double gate_margin = 0.3;
  int refine_steps = 6;         // bisection steps after the geometric dilation
};

// Piecewise quintic, one 3x6 coefficient block per piece in local time.
class PolySpline {
 public:
  using Coeffs = Eigen::Matrix<double, 3, 6>;  // column k multiplies tau^k

  PolySpline() = default;
  PolySpline(std::vector<Coeffs> pieces, std::vector<double> durations, std::vector<Vec3> waypoints = {});

  bool empty() const { return pieces_.empty(); }
  std::size_t piece_count() const { return pieces_.size(); }
  const std::vector<Coeffs>& pieces() const { return pieces_; }
  const std::vector<double>& durations() const { return durations_; }
  const std::vector<Vec3>& waypoints() const { return waypoints_; }
  double duration() const { return total_; }

  // Derivative of the given order at global time t, clamped to [0, duration].
  Vec3 derivative(double t, int order) const;
  Vec3 position(double t) const { return derivative(t, 0); }
  Vec3 velocity(double t) const { return derivative(t, 1); }
  Vec3 acceleration(double t) const { return derivative(t, 2); }
  Vec3 jerk(double t) const { return derivative(t, 3); }
  // Derivative evaluated at local time tau of one piece (no clamping).
  Vec3 piece_derivative(std::size_t piece, double tau, int order) const;

  Vec3 start_position() const { return piece_derivative(0, 0.0, 0); }
  Vec3 end_position() const { return piece_derivative(pieces_.size() - 1, durations_.back(), 0); }

  // Time-dilated copy: q(t) = p(t / k).
  PolySpline dilated(double k) const;
  // Integral of the squared jerk norm.
  double jerk_energy() const;

 private:
  std::vector<Coeffs> pieces_;
  std::vector<double> durations_;
  std::vector<Vec3> waypoints_;
  double total_ = 0.0;
};

struct SplineSample {
  double t = 0.0;
  std::size_t piece = 0;
  Vec3 position = Vec3::Zero();
};

// `per_piece` equal sub-intervals in each piece; every knot appears once.
std::vector<SplineSample> sample_spline(const PolySpline& spline, int per_piece);

struct DynamicsPeak {
  double max_speed = 0.0;
  double max_acceleration = 0.0;
};
DynamicsPeak sampled_peaks(const PolySpline& spline, int per_piece);

struct GateCircle {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  Vec3 normal = Vec3::UnitX();
};

GateCircle intersect_balls(const Ball& b1, const Ball& b2);

double distance_to_disk(const Vec3& p, const GateCircle& gate);
Vec3 closest_point_on_disk(const Vec3& p, const GateCircle& gate);

PolySpline boundary_quintic(const BoundaryCondition& bc, double duration);

// Minimum-jerk spline through the waypoints with fixed piece durations.
PolySpline solve_min_jerk(const BoundaryCondition& bc, std::span<const Vec3> waypoints,
                          std::span<const double> durations);

// Trapezoidal-speed time allocation over the polyline p_o -> waypoints -> p_f.
std::vector<double> allocate_times(const BoundaryCondition& bc, std::span<const Vec3> waypoints, const Limits& limits);

bool within_limits(const PolySpline& spline, const Limits& limits, int per_piece);

PolySpline solve_with_waypoints(const BoundaryCondition& bc, std::span<const Vec3> waypoints, const Limits& limits,
                                const TrajParams& params = {});

// Zero when a sampled segment meets the closed gate disk, otherwise the least
// sample-to-disk distance.
double circle_violation(const GateCircle& gate, std::span<const SplineSample> samples);
double circle_violation(const GateCircle& gate, const PolySpline& spline, int per_piece);

struct WaypointChoice {
  std::size_t gate = 0;
  Vec3 point = Vec3::Zero();
  double violation = 0.0;
};

// Gate with the largest violation and the disk point nearest to the closest
// sample; nullopt when every violation is zero.
std::optional<WaypointChoice> insert_waypoint(std::span<const SplineSample> samples, std::span<const GateCircle> gates);

std::vector<GateCircle> corridor_gates(const BallCorridor& corridor, double margin);

struct TrajectoryResult {
  PolySpline spline;
  std::vector<double> max_violation;  // per iteration, before each insertion
  std::size_t iterations = 0;         // waypoint insertions
  std::size_t gate_count = 0;
  std::size_t gate_waypoints = 0;
  std::size_t containment_waypoints = 0;
};

double containment_slack(const Vec3& p, const BallCorridor& corridor);

// Waypoint-insertion loop. Throws Error(no_containment) when the iteration cap
// (gates + 4) is exceeded.
TrajectoryResult generate_trajectory(const BallCorridor& corridor, const BoundaryCondition& bc, const Limits& limits,
                                     const TrajParams& params = {});

bool commit_decision(const PolySpline& candidate, const PolySpline* current, const Vec3& goal);

// Per piece: `piece <j> <duration>` followed by three coefficient rows (x, y, z).
void write_trajectory_dump(std::ostream& out, const PolySpline& spline);
// `t x y z vx vy vz ax ay az` rows.
void write_sampled_csv(std::ostream& out, const PolySpline& spline, double dt, double t_offset = 0.0);

}  // namespace mapless
