#ifndef RLPP_RACELINE_HPP_
#define RLPP_RACELINE_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rlpp {

struct Vec2 {
  double x{0.0};
  double y{0.0};
};

struct Waypoint {
  double x{0.0};
  double y{0.0};
  double kappa{0.0};  // signed curvature [1/m], left turns positive
  double v_max{0.0};  // reference speed [m/s]
};

struct Pose {
  double x{0.0};
  double y{0.0};
  double theta{0.0};
};

// Absolute curvature at the fixed preview offsets {0, 5, 12}.
struct CurvatureTaps {
  double kappa0{0.0};
  double kappa1{0.0};
  double kappa2{0.0};
  double dkappa{0.0};
  double kappa_max{0.0};
};

inline constexpr std::size_t kTapOffsets[3] = {0, 5, 12};
inline constexpr std::size_t kMinWaypoints = 20;
inline constexpr double kMinMeanSpacing = 0.05;
inline constexpr double kMaxMeanSpacing = 1.0;
inline constexpr double kClosureFactor = 3.0;
inline constexpr double kDefaultHalfWidth = 1.1;

// Raised for any ingestion or construction failure. `row()` is the 1-based
// data row (header excluded) when the failure is attributable to one row,
// 0 otherwise.
class RacelineError : public std::runtime_error {
 public:
  RacelineError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Closed reference loop of waypoints. Immutable once constructed; every
/// query is const and safe to call concurrently.
class Raceline {
 public:
  Raceline(std::vector<Waypoint> waypoints, double half_width);

  std::size_t size() const { return waypoints_.size(); }
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  const Waypoint& operator[](std::size_t i) const { return waypoints_[i]; }
  double half_width() const { return half_width_; }
  double mean_spacing() const { return mean_spacing_; }
  double lap_length() const { return cumulative_.back(); }

  // Arc length from waypoint 0 to waypoint i (i may equal size(): full lap).
  double station(std::size_t i) const { return cumulative_[i]; }
  double segment_length(std::size_t i) const;
  double min_speed() const;
  double max_speed() const;

  /// Index of the waypoint closest to `p`; ties resolve to the smallest index.
  std::size_t nearest_index(Vec2 p) const;

  CurvatureTaps taps(std::size_t i) const;

  /// Point reached by walking `lookahead` metres forward along the polyline
  /// starting at the waypoint nearest to the pose. Wraps across the seam.
  Vec2 lookahead_target(const Pose& pose, double lookahead) const;
  Vec2 point_at_arc(std::size_t start, double distance) const;

  Raceline scale_speeds(double multiplier) const;

  /// Signed perpendicular distance to the closest segment, left positive.
  double lateral_error(Vec2 p) const;

  /// Continuous arc-length coordinate of the projection of `p` onto the
  /// segments adjacent to the nearest waypoint, in [0, lap_length).
  double project_station(Vec2 p) const;

  /// Mean |kappa| over the window of 2*half_window+1 waypoints centred on i.
  double smoothed_abs_curvature(std::size_t i, std::size_t half_window = 2) const;

  /// Path tangent heading at waypoint i (direction of segment i -> i+1).
  double tangent_heading(std::size_t i) const;

 private:
  std::vector<Waypoint> waypoints_;
  std::vector<double> cumulative_;
  double half_width_;
  double mean_spacing_;
};

/// Waypoints newly passed when the nearest index moves from prev to next.
/// Advances larger than N/2 are read as backward motion and count as 0.
std::size_t progress_count(std::size_t prev_index, std::size_t new_index, std::size_t n);

/// Parses `x,y,kappa,v_max` comma-separated text (header row required, any
/// column order, extra columns ignored).
Raceline load_raceline(std::string_view source, double half_width = kDefaultHalfWidth);
Raceline load_raceline_file(const std::string& path, double half_width = kDefaultHalfWidth);
std::string to_csv(const Raceline& raceline);

enum class TrackKind { kOval, kRoundedRectangle };

struct SpeedProfile {
  double v_cap{8.0};      // [m/s]
  double a_lat_max{3.0};  // [m/s^2]
  // Longitudinal limit for a forward/backward smoothing pass over the
  // profile; 0 keeps the pointwise min(v_cap, sqrt(a_lat/|kappa|)) profile.
  double a_long_max{0.0};
};

struct TrackSpec {
  TrackKind kind{TrackKind::kOval};
  // Oval: two straights of `length` joined by half circles of `radius`.
  // Rounded rectangle: straights `length` x `width` with quarter-circle
  // corners of `radius`.
  double length{10.0};
  double width{6.0};
  double radius{3.0};
  double spacing{0.25};
  double half_width{kDefaultHalfWidth};
  SpeedProfile speed{};
};

/// Analytic closed track, counter-clockwise, starting at the beginning of the
/// first straight. Curvature is exactly 0 on straights and 1/r on arcs.
Raceline synthesize_track(const TrackSpec& spec);

TrackKind parse_track_kind(std::string_view name);

}  // namespace rlpp

#endif  // RLPP_RACELINE_HPP_
