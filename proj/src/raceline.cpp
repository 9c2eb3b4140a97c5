#include "rlpp/raceline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace rlpp {

namespace {

double distance(double ax, double ay, double bx, double by) { return std::hypot(bx - ax, by - ay); }

struct SegmentProjection {
  double dist2;
  double t;      // in [0, 1]
  double cross;  // sign of side, left positive
};

SegmentProjection project_on_segment(Vec2 p, const Waypoint& a, const Waypoint& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = a.x + t * dx;
  const double qy = a.y + t * dy;
  const double ex = p.x - qx;
  const double ey = p.y - qy;
  return {ex * ex + ey * ey, t, dx * (p.y - a.y) - dy * (p.x - a.x)};
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

Raceline::Raceline(std::vector<Waypoint> waypoints, double half_width)
    : waypoints_(std::move(waypoints)), half_width_(half_width), mean_spacing_(0.0) {
  const std::size_t n = waypoints_.size();
  if (n < kMinWaypoints) {
    throw RacelineError("raceline needs at least " + std::to_string(kMinWaypoints) + " waypoints, got " +
                        std::to_string(n));
  }
  if (!(half_width_ > 0.0) || !std::isfinite(half_width_)) {
    throw RacelineError("half_width must be positive and finite");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& w = waypoints_[i];
    if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.kappa) || !std::isfinite(w.v_max)) {
      throw RacelineError("row " + std::to_string(i + 1) + ": non-finite value", i + 1);
    }
    if (!(w.v_max > 0.0)) {
      throw RacelineError("row " + std::to_string(i + 1) + ": v_max must be positive", i + 1);
    }
  }
  cumulative_.assign(n + 1, 0.0);
  double open_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = waypoints_[i];
    const auto& b = waypoints_[(i + 1) % n];
    const double d = distance(a.x, a.y, b.x, b.y);
    if (i + 1 < n) {
      if (!(d > 0.0)) {
        throw RacelineError("row " + std::to_string(i + 2) + ": coincides with the previous waypoint", i + 2);
      }
      open_sum += d;
    }
    cumulative_[i + 1] = cumulative_[i] + d;
  }
  mean_spacing_ = open_sum / static_cast<double>(n - 1);
  if (mean_spacing_ < kMinMeanSpacing || mean_spacing_ > kMaxMeanSpacing) {
    std::ostringstream msg;
    msg << "mean waypoint spacing " << mean_spacing_ << " m outside [" << kMinMeanSpacing << ", "
        << kMaxMeanSpacing << "]";
    throw RacelineError(msg.str());
  }
  const double closure = segment_length(n - 1);
  if (!(closure > 0.0) || closure > kClosureFactor * mean_spacing_) {
    std::ostringstream msg;
    msg << "loop not closed: last-to-first distance " << closure << " m exceeds " << kClosureFactor
        << " x mean spacing (" << mean_spacing_ << " m)";
    throw RacelineError(msg.str(), n);
  }
}

double Raceline::segment_length(std::size_t i) const { return cumulative_[i + 1] - cumulative_[i]; }

double Raceline::min_speed() const {
  return std::min_element(waypoints_.begin(), waypoints_.end(),
                          [](const auto& a, const auto& b) { return a.v_max < b.v_max; })
      ->v_max;
}

double Raceline::max_speed() const {
  return std::max_element(waypoints_.begin(), waypoints_.end(),
                          [](const auto& a, const auto& b) { return a.v_max < b.v_max; })
      ->v_max;
}

std::size_t Raceline::nearest_index(Vec2 p) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < waypoints_.size(); ++i) {
    const double dx = waypoints_[i].x - p.x;
    const double dy = waypoints_[i].y - p.y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

CurvatureTaps Raceline::taps(std::size_t i) const {
  const std::size_t n = waypoints_.size();
  CurvatureTaps t;
  t.kappa0 = std::abs(waypoints_[(i + kTapOffsets[0]) % n].kappa);
  t.kappa1 = std::abs(waypoints_[(i + kTapOffsets[1]) % n].kappa);
  t.kappa2 = std::abs(waypoints_[(i + kTapOffsets[2]) % n].kappa);
  t.dkappa = t.kappa1 - t.kappa0;
  t.kappa_max = std::max({t.kappa0, t.kappa1, t.kappa2});
  return t;
}

Vec2 Raceline::point_at_arc(std::size_t start, double distance_ahead) const {
  const std::size_t n = waypoints_.size();
  double remaining = std::fmod(distance_ahead, lap_length());
  std::size_t j = start;
  for (std::size_t step = 0; step <= n; ++step, j = (j + 1) % n) {
    const double seg = segment_length(j);
    if (remaining <= seg) {
      const auto& a = waypoints_[j];
      const auto& b = waypoints_[(j + 1) % n];
      const double t = remaining / seg;
      return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    remaining -= seg;
  }
  // Only reachable through rounding of fmod at exactly one lap.
  return {waypoints_[start].x, waypoints_[start].y};
}

Vec2 Raceline::lookahead_target(const Pose& pose, double lookahead) const {
  return point_at_arc(nearest_index({pose.x, pose.y}), lookahead);
}

Raceline Raceline::scale_speeds(double multiplier) const {
  if (!(multiplier > 0.0)) throw RacelineError("speed multiplier must be positive");
  auto scaled = waypoints_;
  for (auto& w : scaled) w.v_max *= multiplier;
  return Raceline(std::move(scaled), half_width_);
}

double Raceline::lateral_error(Vec2 p) const {
  const std::size_t n = waypoints_.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto proj = project_on_segment(p, waypoints_[i], waypoints_[(i + 1) % n]);
    if (proj.dist2 < best_d2) {
      best_d2 = proj.dist2;
      best_cross = proj.cross;
    }
  }
  const double d = std::sqrt(best_d2);
  return best_cross < 0.0 ? -d : d;
}

double Raceline::project_station(Vec2 p) const {
  const std::size_t n = waypoints_.size();
  const std::size_t i = nearest_index(p);
  const std::size_t prev = (i + n - 1) % n;
  const auto ahead = project_on_segment(p, waypoints_[i], waypoints_[(i + 1) % n]);
  const auto behind = project_on_segment(p, waypoints_[prev], waypoints_[i]);
  double s = ahead.dist2 <= behind.dist2 ? cumulative_[i] + ahead.t * segment_length(i)
                                         : cumulative_[prev] + behind.t * segment_length(prev);
  s = std::fmod(s, lap_length());
  return s < 0.0 ? s + lap_length() : s;
}

double Raceline::smoothed_abs_curvature(std::size_t i, std::size_t half_window) const {
  const std::size_t n = waypoints_.size();
  double sum = 0.0;
  for (std::size_t k = 0; k <= 2 * half_window; ++k) {
    sum += std::abs(waypoints_[(i + n * (half_window / n + 1) + k - half_window) % n].kappa);
  }
  return sum / static_cast<double>(2 * half_window + 1);
}

double Raceline::tangent_heading(std::size_t i) const {
  const std::size_t n = waypoints_.size();
  const auto& a = waypoints_[i % n];
  const auto& b = waypoints_[(i + 1) % n];
  return std::atan2(b.y - a.y, b.x - a.x);
}

std::size_t progress_count(std::size_t prev_index, std::size_t new_index, std::size_t n) {
  const std::size_t advance = (new_index + n - prev_index) % n;
  return 2 * advance > n ? 0 : advance;
}

Raceline load_raceline(std::string_view source, double half_width) {
  std::vector<Waypoint> waypoints;
  int col_x = -1, col_y = -1, col_k = -1, col_v = -1;
  std::size_t columns = 0;
  bool have_header = false;
  std::size_t data_row = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    const auto eol = source.find('\n', pos);
    const auto line = trim(source.substr(pos, eol == std::string_view::npos ? eol : eol - pos));
    pos = eol == std::string_view::npos ? source.size() + 1 : eol + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_commas(line);
    if (!have_header) {
      for (std::size_t c = 0; c < fields.size(); ++c) {
        if (fields[c] == "x") col_x = static_cast<int>(c);
        else if (fields[c] == "y") col_y = static_cast<int>(c);
        else if (fields[c] == "kappa") col_k = static_cast<int>(c);
        else if (fields[c] == "v_max") col_v = static_cast<int>(c);
      }
      for (auto [name, col] : {std::pair{"x", col_x}, {"y", col_y}, {"kappa", col_k}, {"v_max", col_v}}) {
        if (col < 0) throw RacelineError(std::string("header is missing column '") + name + "'");
      }
      columns = fields.size();
      have_header = true;
      continue;
    }
    ++data_row;
    if (fields.size() != columns) {
      throw RacelineError("row " + std::to_string(data_row) + ": expected " + std::to_string(columns) +
                              " fields, got " + std::to_string(fields.size()),
                          data_row);
    }
    Waypoint w;
    for (auto [col, dst] : {std::pair{col_x, &w.x}, {col_y, &w.y}, {col_k, &w.kappa}, {col_v, &w.v_max}}) {
      if (!parse_double(fields[static_cast<std::size_t>(col)], *dst)) {
        throw RacelineError("row " + std::to_string(data_row) + ": cannot parse '" +
                                std::string(fields[static_cast<std::size_t>(col)]) + "'",
                            data_row);
      }
      if (!std::isfinite(*dst)) {
        throw RacelineError("row " + std::to_string(data_row) + ": non-finite value", data_row);
      }
    }
    if (!(w.v_max > 0.0)) {
      throw RacelineError("row " + std::to_string(data_row) + ": v_max must be positive", data_row);
    }
    waypoints.push_back(w);
  }
  if (!have_header) throw RacelineError("empty raceline source");
  return Raceline(std::move(waypoints), half_width);
}

Raceline load_raceline_file(const std::string& path, double half_width) {
  std::ifstream in(path);
  if (!in) throw RacelineError("cannot open raceline file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_raceline(buf.str(), half_width);
}

std::string to_csv(const Raceline& raceline) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,kappa,v_max\n";
  for (const auto& w : raceline.waypoints()) out << w.x << ',' << w.y << ',' << w.kappa << ',' << w.v_max << '\n';
  return out.str();
}

namespace {

struct Piece {
  double length;
  double curvature;  // 0 for straights
  double x0, y0, heading0;
};

std::vector<Piece> track_pieces(const TrackSpec& spec) {
  const double r = spec.radius;
  std::vector<std::pair<double, double>> plan;  // (length, curvature)
  if (spec.kind == TrackKind::kOval) {
    plan = {{spec.length, 0.0}, {std::numbers::pi * r, 1.0 / r}, {spec.length, 0.0}, {std::numbers::pi * r, 1.0 / r}};
  } else {
    const double quarter = 0.5 * std::numbers::pi * r;
    plan = {{spec.length, 0.0}, {quarter, 1.0 / r}, {spec.width, 0.0}, {quarter, 1.0 / r},
            {spec.length, 0.0}, {quarter, 1.0 / r}, {spec.width, 0.0}, {quarter, 1.0 / r}};
  }
  std::vector<Piece> pieces;
  double x = -0.5 * spec.length, y = -r - (spec.kind == TrackKind::kRoundedRectangle ? 0.5 * spec.width : 0.0);
  double heading = 0.0;
  for (auto [len, k] : plan) {
    pieces.push_back({len, k, x, y, heading});
    if (k == 0.0) {
      x += len * std::cos(heading);
      y += len * std::sin(heading);
    } else {
      const double dh = len * k;
      x += (std::sin(heading + dh) - std::sin(heading)) / k;
      y += (std::cos(heading) - std::cos(heading + dh)) / k;
      heading += dh;
    }
  }
  return pieces;
}

}  // namespace

Raceline synthesize_track(const TrackSpec& spec) {
  if (!(spec.radius > 0.0)) throw RacelineError("track radius must be positive");
  if (!(spec.spacing > 0.0)) throw RacelineError("waypoint spacing must be positive");
  if (spec.length < 0.0 || spec.width < 0.0) throw RacelineError("straight lengths must be non-negative");
  if (!(spec.speed.v_cap > 0.0) || !(spec.speed.a_lat_max > 0.0) || spec.speed.a_long_max < 0.0) {
    throw RacelineError("invalid speed profile parameters");
  }
  const auto pieces = track_pieces(spec);
  double smallest_arc = std::numeric_limits<double>::infinity();
  double perimeter = 0.0;
  for (const auto& p : pieces) {
    if (p.curvature != 0.0) smallest_arc = std::min(smallest_arc, p.length);
    perimeter += p.length;
  }
  if (spec.spacing > smallest_arc) {
    throw RacelineError("waypoint spacing exceeds the shortest arc length");
  }
  const auto n = static_cast<std::size_t>(std::llround(perimeter / spec.spacing));
  const double ds = perimeter / static_cast<double>(n);

  std::vector<Waypoint> waypoints;
  waypoints.reserve(n);
  std::size_t piece = 0;
  double piece_start = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = ds * static_cast<double>(k);
    while (piece + 1 < pieces.size() && s >= piece_start + pieces[piece].length) {
      piece_start += pieces[piece].length;
      ++piece;
    }
    const auto& p = pieces[piece];
    const double u = s - piece_start;
    Waypoint w;
    if (p.curvature == 0.0) {
      w.x = p.x0 + u * std::cos(p.heading0);
      w.y = p.y0 + u * std::sin(p.heading0);
      w.v_max = spec.speed.v_cap;
    } else {
      const double h = p.heading0 + u * p.curvature;
      w.x = p.x0 + (std::sin(h) - std::sin(p.heading0)) / p.curvature;
      w.y = p.y0 + (std::cos(p.heading0) - std::cos(h)) / p.curvature;
      w.v_max = std::min(spec.speed.v_cap, std::sqrt(spec.speed.a_lat_max / std::abs(p.curvature)));
    }
    w.kappa = p.curvature;
    waypoints.push_back(w);
  }

  if (spec.speed.a_long_max > 0.0) {
    // Two sweeps in each direction settle the cyclic wrap.
    const double two_a_ds = 2.0 * spec.speed.a_long_max * ds;
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (std::size_t k = 1; k <= n; ++k) {
        auto& cur = waypoints[k % n];
        cur.v_max = std::min(cur.v_max, std::sqrt(waypoints[k - 1].v_max * waypoints[k - 1].v_max + two_a_ds));
      }
      for (std::size_t k = n; k-- > 0;) {
        auto& cur = waypoints[k];
        const auto& next = waypoints[(k + 1) % n];
        cur.v_max = std::min(cur.v_max, std::sqrt(next.v_max * next.v_max + two_a_ds));
      }
    }
  }
  return Raceline(std::move(waypoints), spec.half_width);
}

TrackKind parse_track_kind(std::string_view name) {
  if (name == "oval") return TrackKind::kOval;
  if (name == "rounded_rectangle") return TrackKind::kRoundedRectangle;
  throw RacelineError("unknown track kind '" + std::string(name) + "'");
}

}  // namespace rlpp
