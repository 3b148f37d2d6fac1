#pragma once

#include <cmath>

namespace scout {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Normalizes an angle into (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double norm_sq() const { return x * x + y * y; }
};

// Planar camera pose: position in world frame, heading in (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
};

// Body-frame relative motion: forward, left, heading change.
struct Action {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  double translation_norm() const { return std::hypot(dx, dy); }
};

struct ActionLimits {
  double max_lin = 0.25;   // per-component bound on dx, dy [m]
  double max_ang = kPi / 2.0;  // bound on dtheta [rad]
};

inline Action clamp_action(const Action& a, const ActionLimits& lim) {
  auto clip = [](double v, double b) { return v < -b ? -b : (v > b ? b : v); };
  return {clip(a.dx, lim.max_lin), clip(a.dy, lim.max_lin),
          clip(a.dtheta, lim.max_ang)};
}

// SE(2) group action: applies the body-frame motion a at pose p.
inline Pose compose(const Pose& p, const Action& a) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return {p.x + c * a.dx - s * a.dy, p.y + s * a.dx + c * a.dy,
          normalize_angle(p.theta + a.dtheta)};
}

// Inverse of compose: the body-frame action taking p_i to p_j.
inline Action relative_action(const Pose& pi, const Pose& pj) {
  const double c = std::cos(pi.theta);
  const double s = std::sin(pi.theta);
  const double wx = pj.x - pi.x;
  const double wy = pj.y - pi.y;
  return {c * wx + s * wy, -s * wx + c * wy,
          normalize_angle(pj.theta - pi.theta)};
}

}  // namespace scout
