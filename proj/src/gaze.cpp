#include "gazebar/gaze.hpp"

#include <cmath>
#include <numbers>

namespace gazebar {

bool is_valid(const GazeLabel& g) noexcept {
  constexpr double half_pi = std::numbers::pi / 2.0;
  return std::isfinite(g.pitch) && std::isfinite(g.yaw) && g.pitch >= -half_pi && g.pitch <= half_pi &&
         g.yaw > -std::numbers::pi && g.yaw <= std::numbers::pi;
}

std::array<double, 3> gaze_to_vec(const GazeLabel& g) noexcept {
  const double cp = std::cos(g.pitch);
  return {cp * std::sin(g.yaw), std::sin(g.pitch), cp * std::cos(g.yaw)};
}

}  // namespace gazebar
