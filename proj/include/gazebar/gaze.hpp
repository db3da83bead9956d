#pragma once

#include <array>

namespace gazebar {

/// Gaze direction as (pitch, yaw) in radians. Pitch is the vertical angle
/// (positive up), yaw the horizontal one.
struct GazeLabel {
  double pitch = 0.0;
  double yaw = 0.0;

  friend bool operator==(const GazeLabel&, const GazeLabel&) = default;
};

/// pitch in [-pi/2, pi/2], yaw in (-pi, pi], both finite.
bool is_valid(const GazeLabel& g) noexcept;

/// Unit vector (cos(pitch) sin(yaw), sin(pitch), cos(pitch) cos(yaw)).
/// (0, 0) looks down +z.
std::array<double, 3> gaze_to_vec(const GazeLabel& g) noexcept;

}  // namespace gazebar
