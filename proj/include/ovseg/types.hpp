#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>

namespace ovseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

using Rgb = std::array<std::uint8_t, 3>;
using PointIndex = std::uint32_t;
using SuperpointId = std::uint32_t;

/// Continuous pixel coordinates; integer values are pixel centers.
struct Pixel {
    double u = 0.0;
    double v = 0.0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
};

} // namespace ovseg
