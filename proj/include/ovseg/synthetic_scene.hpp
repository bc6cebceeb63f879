#pragma once

#include "ovseg/scene_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ovseg {

/// Planar rectangle origin + s * edge_u + t * edge_v, s, t in [0, 1].
struct SceneRect {
    Vec3 origin = Vec3::Zero();
    Vec3 edge_u = Vec3::UnitX();
    Vec3 edge_v = Vec3::UnitY();
    Vec3 normal = Vec3::UnitZ(); // outward, unit
    Rgb color{0, 0, 0};
    std::uint32_t label = 0;
};

struct RayHit {
    double t = 0.0;
    std::size_t rect = 0;
};

/// Nearest rectangle hit along origin + t * dir with t > t_min.
std::optional<RayHit> raycast(const std::vector<SceneRect>& rects, const Vec3& origin, const Vec3& dir,
                              double t_min = 1e-9);

struct SyntheticSceneConfig {
    double spacing = 0.01;  // point grid pitch, meters
    int n_views = 12;
    int width = 320;
    int height = 240;
    double focal = 260.0;
    double camera_radius = 2.4;
    double camera_height = 1.8;
};

/// Floor, a wall and three 0.4 m boxes (red, green, blue) sampled on a regular
/// grid, plus pinhole views on a ring around the boxes (inside the wall) whose
/// depth and color come from exact ray casts through the pixel centers.
struct SyntheticScene {
    std::vector<SceneRect> rects;
    PointCloud cloud;
    std::vector<std::uint32_t> labels; // per point, index into label_names
    std::vector<std::size_t> point_rect;
    std::vector<CameraView> views;
    std::vector<std::string> label_names;

    std::uint32_t label_of(const std::string& name) const;
    std::vector<PointIndex> points_with_label(std::uint32_t label) const;
    SceneBundle bundle() const;
};

SyntheticScene make_synthetic_scene(const SyntheticSceneConfig& cfg = {});

/// Camera looking from `eye` at `target` (x right, y down, z forward).
Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// Writes cloud.ply, rgb/ and depth/ PNGs and manifest.json; returns the manifest path.
std::filesystem::path write_synthetic_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

} // namespace ovseg
