#pragma once

#include "ovseg/binary_io.hpp"
#include "ovseg/scene_io.hpp"
#include "ovseg/superpoint.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ovseg {

struct Projection {
    Pixel pixel;
    double cam_depth = 0.0; // camera-frame z, meters
};

struct VisiblePoint {
    PointIndex point = 0;
    Pixel pixel;

    friend bool operator==(const VisiblePoint&, const VisiblePoint&) = default;
};

struct OcclusionConfig {
    double abs_tolerance = 0.02;
    double rel_tolerance = 0.01;

    void validate() const;
};

/// Visible member points per (superpoint, view). Views are addressed by their
/// index in the (id-sorted) scene view list.
struct VisibilityTable {
    std::vector<std::string> view_ids;
    std::vector<std::vector<std::vector<VisiblePoint>>> visible; // [superpoint][view]

    std::size_t count(SuperpointId sp, std::size_t view) const { return visible[sp][view].size(); }
    std::span<const VisiblePoint> points(SuperpointId sp, std::size_t view) const { return visible[sp][view]; }

    friend bool operator==(const VisibilityTable&, const VisibilityTable&) = default;
};

/// Pinhole projection. Returns nullopt behind the camera or outside the
/// half-open image rectangle [0, width) x [0, height).
std::optional<Projection> project_point(const Vec3& p, const CameraView& view);

/// Inverse of project_point for a known camera-frame depth.
Vec3 unproject(const Pixel& pixel, double cam_depth, const CameraView& view);

/// Nearest-pixel depth test: visible iff cam_depth <= d + max(abs_tol, rel_tol * d).
/// Invalid (zero) depth samples reject the point.
bool is_visible(const Projection& proj, const CameraView& view, const OcclusionConfig& cfg);

/// Projects every member of every superpoint (or only of `subset`, when given)
/// into every view. Rows for superpoints outside the subset stay empty.
VisibilityTable build_visibility(const SuperpointGraph& graph, const PointCloud& cloud,
                                 std::span<const CameraView> views, const OcclusionConfig& cfg,
                                 std::optional<std::span<const SuperpointId>> subset = std::nullopt);

/// View indices with at least min_visible points, by count descending then view
/// id ascending, truncated to k.
std::vector<std::size_t> top_k_views(const VisibilityTable& table, SuperpointId sp, int k, int min_visible);

void write_visibility(BinaryWriter& w, const VisibilityTable& table);
VisibilityTable read_visibility(BinaryReader& r);

} // namespace ovseg
