#include "ovseg/visibility.hpp"

#include "ovseg/error.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace ovseg {

void OcclusionConfig::validate() const {
    if (!(abs_tolerance >= 0) || !(rel_tolerance >= 0))
        throw Error(ErrorCode::InvalidConfig, "occlusion tolerances must be non-negative");
}

namespace {

struct WorldToCamera {
    Mat3 rt;
    Vec3 t;
    explicit WorldToCamera(const CameraView& view)
        : rt(view.cam_to_world.topLeftCorner<3, 3>().transpose()), t(view.cam_to_world.topRightCorner<3, 1>()) {}
    Vec3 operator()(const Vec3& p) const { return rt * (p - t); }
};

std::optional<Projection> project_camera(const Vec3& c, const Intrinsics& in) {
    if (!(c.z() > 0)) return std::nullopt;
    double u = in.fx * c.x() / c.z() + in.cx;
    double v = in.fy * c.y() / c.z() + in.cy;
    if (!(u >= 0 && u < in.width && v >= 0 && v < in.height)) return std::nullopt;
    return Projection{{u, v}, c.z()};
}

} // namespace

std::optional<Projection> project_point(const Vec3& p, const CameraView& view) {
    return project_camera(WorldToCamera(view)(p), view.intrinsics);
}

Vec3 unproject(const Pixel& pixel, double cam_depth, const CameraView& view) {
    const auto& in = view.intrinsics;
    Vec3 c{(pixel.u - in.cx) / in.fx * cam_depth, (pixel.v - in.cy) / in.fy * cam_depth, cam_depth};
    return view.cam_to_world.topLeftCorner<3, 3>() * c + view.cam_to_world.topRightCorner<3, 1>();
}

bool is_visible(const Projection& proj, const CameraView& view, const OcclusionConfig& cfg) {
    int x = std::min(static_cast<int>(std::floor(proj.pixel.u + 0.5)), view.depth.width - 1);
    int y = std::min(static_cast<int>(std::floor(proj.pixel.v + 0.5)), view.depth.height - 1);
    double d = view.depth.at(x, y);
    if (!(d > 0)) return false;
    return proj.cam_depth <= d + std::max(cfg.abs_tolerance, cfg.rel_tolerance * d);
}

VisibilityTable build_visibility(const SuperpointGraph& graph, const PointCloud& cloud,
                                 std::span<const CameraView> views, const OcclusionConfig& cfg,
                                 std::optional<std::span<const SuperpointId>> subset) {
    cfg.validate();
    if (views.empty()) throw Error(ErrorCode::NoViews, "visibility needs at least one view");

    std::vector<SuperpointId> sps;
    if (subset) {
        sps.assign(subset->begin(), subset->end());
    } else {
        sps.resize(graph.size());
        std::iota(sps.begin(), sps.end(), 0U);
    }

    VisibilityTable table;
    for (const auto& v : views) table.view_ids.push_back(v.view_id);
    table.visible.assign(graph.size(), std::vector<std::vector<VisiblePoint>>(views.size()));

    auto per_view = [&](std::size_t vi) {
        const auto& view = views[vi];
        WorldToCamera to_cam(view);
        std::vector<std::vector<VisiblePoint>> rows(sps.size());
        for (std::size_t k = 0; k < sps.size(); ++k) {
            for (auto p : graph.superpoints[sps[k]].point_indices) {
                auto proj = project_camera(to_cam(cloud.positions[p]), view.intrinsics);
                if (proj && is_visible(*proj, view, cfg)) rows[k].push_back({p, proj->pixel});
            }
        }
        return rows;
    };

    std::vector<std::future<std::vector<std::vector<VisiblePoint>>>> jobs;
    for (std::size_t vi = 0; vi < views.size(); ++vi) jobs.push_back(std::async(std::launch::async, per_view, vi));
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        auto rows = jobs[vi].get();
        for (std::size_t k = 0; k < sps.size(); ++k) table.visible[sps[k]][vi] = std::move(rows[k]);
    }
    return table;
}

std::vector<std::size_t> top_k_views(const VisibilityTable& table, SuperpointId sp, int k, int min_visible) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "top-k needs k >= 1");
    std::vector<std::size_t> order;
    const auto& row = table.visible[sp];
    for (std::size_t v = 0; v < row.size(); ++v)
        if (row[v].size() >= static_cast<std::size_t>(std::max(min_visible, 0))) order.push_back(v);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row[a].size() != row[b].size()) return row[a].size() > row[b].size();
        return table.view_ids[a] < table.view_ids[b];
    });
    if (order.size() > static_cast<std::size_t>(k)) order.resize(static_cast<std::size_t>(k));
    return order;
}

void write_visibility(BinaryWriter& w, const VisibilityTable& table) {
    w.put<std::uint64_t>(table.view_ids.size());
    for (const auto& id : table.view_ids) w.put_string(id);
    w.put<std::uint64_t>(table.visible.size());
    for (const auto& row : table.visible) {
        w.put<std::uint64_t>(row.size());
        for (const auto& cell : row) {
            std::vector<std::uint32_t> idx;
            std::vector<double> px;
            for (const auto& vp : cell) {
                idx.push_back(vp.point);
                px.insert(px.end(), {vp.pixel.u, vp.pixel.v});
            }
            w.put_array<std::uint32_t>(idx);
            w.put_array<double>(px);
        }
    }
}

VisibilityTable read_visibility(BinaryReader& r) {
    VisibilityTable t;
    auto nv = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < nv; ++i) t.view_ids.push_back(r.get_string());
    auto ns = r.get<std::uint64_t>();
    t.visible.resize(ns);
    for (auto& row : t.visible) {
        auto nr = r.get<std::uint64_t>();
        if (nr != 0 && nr != nv) throw Error(ErrorCode::CorruptCache, "visibility row has the wrong view count");
        row.resize(nr);
        for (auto& cell : row) {
            auto idx = r.get_array<std::uint32_t>();
            auto px = r.get_array<double>();
            if (px.size() != 2 * idx.size()) throw Error(ErrorCode::CorruptCache, "visibility cell malformed");
            cell.resize(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) cell[k] = {idx[k], {px[2 * k], px[2 * k + 1]}};
        }
    }
    return t;
}

} // namespace ovseg
