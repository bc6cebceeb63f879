#include "ovseg/synthetic_scene.hpp"

#include "ovseg/error.hpp"

#include <Eigen/Geometry>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace ovseg {

std::optional<RayHit> raycast(const std::vector<SceneRect>& rects, const Vec3& origin, const Vec3& dir, double t_min) {
    std::optional<RayHit> best;
    for (std::size_t i = 0; i < rects.size(); ++i) {
        const auto& r = rects[i];
        double denom = r.normal.dot(dir);
        if (std::abs(denom) < 1e-15) continue;
        double t = r.normal.dot(r.origin - origin) / denom;
        if (!(t > t_min) || (best && t >= best->t)) continue;
        Vec3 q = origin + t * dir - r.origin;
        double s = q.dot(r.edge_u) / r.edge_u.squaredNorm();
        double v = q.dot(r.edge_v) / r.edge_v.squaredNorm();
        if (s < 0 || s > 1 || v < 0 || v > 1) continue;
        best = RayHit{t, i};
    }
    return best;
}

Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    Vec3 f = (target - eye).normalized();
    Vec3 r = f.cross(up).normalized();
    Vec3 d = f.cross(r);
    Mat4 T = Mat4::Identity();
    T.block<3, 1>(0, 0) = r;
    T.block<3, 1>(0, 1) = d;
    T.block<3, 1>(0, 2) = f;
    T.block<3, 1>(0, 3) = eye;
    return T;
}

std::uint32_t SyntheticScene::label_of(const std::string& name) const {
    auto it = std::find(label_names.begin(), label_names.end(), name);
    if (it == label_names.end()) throw Error(ErrorCode::InvalidArgument, "unknown label " + name);
    return static_cast<std::uint32_t>(it - label_names.begin());
}

std::vector<PointIndex> SyntheticScene::points_with_label(std::uint32_t label) const {
    std::vector<PointIndex> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) out.push_back(static_cast<PointIndex>(i));
    return out;
}

SceneBundle SyntheticScene::bundle() const {
    SceneBundle b;
    b.cloud = cloud;
    b.views = views;
    return b;
}

namespace {

struct Box {
    Vec3 lo, hi;
    Rgb color;
    std::uint32_t label;
};

void add_box(std::vector<SceneRect>& rects, const Box& b) {
    Vec3 e = b.hi - b.lo;
    Vec3 ex{e.x(), 0, 0}, ey{0, e.y(), 0}, ez{0, 0, e.z()};
    auto add = [&](Vec3 o, Vec3 u, Vec3 v, Vec3 n) { rects.push_back({o, u, v, n, b.color, b.label}); };
    add(b.lo + ez, ex, ey, Vec3::UnitZ());   // top
    add(b.lo, ex, ez, -Vec3::UnitY());       // front (-y)
    add(b.lo + ey, ex, ez, Vec3::UnitY());   // back (+y)
    add(b.lo, ey, ez, -Vec3::UnitX());       // left (-x)
    add(b.lo + ex, ey, ez, Vec3::UnitX());   // right (+x)
}

} // namespace

SyntheticScene make_synthetic_scene(const SyntheticSceneConfig& cfg) {
    if (!(cfg.spacing > 0) || cfg.n_views < 1 || cfg.width < 1 || cfg.height < 1 || !(cfg.focal > 0))
        throw Error(ErrorCode::InvalidConfig, "invalid synthetic scene config");

    SyntheticScene s;
    s.label_names = {"floor", "wall", "red", "green", "blue"};
    const double wall_y = 2.8;
    const std::vector<Box> boxes = {
        {{-0.75, -0.1, 0.0}, {-0.35, 0.3, 0.4}, {220, 40, 40}, 2},
        {{-0.2, -0.55, 0.0}, {0.2, -0.15, 0.4}, {40, 200, 60}, 3},
        {{0.35, 0.15, 0.0}, {0.75, 0.55, 0.4}, {40, 70, 220}, 4},
    };
    s.rects.push_back({{-1.1, -1.1, 0.0}, {2.2, 0, 0}, {0, 2.2, 0}, Vec3::UnitZ(), {110, 110, 110}, 0});
    s.rects.push_back({{-1.0, wall_y, 0.3}, {2.0, 0, 0}, {0, 0, 0.8}, -Vec3::UnitY(), {215, 210, 200}, 1});
    for (const auto& b : boxes) add_box(s.rects, b);

    auto under_box = [&](const Vec3& p) {
        for (const auto& b : boxes)
            if (p.x() > b.lo.x() && p.x() < b.hi.x() && p.y() > b.lo.y() && p.y() < b.hi.y()) return true;
        return false;
    };
    for (std::size_t ri = 0; ri < s.rects.size(); ++ri) {
        const auto& r = s.rects[ri];
        int nu = std::max(1, static_cast<int>(std::floor(r.edge_u.norm() / cfg.spacing + 1e-9)));
        int nv = std::max(1, static_cast<int>(std::floor(r.edge_v.norm() / cfg.spacing + 1e-9)));
        for (int j = 0; j < nv; ++j)
            for (int i = 0; i < nu; ++i) {
                Vec3 p = r.origin + (i + 0.5) / nu * r.edge_u + (j + 0.5) / nv * r.edge_v;
                if (ri == 0 && under_box(p)) continue;
                s.cloud.positions.push_back(p);
                s.cloud.colors.push_back(r.color);
                s.cloud.normals.push_back(r.normal);
                s.cloud.normal_valid.push_back(1);
                s.labels.push_back(r.label);
                s.point_rect.push_back(ri);
            }
    }

    const Vec3 target{0.0, 0.1, 0.2};
    for (int k = 0; k < cfg.n_views; ++k) {
        // evenly spaced ring inside the wall, starting in front of it
        double a = 2.0 * std::numbers::pi * (0.75 + double(k) / cfg.n_views);
        Vec3 eye{cfg.camera_radius * std::cos(a), cfg.camera_radius * std::sin(a), cfg.camera_height};
        CameraView v;
        char id[16];
        std::snprintf(id, sizeof id, "view_%02d", k);
        v.view_id = id;
        v.intrinsics = {cfg.focal, cfg.focal, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, cfg.width, cfg.height};
        v.cam_to_world = look_at(eye, target);
        v.rgb = RgbImage(cfg.width, cfg.height, {0, 0, 0});
        v.depth = DepthImage(cfg.width, cfg.height);
        const Mat3 R = v.cam_to_world.topLeftCorner<3, 3>();
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x) {
                Vec3 dc{(x - v.intrinsics.cx) / cfg.focal, (y - v.intrinsics.cy) / cfg.focal, 1.0};
                auto hit = raycast(s.rects, eye, R * dc);
                if (!hit) continue;
                v.depth.at(x, y) = static_cast<float>(hit->t); // dc.z == 1, so t is camera z
                v.rgb.set(x, y, s.rects[hit->rect].color);
            }
        s.views.push_back(std::move(v));
    }
    return s;
}

std::filesystem::path write_synthetic_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "rgb");
    fs::create_directories(dir / "depth");
    write_point_cloud(dir / "cloud.ply", scene.cloud);
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : scene.views) {
        write_rgb_png(dir / "rgb" / (v.view_id + ".png"), v.rgb);
        write_depth_png(dir / "depth" / (v.view_id + ".png"), v.depth);
        std::vector<double> pose;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) pose.push_back(v.cam_to_world(r, c));
        const auto& in = v.intrinsics;
        views.push_back({{"id", v.view_id},
                         {"rgb", "rgb/" + v.view_id + ".png"},
                         {"depth", "depth/" + v.view_id + ".png"},
                         {"pose", pose},
                         {"intrinsics", {{"fx", in.fx}, {"fy", in.fy}, {"cx", in.cx}, {"cy", in.cy},
                                         {"width", in.width}, {"height", in.height}}}});
    }
    nlohmann::json manifest = {{"cloud", "cloud.ply"}, {"views", std::move(views)}};
    auto path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << manifest.dump(2) << '\n';
    // ground-truth labels ride alongside for oracles
    std::ofstream gt(dir / "labels.json");
    gt << nlohmann::json{{"names", scene.label_names}, {"labels", scene.labels}}.dump() << '\n';
    return path;
}

} // namespace ovseg
