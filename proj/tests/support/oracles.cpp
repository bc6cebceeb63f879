#include "oracles.hpp"

#include "ovseg/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace ovseg::testing {

std::filesystem::path fresh_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("ovseg-test-" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::uniform_int_distribution<int> c(0, 255);
    PointCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        cloud.positions.emplace_back(u(rng), u(rng), u(rng));
        cloud.colors.push_back({static_cast<std::uint8_t>(c(rng)), static_cast<std::uint8_t>(c(rng)),
                                static_cast<std::uint8_t>(c(rng))});
        Vec3 nrm{u(rng) - extent / 2, u(rng) - extent / 2, u(rng) - extent / 2};
        if (nrm.norm() < 1e-6) nrm = Vec3::UnitZ();
        cloud.normals.push_back(nrm.normalized());
        cloud.normal_valid.push_back(1);
    }
    return cloud;
}

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> v(dim);
    double n2 = 0;
    do {
        n2 = 0;
        for (auto& x : v) {
            x = g(rng);
            n2 += x * x;
        }
    } while (n2 < 1e-12);
    for (auto& x : v) x /= std::sqrt(n2);
    return v;
}

std::size_t hash_grid_voxel_count(const std::vector<Vec3>& points, double voxel) {
    struct KeyHash {
        std::size_t operator()(const std::array<long long, 3>& k) const {
            std::size_t h = 1469598103934665603ULL;
            for (auto v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
            return h;
        }
    };
    std::unordered_set<std::array<long long, 3>, KeyHash> keys;
    for (const auto& p : points)
        keys.insert({static_cast<long long>(std::floor(p.x() / voxel)), static_cast<long long>(std::floor(p.y() / voxel)),
                     static_cast<long long>(std::floor(p.z() / voxel))});
    return keys.size();
}

HomogeneousProjection homogeneous_project(const Vec3& p, const CameraView& view) {
    Eigen::Matrix<double, 3, 4> Rt;
    const Mat3 R = view.cam_to_world.topLeftCorner<3, 3>();
    const Vec3 t = view.cam_to_world.topRightCorner<3, 1>();
    Rt.leftCols<3>() = R.transpose();
    Rt.col(3) = -R.transpose() * t;
    Mat3 K = Mat3::Zero();
    K(0, 0) = view.intrinsics.fx;
    K(1, 1) = view.intrinsics.fy;
    K(0, 2) = view.intrinsics.cx;
    K(1, 2) = view.intrinsics.cy;
    K(2, 2) = 1.0;
    Eigen::Vector4d X(p.x(), p.y(), p.z(), 1.0);
    Vec3 x = K * (Rt * X);
    return {x.x() / x.z(), x.y() / x.z(), x.z()};
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

} // namespace

OrderedMergeOutcome ordered_merge_oracle(std::size_t n, const std::vector<SuperpointEdge>& edges,
                                         const std::vector<std::optional<std::vector<double>>>& features,
                                         const std::vector<std::size_t>& counts, double tau) {
    struct E {
        double sim;
        SuperpointEdge e;
    };
    std::vector<E> order;
    for (const auto& e : edges) {
        if (!features[e.first] || !features[e.second]) continue;
        order.push_back({dot(*features[e.first], *features[e.second]), e});
    }
    std::sort(order.begin(), order.end(), [](const E& a, const E& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.e < b.e;
    });

    std::vector<std::set<SuperpointId>> groups;
    for (SuperpointId i = 0; i < n; ++i) groups.push_back({i});
    auto group_of = [&](SuperpointId s) {
        for (std::size_t g = 0; g < groups.size(); ++g)
            if (groups[g].count(s)) return g;
        throw std::logic_error("unassigned superpoint");
    };
    // count-weighted mean of the members' features, recomputed from scratch
    auto representative = [&](const std::set<SuperpointId>& g) {
        std::vector<double> acc(features[*g.begin()]->size(), 0.0);
        double w = 0;
        for (auto s : g) {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += counts[s] * (*features[s])[i];
            w += counts[s];
        }
        for (auto& x : acc) x /= w;
        double nn = norm(acc);
        for (auto& x : acc) x /= nn;
        return acc;
    };

    OrderedMergeOutcome out;
    for (const auto& [sim, e] : order) {
        auto ga = group_of(e.first), gb = group_of(e.second);
        if (ga == gb) continue;
        double rep = dot(representative(groups[ga]), representative(groups[gb]));
        if (rep < tau) continue;
        out.decision_similarities.push_back(rep);
        groups[ga].insert(groups[gb].begin(), groups[gb].end());
        groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(gb));
    }
    for (const auto& g : groups) {
        out.groups.insert(g);
        if (g.size() > 1) out.merged_features[g] = representative(g);
    }
    return out;
}

std::set<std::set<PointIndex>> density_cluster_oracle(const std::vector<PointIndex>& points,
                                                      const std::vector<Vec3>& positions, double eps,
                                                      std::size_t min_size) {
    std::vector<PointIndex> pts(points);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    auto d2 = [&](std::size_t i, std::size_t j) { return (positions[pts[i]] - positions[pts[j]]).squaredNorm(); };
    const double e2 = eps * eps;

    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) c += d2(i, j) <= e2;
        core[i] = c >= min_size;
    }
    // components of the core graph by repeated relabeling to the minimum
    std::vector<long> label(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (core[i]) label[i] = static_cast<long>(i);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (core[i] && core[j] && d2(i, j) <= e2 && label[j] < label[i]) {
                    label[i] = label[j];
                    changed = true;
                }
    }
    std::vector<long> final_label(label);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = 1e300;
        for (std::size_t j = 0; j < n; ++j) {
            if (!core[j] || d2(i, j) > e2) continue;
            // strict: an equally near core point with a higher index does not win
            if (d2(i, j) < best) {
                best = d2(i, j);
                final_label[i] = label[j];
            }
        }
    }
    std::map<long, std::set<PointIndex>> clusters;
    for (std::size_t i = 0; i < n; ++i)
        if (final_label[i] >= 0) clusters[final_label[i]].insert(pts[i]);
    std::set<std::set<PointIndex>> out;
    for (auto& [l, c] : clusters)
        if (c.size() >= min_size) out.insert(c);
    return out;
}

FeatureVector CountingProvider::embed_image(const RgbImage& image) {
    ++images;
    return inner_.embed_image(image);
}

FeatureVector CountingProvider::embed_text(std::string_view text) {
    ++texts;
    return inner_.embed_text(text);
}

Mask CountingProvider::segment(const RgbImage& image, std::span<const Pixel> prompts) {
    long n = ++segments;
    long limit = fail_after_.load();
    if (limit >= 0 && n > limit) throw Error(ErrorCode::ProviderUnavailable, "injected provider failure " + tag_);
    return inner_.segment(image, prompts);
}

ProviderInfo CountingProvider::info() {
    ++infos;
    return inner_.info();
}

std::optional<bool> raycast_visibility(const std::vector<SceneRect>& rects, const Vec3& p, const Vec3& n,
                                       const CameraView& view, double band, double edge_jump, double slope_band) {
    auto h = homogeneous_project(p, view);
    if (!(h.w > 0)) return std::nullopt;
    double u = h.u, v = h.v;
    const auto& in = view.intrinsics;
    if (!(u >= 0 && u < in.width && v >= 0 && v < in.height)) return std::nullopt;
    int x = std::min(static_cast<int>(std::floor(u + 0.5)), in.width - 1);
    int y = std::min(static_cast<int>(std::floor(v + 0.5)), in.height - 1);
    float lo = std::numeric_limits<float>::infinity(), hi = 0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            int xx = std::clamp(x + dx, 0, in.width - 1), yy = std::clamp(y + dy, 0, in.height - 1);
            float d = view.depth.at(xx, yy);
            if (!(d > 0)) return std::nullopt;
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    if (hi - lo > edge_jump) return std::nullopt;

    Vec3 eye = view.cam_to_world.topRightCorner<3, 1>();
    Vec3 through = view.cam_to_world.topLeftCorner<3, 3>() * Vec3((x - in.cx) / in.fx, (y - in.cy) / in.fy, 1.0);
    double denom = n.dot(through);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    if (std::abs(n.dot(p - eye) / denom - h.w) > slope_band) return std::nullopt;

    Vec3 dir = p - eye;
    double dist = dir.norm();
    auto hit = raycast(rects, eye, dir / dist);
    auto hit_px = raycast(rects, eye, through.normalized());
    if (!hit_px || (hit && hit->rect != hit_px->rect)) return std::nullopt;
    if (!hit || hit->t >= dist - 1e-6) return true;
    if (hit->t < dist - band) return false;
    return std::nullopt;
}

} // namespace ovseg::testing
