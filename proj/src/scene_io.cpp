#include "ovseg/scene_io.hpp"

#include "ovseg/error.hpp"
#include "ovseg/kdtree.hpp"
#include "ovseg/ply.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

namespace ovseg {

namespace fs = std::filesystem;
using nlohmann::json;

bool PointCloud::all_normals_valid() const {
    return std::all_of(normal_valid.begin(), normal_valid.end(), [](auto v) { return v != 0; });
}

void PointCloud::resize(std::size_t n) {
    positions.resize(n, Vec3::Zero());
    colors.resize(n, Rgb{0, 0, 0});
    normals.resize(n, Vec3::UnitZ());
    normal_valid.resize(n, 0);
}

void PointCloud::validate() const {
    const auto n = positions.size();
    if (colors.size() != n || normals.size() != n || normal_valid.size() != n)
        throw Error(ErrorCode::MalformedManifest, "point cloud attribute lengths disagree");
    for (std::size_t i = 0; i < n; ++i) {
        if (!positions[i].allFinite())
            throw Error(ErrorCode::MalformedManifest, "non-finite position at index " + std::to_string(i));
        if (normal_valid[i] && std::abs(normals[i].norm() - 1.0) > 1e-4)
            throw Error(ErrorCode::MalformedManifest, "non-unit normal at index " + std::to_string(i));
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

PointCloud read_point_cloud(const fs::path& path) {
    auto table = read_ply(path);
    PointCloud cloud;
    cloud.resize(table.vertex_count);
    const auto& x = table.column("x");
    const auto& y = table.column("y");
    const auto& z = table.column("z");
    for (std::size_t i = 0; i < table.vertex_count; ++i) cloud.positions[i] = {x[i], y[i], z[i]};

    if (table.has("red") && table.has("green") && table.has("blue")) {
        const auto& r = table.column("red");
        const auto& g = table.column("green");
        const auto& b = table.column("blue");
        auto to8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0)); };
        for (std::size_t i = 0; i < table.vertex_count; ++i) cloud.colors[i] = {to8(r[i]), to8(g[i]), to8(b[i])};
    }
    if (table.has("nx") && table.has("ny") && table.has("nz")) {
        const auto& nx = table.column("nx");
        const auto& ny = table.column("ny");
        const auto& nz = table.column("nz");
        for (std::size_t i = 0; i < table.vertex_count; ++i) {
            Vec3 n{nx[i], ny[i], nz[i]};
            if (n.allFinite() && std::abs(n.norm() - 1.0) <= 1e-4) {
                cloud.normals[i] = n;
                cloud.normal_valid[i] = 1;
            }
        }
    }
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (!cloud.positions[i].allFinite())
            throw Error(ErrorCode::MalformedManifest, path.string() + ": non-finite position at " + std::to_string(i));
    return cloud;
}

void write_point_cloud(const fs::path& path, const PointCloud& cloud) {
    std::vector<PlyColumn> cols;
    const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        PlyColumn c{axes[a], PlyType::Float64, {}};
        c.values.reserve(cloud.size());
        for (const auto& p : cloud.positions) c.values.push_back(p[a]);
        cols.push_back(std::move(c));
    }
    const char* chans[] = {"red", "green", "blue"};
    for (int a = 0; a < 3; ++a) {
        PlyColumn c{chans[a], PlyType::UInt8, {}};
        for (const auto& col : cloud.colors) c.values.push_back(col[static_cast<std::size_t>(a)]);
        cols.push_back(std::move(c));
    }
    if (cloud.all_normals_valid()) {
        const char* ns[] = {"nx", "ny", "nz"};
        for (int a = 0; a < 3; ++a) {
            PlyColumn c{ns[a], PlyType::Float64, {}};
            for (const auto& n : cloud.normals) c.values.push_back(n[a]);
            cols.push_back(std::move(c));
        }
    }
    write_ply(path, cols);
}

namespace {

TriangleMesh read_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, path.string());
    TriangleMesh mesh;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw == "v") {
            Vec3 p;
            ss >> p.x() >> p.y() >> p.z();
            if (!ss) throw Error(ErrorCode::MalformedManifest, path.string() + ":" + std::to_string(line_no) + ": bad vertex");
            mesh.vertices.push_back(p);
        } else if (kw == "f") {
            std::vector<std::uint32_t> idx;
            std::string tok;
            while (ss >> tok) {
                long v = std::stol(tok.substr(0, tok.find('/')));
                long n = static_cast<long>(mesh.vertices.size());
                long resolved = v < 0 ? n + v : v - 1;
                if (resolved < 0 || resolved >= n)
                    throw Error(ErrorCode::MalformedManifest, path.string() + ":" + std::to_string(line_no) + ": face index out of range");
                idx.push_back(static_cast<std::uint32_t>(resolved));
            }
            for (std::size_t k = 1; k + 1 < idx.size(); ++k) mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    return mesh;
}

} // namespace

TriangleMesh read_mesh(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, path.string());
    TriangleMesh mesh;
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") {
        mesh = read_obj(path);
    } else {
        auto table = read_ply(path);
        const auto& x = table.column("x");
        const auto& y = table.column("y");
        const auto& z = table.column("z");
        for (std::size_t i = 0; i < table.vertex_count; ++i) mesh.vertices.emplace_back(x[i], y[i], z[i]);
        mesh.triangles = std::move(table.triangles);
    }
    for (const auto& t : mesh.triangles)
        for (auto v : t)
            if (v >= mesh.vertices.size())
                throw Error(ErrorCode::MalformedManifest, path.string() + ": triangle index out of range");
    return mesh;
}

void attach_mesh(TriangleMesh& mesh, const PointCloud& cloud, double voxel_size) {
    if (cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "cannot attach a mesh to an empty cloud");
    KdTree tree(cloud.positions);
    mesh.vertex_to_point.resize(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        auto [idx, dist] = tree.knn(mesh.vertices[i], 1).front();
        if (dist > 2.0 * voxel_size)
            throw Error(ErrorCode::MalformedManifest,
                        "mesh vertex " + std::to_string(i) + " is " + std::to_string(dist) + " m from the cloud");
        mesh.vertex_to_point[i] = idx;
    }
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

void validate_view(const CameraView& view) {
    const auto& in = view.intrinsics;
    const std::string who = "view '" + view.view_id + "'";
    if (view.rgb.width != view.depth.width || view.rgb.height != view.depth.height)
        throw Error(ErrorCode::DimensionMismatch,
                    who + ": rgb " + std::to_string(view.rgb.width) + "x" + std::to_string(view.rgb.height) +
                        " vs depth " + std::to_string(view.depth.width) + "x" + std::to_string(view.depth.height));
    if (in.width != view.rgb.width || in.height != view.rgb.height)
        throw Error(ErrorCode::DimensionMismatch, who + ": intrinsics size disagrees with image size");
    if (!(in.fx > 0) || !(in.fy > 0)) throw Error(ErrorCode::MalformedManifest, who + ": fx/fy must be positive");
    if (!(in.cx >= 0 && in.cx < in.width) || !(in.cy >= 0 && in.cy < in.height))
        throw Error(ErrorCode::MalformedManifest, who + ": principal point outside the image");

    const Mat4& T = view.cam_to_world;
    if (!T.allFinite()) throw Error(ErrorCode::InvalidPose, who + ": non-finite pose");
    Mat3 R = T.topLeftCorner<3, 3>();
    double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-5) throw Error(ErrorCode::InvalidPose, who + ": rotation is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-5) throw Error(ErrorCode::InvalidPose, who + ": rotation determinant != +1");
    if (T.row(3).cwiseAbs().head<3>().maxCoeff() > 1e-9 || std::abs(T(3, 3) - 1.0) > 1e-9)
        throw Error(ErrorCode::InvalidPose, who + ": last pose row must be 0 0 0 1");
}

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw Error(ErrorCode::MalformedManifest, where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::MalformedManifest, where + ": field '" + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& rel) {
    fs::path p(rel);
    return p.is_absolute() ? p : base / p;
}

fs::path existing(const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorCode::MissingFile, p.string());
    return p;
}

Intrinsics parse_intrinsics(const json& j, const std::string& where) {
    Intrinsics in;
    in.fx = field<double>(j, "fx", where);
    in.fy = field<double>(j, "fy", where);
    in.cx = field<double>(j, "cx", where);
    in.cy = field<double>(j, "cy", where);
    in.width = j.value("width", 0);
    in.height = j.value("height", 0);
    return in;
}

CameraView load_view(const json& jv, const std::optional<Intrinsics>& fallback, const fs::path& base, std::size_t index) {
    const std::string where = "views[" + std::to_string(index) + "]";
    if (!jv.is_object()) throw Error(ErrorCode::MalformedManifest, where + ": expected an object");
    CameraView view;
    view.view_id = field<std::string>(jv, "id", where);

    auto pose = field<std::vector<double>>(jv, "pose", where);
    if (pose.size() != 16) throw Error(ErrorCode::MalformedManifest, where + ": pose must have 16 numbers");
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) view.cam_to_world(r, c) = pose[static_cast<std::size_t>(4 * r + c)];

    std::optional<Intrinsics> in;
    if (jv.contains("intrinsics")) in = parse_intrinsics(jv.at("intrinsics"), where + ".intrinsics");
    else in = fallback;
    if (!in) throw Error(ErrorCode::MalformedManifest, where + ": missing field 'intrinsics'");

    view.rgb = read_rgb_png(existing(resolve(base, field<std::string>(jv, "rgb", where))));
    view.depth = read_depth_png(existing(resolve(base, field<std::string>(jv, "depth", where))));
    if ((in->width != 0 && in->width != view.rgb.width) || (in->height != 0 && in->height != view.rgb.height))
        throw Error(ErrorCode::DimensionMismatch, where + ": intrinsics size disagrees with the rgb image");
    in->width = view.rgb.width;
    in->height = view.rgb.height;
    view.intrinsics = *in;
    validate_view(view);
    return view;
}

} // namespace

SceneBundle load_scene(const fs::path& manifest_path, double voxel_size) {
    if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidArgument, "voxel_size must be positive");
    std::ifstream in(manifest_path);
    if (!in) throw Error(ErrorCode::MissingFile, manifest_path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedManifest, std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::MalformedManifest, "manifest root must be an object");
    const auto base = manifest_path.parent_path();

    SceneBundle bundle;
    bundle.voxel_size = voxel_size;
    bundle.cloud = read_point_cloud(existing(resolve(base, field<std::string>(j, "cloud", "manifest"))));
    if (j.contains("mesh") && !j.at("mesh").is_null())
        bundle.mesh = read_mesh(existing(resolve(base, field<std::string>(j, "mesh", "manifest"))));

    std::optional<Intrinsics> fallback;
    if (j.contains("intrinsics")) fallback = parse_intrinsics(j.at("intrinsics"), "manifest.intrinsics");

    if (j.contains("views")) {
        const auto& jviews = j.at("views");
        if (!jviews.is_array()) throw Error(ErrorCode::MalformedManifest, "manifest: 'views' must be an array");
        std::vector<std::future<CameraView>> jobs;
        for (std::size_t i = 0; i < jviews.size(); ++i)
            jobs.push_back(std::async(std::launch::async, load_view, std::cref(jviews[i]), std::cref(fallback),
                                      std::cref(base), i));
        for (auto& job : jobs) bundle.views.push_back(job.get());
    }
    std::sort(bundle.views.begin(), bundle.views.end(),
              [](const CameraView& a, const CameraView& b) { return a.view_id < b.view_id; });
    for (std::size_t i = 1; i < bundle.views.size(); ++i)
        if (bundle.views[i].view_id == bundle.views[i - 1].view_id)
            throw Error(ErrorCode::MalformedManifest, "duplicate view id '" + bundle.views[i].view_id + "'");
    return bundle;
}

// ---------------------------------------------------------------------------
// Downsampling and normals
// ---------------------------------------------------------------------------

namespace {

using VoxelKey = std::array<std::int64_t, 3>;

VoxelKey voxel_key(const Vec3& p, double size) {
    return {static_cast<std::int64_t>(std::floor(p.x() / size)), static_cast<std::int64_t>(std::floor(p.y() / size)),
            static_cast<std::int64_t>(std::floor(p.z() / size))};
}

/// Smallest-eigenvalue eigenvector of the neighborhood covariance, or nullopt if
/// the neighborhood spans less than a plane.
std::optional<Vec3> pca_normal(const std::vector<Vec3>& pts) {
    if (pts.size() < 3) return std::nullopt;
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
        Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    auto ev = es.eigenvalues();
    if (!(ev[2] > 0) || ev[1] <= 1e-10 * ev[2]) return std::nullopt;
    return es.eigenvectors().col(0).normalized();
}

} // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidArgument, "voxel_size must be positive");
    if (cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "voxel_downsample on an empty cloud");

    const auto n = cloud.size();
    std::vector<VoxelKey> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = voxel_key(cloud.positions[i], voxel_size);
    std::vector<PointIndex> order(n);
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&](PointIndex a, PointIndex b) {
        return keys[a] < keys[b] || (keys[a] == keys[b] && a < b);
    });

    // group boundaries in `order`
    std::vector<std::size_t> starts;
    std::vector<VoxelKey> occupied;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0 || keys[order[i]] != keys[order[i - 1]]) {
            starts.push_back(i);
            occupied.push_back(keys[order[i]]);
        }
    }
    starts.push_back(n);

    auto members_of = [&](const VoxelKey& k, std::vector<Vec3>& out) {
        auto it = std::lower_bound(occupied.begin(), occupied.end(), k);
        if (it == occupied.end() || *it != k) return;
        auto g = static_cast<std::size_t>(it - occupied.begin());
        for (auto i = starts[g]; i < starts[g + 1]; ++i) out.push_back(cloud.positions[order[i]]);
    };

    PointCloud out;
    out.resize(occupied.size());
    std::vector<Vec3> neighborhood;
    for (std::size_t g = 0; g < occupied.size(); ++g) {
        Vec3 sum = Vec3::Zero();
        Vec3 nsum = Vec3::Zero();
        std::array<std::uint64_t, 3> csum{0, 0, 0};
        std::size_t nvalid = 0;
        const auto count = starts[g + 1] - starts[g];
        for (auto i = starts[g]; i < starts[g + 1]; ++i) {
            auto idx = order[i];
            sum += cloud.positions[idx];
            for (std::size_t c = 0; c < 3; ++c) csum[c] += cloud.colors[idx][c];
            if (cloud.normal_valid[idx]) {
                nsum += cloud.normals[idx];
                ++nvalid;
            }
        }
        out.positions[g] = sum / static_cast<double>(count);
        for (std::size_t c = 0; c < 3; ++c)
            out.colors[g][c] = static_cast<std::uint8_t>((2 * csum[c] + count) / (2 * count)); // half-up

        if (nvalid == 0) continue; // stays flagged invalid; estimated later
        if (nvalid == 1) { // already unit; renormalizing would perturb the last bits
            out.normals[g] = nsum;
            out.normal_valid[g] = 1;
            continue;
        }
        Vec3 mean = nsum / static_cast<double>(nvalid);
        if (mean.norm() >= 1e-3) {
            out.normals[g] = mean.normalized();
            out.normal_valid[g] = 1;
            continue;
        }
        neighborhood.clear();
        const auto& k = occupied[g];
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) members_of({k[0] + dx, k[1] + dy, k[2] + dz}, neighborhood);
        if (auto nrm = pca_normal(neighborhood)) {
            out.normals[g] = *nrm;
            out.normal_valid[g] = 1;
        }
    }
    return out;
}

namespace {

PointCloud estimate_normals_impl(const PointCloud& cloud, int k, bool only_invalid, NormalReport* report) {
    if (k < 3) throw Error(ErrorCode::InvalidArgument, "normal estimation needs k >= 3");
    if (cloud.size() < static_cast<std::size_t>(k))
        throw Error(ErrorCode::InvalidArgument, "cloud has fewer points than k");
    PointCloud out = cloud;
    KdTree tree(cloud.positions);
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud.positions) centroid += p;
    centroid /= static_cast<double>(cloud.size());

    NormalReport rep;
    std::vector<Vec3> nbrs;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (only_invalid && cloud.normal_valid[i]) continue;
        nbrs.clear();
        for (auto [idx, d] : tree.knn(cloud.positions[i], static_cast<std::size_t>(k))) nbrs.push_back(cloud.positions[idx]);
        auto n = pca_normal(nbrs);
        if (!n) {
            out.normals[i] = Vec3::UnitZ();
            out.normal_valid[i] = 0;
            ++rep.rank_deficient;
            continue;
        }
        // orient away from the cloud centroid; fall back to +z when that is ambiguous
        double s = n->dot(cloud.positions[i] - centroid);
        if (std::abs(s) < 1e-12) s = n->z();
        if (s < 0) *n = -*n;
        out.normals[i] = *n;
        out.normal_valid[i] = 1;
    }
    if (report) *report = rep;
    return out;
}

} // namespace

PointCloud estimate_normals(const PointCloud& cloud, int k, NormalReport* report) {
    return estimate_normals_impl(cloud, k, false, report);
}

PointCloud fill_missing_normals(const PointCloud& cloud, int k, NormalReport* report) {
    if (cloud.all_normals_valid()) {
        if (report) *report = {};
        return cloud;
    }
    return estimate_normals_impl(cloud, k, true, report);
}

// ---------------------------------------------------------------------------
// Binary cache
// ---------------------------------------------------------------------------

void write_cloud(BinaryWriter& w, const PointCloud& cloud) {
    std::vector<double> pos, nrm;
    std::vector<std::uint8_t> col;
    pos.reserve(3 * cloud.size());
    nrm.reserve(3 * cloud.size());
    col.reserve(3 * cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int a = 0; a < 3; ++a) {
            pos.push_back(cloud.positions[i][a]);
            nrm.push_back(cloud.normals[i][a]);
            col.push_back(cloud.colors[i][static_cast<std::size_t>(a)]);
        }
    w.put_array<double>(pos);
    w.put_array<std::uint8_t>(col);
    w.put_array<double>(nrm);
    w.put_array<std::uint8_t>(cloud.normal_valid);
}

PointCloud read_cloud(BinaryReader& r) {
    auto pos = r.get_array<double>();
    auto col = r.get_array<std::uint8_t>();
    auto nrm = r.get_array<double>();
    auto valid = r.get_array<std::uint8_t>();
    const auto n = valid.size();
    if (pos.size() != 3 * n || col.size() != 3 * n || nrm.size() != 3 * n)
        throw Error(ErrorCode::CorruptCache, "cloud arrays disagree in length");
    PointCloud cloud;
    cloud.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.positions[i] = {pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]};
        cloud.normals[i] = {nrm[3 * i], nrm[3 * i + 1], nrm[3 * i + 2]};
        cloud.colors[i] = {col[3 * i], col[3 * i + 1], col[3 * i + 2]};
    }
    cloud.normal_valid = std::move(valid);
    return cloud;
}

void write_views(BinaryWriter& w, const std::vector<CameraView>& views) {
    w.put<std::uint64_t>(views.size());
    for (const auto& v : views) {
        w.put_string(v.view_id);
        const auto& in = v.intrinsics;
        w.put(in.fx);
        w.put(in.fy);
        w.put(in.cx);
        w.put(in.cy);
        w.put<std::int32_t>(in.width);
        w.put<std::int32_t>(in.height);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) w.put(v.cam_to_world(r, c));
        w.put<std::int32_t>(v.rgb.width);
        w.put<std::int32_t>(v.rgb.height);
        w.put_array<std::uint8_t>(v.rgb.data);
        w.put<std::int32_t>(v.depth.width);
        w.put<std::int32_t>(v.depth.height);
        w.put_array<float>(v.depth.data);
    }
}

std::vector<CameraView> read_views(BinaryReader& r) {
    auto n = r.get<std::uint64_t>();
    std::vector<CameraView> views;
    for (std::uint64_t i = 0; i < n; ++i) {
        CameraView v;
        v.view_id = r.get_string();
        v.intrinsics.fx = r.get<double>();
        v.intrinsics.fy = r.get<double>();
        v.intrinsics.cx = r.get<double>();
        v.intrinsics.cy = r.get<double>();
        v.intrinsics.width = r.get<std::int32_t>();
        v.intrinsics.height = r.get<std::int32_t>();
        for (int row = 0; row < 4; ++row)
            for (int c = 0; c < 4; ++c) v.cam_to_world(row, c) = r.get<double>();
        v.rgb.width = r.get<std::int32_t>();
        v.rgb.height = r.get<std::int32_t>();
        v.rgb.data = r.get_array<std::uint8_t>();
        v.depth.width = r.get<std::int32_t>();
        v.depth.height = r.get<std::int32_t>();
        v.depth.data = r.get_array<float>();
        if (v.rgb.data.size() != static_cast<std::size_t>(v.rgb.width) * v.rgb.height * 3 ||
            v.depth.data.size() != static_cast<std::size_t>(v.depth.width) * v.depth.height)
            throw Error(ErrorCode::CorruptCache, "view image size disagrees with its data");
        views.push_back(std::move(v));
    }
    return views;
}

void save_scene_cache(const SceneBundle& bundle, const fs::path& path) {
    BinaryWriter w;
    w.put_header(CacheKind::Scene);
    w.put(bundle.voxel_size);
    write_cloud(w, bundle.cloud);
    w.put<std::uint8_t>(bundle.mesh ? 1 : 0);
    if (bundle.mesh) {
        std::vector<double> verts;
        for (const auto& v : bundle.mesh->vertices) verts.insert(verts.end(), {v.x(), v.y(), v.z()});
        std::vector<std::uint32_t> tris;
        for (const auto& t : bundle.mesh->triangles) tris.insert(tris.end(), t.begin(), t.end());
        w.put_array<double>(verts);
        w.put_array<std::uint32_t>(tris);
        w.put_array<std::uint32_t>(bundle.mesh->vertex_to_point);
    }
    write_views(w, bundle.views);
    w.save(path);
}

SceneBundle load_scene_cache(const fs::path& path) {
    auto r = BinaryReader::from_file(path);
    r.expect_header(CacheKind::Scene);
    SceneBundle b;
    b.voxel_size = r.get<double>();
    b.cloud = read_cloud(r);
    if (r.get<std::uint8_t>()) {
        TriangleMesh m;
        auto verts = r.get_array<double>();
        auto tris = r.get_array<std::uint32_t>();
        if (verts.size() % 3 || tris.size() % 3) throw Error(ErrorCode::CorruptCache, "mesh arrays malformed");
        for (std::size_t i = 0; i < verts.size(); i += 3) m.vertices.emplace_back(verts[i], verts[i + 1], verts[i + 2]);
        for (std::size_t i = 0; i < tris.size(); i += 3) m.triangles.push_back({tris[i], tris[i + 1], tris[i + 2]});
        m.vertex_to_point = r.get_array<std::uint32_t>();
        b.mesh = std::move(m);
    }
    b.views = read_views(r);
    return b;
}

} // namespace ovseg
