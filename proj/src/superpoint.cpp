#include "ovseg/superpoint.hpp"

#include "ovseg/error.hpp"
#include "ovseg/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ovseg {

namespace {

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0U); }
    std::uint32_t find(std::uint32_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

  private:
    std::vector<std::uint32_t> parent_;
};

Vec3 aligned_mean_normal(const PointCloud& cloud, std::span<const PointIndex> members) {
    Vec3 ref = Vec3::Zero();
    Vec3 sum = Vec3::Zero();
    for (auto i : members) {
        if (!cloud.normal_valid[i]) continue;
        const Vec3& n = cloud.normals[i];
        if (ref.isZero()) ref = n;
        sum += n.dot(ref) < 0 ? Vec3(-n) : n;
    }
    double len = sum.norm();
    return len > 1e-12 ? Vec3(sum / len) : Vec3::UnitZ();
}

} // namespace

// ---------------------------------------------------------------------------

SuperpointGraph SuperpointGraph::from_labels(const PointCloud& cloud, std::span<const std::uint32_t> labels) {
    if (labels.size() != cloud.size()) throw std::invalid_argument("label count differs from cloud size");
    SuperpointGraph g;
    g.point_to_sp.assign(cloud.size(), 0);
    // label -> dense id, in order of first appearance (= smallest member index)
    std::vector<std::uint32_t> remap;
    std::vector<std::pair<std::uint32_t, SuperpointId>> seen; // sorted by label
    std::uint32_t max_label = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
    const bool dense = max_label < 4 * labels.size() + 16;
    if (dense) remap.assign(static_cast<std::size_t>(max_label) + 1, std::numeric_limits<std::uint32_t>::max());
    auto lookup = [&](std::uint32_t label) -> std::uint32_t& {
        if (dense) return remap[label];
        auto it = std::lower_bound(seen.begin(), seen.end(), std::make_pair(label, SuperpointId{0}),
                                   [](const auto& a, const auto& b) { return a.first < b.first; });
        if (it == seen.end() || it->first != label)
            it = seen.insert(it, {label, std::numeric_limits<std::uint32_t>::max()});
        return it->second;
    };
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& id = lookup(labels[i]);
        if (id == std::numeric_limits<std::uint32_t>::max()) {
            id = static_cast<SuperpointId>(g.superpoints.size());
            g.superpoints.push_back(Superpoint{id, {}, Vec3::Zero(), Vec3::UnitZ()});
        }
        g.point_to_sp[i] = id;
        g.superpoints[id].point_indices.push_back(static_cast<PointIndex>(i));
    }
    for (auto& sp : g.superpoints) {
        Vec3 sum = Vec3::Zero();
        for (auto i : sp.point_indices) sum += cloud.positions[i];
        sp.centroid = sum / static_cast<double>(sp.point_indices.size());
        sp.mean_normal = aligned_mean_normal(cloud, sp.point_indices);
    }
    return g;
}

void SuperpointGraph::validate(std::size_t n_points) const {
    auto fail = [](const std::string& what) { throw std::logic_error("invalid superpoint graph: " + what); };
    if (point_to_sp.size() != n_points) fail("point_to_sp has wrong length");
    std::size_t total = 0;
    for (std::size_t s = 0; s < superpoints.size(); ++s) {
        const auto& sp = superpoints[s];
        if (sp.id != s) fail("ids are not dense");
        if (sp.point_indices.empty()) fail("empty superpoint " + std::to_string(s));
        for (std::size_t k = 0; k < sp.point_indices.size(); ++k) {
            auto i = sp.point_indices[k];
            if (k > 0 && sp.point_indices[k - 1] >= i) fail("member list not strictly ascending");
            if (i >= n_points) fail("member index out of range");
            if (point_to_sp[i] != s) fail("point_to_sp disagrees with membership of point " + std::to_string(i));
        }
        total += sp.point_indices.size();
    }
    if (total != n_points) fail("members do not cover the cloud exactly");
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [a, b] = edges[e];
        if (a >= b) fail("edge not stored as (lower, higher) or self-loop");
        if (b >= superpoints.size()) fail("edge references unknown superpoint");
        if (e > 0 && !(edges[e - 1] < edges[e])) fail("edges not sorted/unique");
    }
}

void OversegConfig::validate() const {
    if (target_points_per_sp < 1) throw Error(ErrorCode::InvalidConfig, "target_points_per_sp must be >= 1");
    if (!(lambda_normal >= 0)) throw Error(ErrorCode::InvalidConfig, "lambda_normal must be >= 0");
    if (lloyd_iterations < 1) throw Error(ErrorCode::InvalidConfig, "lloyd_iterations must be >= 1");
    if (knn_adjacency_k < 1) throw Error(ErrorCode::InvalidConfig, "knn_adjacency_k must be >= 1");
}

// ---------------------------------------------------------------------------

PointAdjacency build_point_adjacency(const PointCloud& cloud, const TriangleMesh* mesh, int knn_k) {
    const auto n = cloud.size();
    std::vector<std::pair<PointIndex, PointIndex>> links;
    std::vector<std::uint8_t> covered(n, 0);
    if (mesh) {
        if (mesh->vertex_to_point.size() != mesh->vertices.size())
            throw Error(ErrorCode::InvalidArgument, "mesh is not attached to the cloud");
        for (auto p : mesh->vertex_to_point) covered[p] = 1;
        for (const auto& t : mesh->triangles)
            for (int e = 0; e < 3; ++e) {
                auto a = mesh->vertex_to_point[t[static_cast<std::size_t>(e)]];
                auto b = mesh->vertex_to_point[t[static_cast<std::size_t>((e + 1) % 3)]];
                if (a != b) links.emplace_back(std::min(a, b), std::max(a, b));
            }
    }
    const bool need_knn = !mesh || std::any_of(covered.begin(), covered.end(), [](auto c) { return c == 0; });
    if (need_knn && n > 1 && knn_k > 0) {
        KdTree tree(cloud.positions);
        for (std::size_t i = 0; i < n; ++i) {
            if (mesh && covered[i]) continue;
            int taken = 0;
            for (auto [j, d] : tree.knn(cloud.positions[i], static_cast<std::size_t>(knn_k) + 1)) {
                if (j == i) continue;
                if (taken++ == knn_k) break;
                links.emplace_back(std::min<PointIndex>(static_cast<PointIndex>(i), j),
                                   std::max<PointIndex>(static_cast<PointIndex>(i), j));
            }
        }
    }
    std::sort(links.begin(), links.end());
    links.erase(std::unique(links.begin(), links.end()), links.end());

    PointAdjacency adj;
    adj.offsets.assign(n + 1, 0);
    for (auto [a, b] : links) {
        ++adj.offsets[a + 1];
        ++adj.offsets[b + 1];
    }
    for (std::size_t i = 0; i < n; ++i) adj.offsets[i + 1] += adj.offsets[i];
    adj.neighbors.resize(adj.offsets[n]);
    auto fill = adj.offsets;
    for (auto [a, b] : links) {
        adj.neighbors[fill[a]++] = b;
        adj.neighbors[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < n; ++i)
        std::sort(adj.neighbors.begin() + adj.offsets[i], adj.neighbors.begin() + adj.offsets[i + 1]);
    return adj;
}

namespace {

std::vector<SuperpointEdge> edges_from_adjacency(const PointAdjacency& adj, std::span<const SuperpointId> labels) {
    std::vector<SuperpointEdge> edges;
    for (PointIndex i = 0; i < labels.size(); ++i)
        for (auto j : adj.of(i))
            if (j > i && labels[i] != labels[j])
                edges.emplace_back(std::min(labels[i], labels[j]), std::max(labels[i], labels[j]));
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Farthest point sampling; ties go to the lowest index.
std::vector<PointIndex> farthest_point_seeds(const PointCloud& cloud, std::size_t count, std::uint64_t seed) {
    const auto n = cloud.size();
    std::mt19937_64 rng(seed);
    std::vector<PointIndex> seeds;
    seeds.reserve(count);
    seeds.push_back(static_cast<PointIndex>(rng() % n));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (seeds.size() < count) {
        const Vec3& s = cloud.positions[seeds.back()];
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = (cloud.positions[i] - s).squaredNorm();
            if (d < d2[i]) d2[i] = d;
            if (d2[i] > best_d) {
                best_d = d2[i];
                best = i;
            }
        }
        seeds.push_back(static_cast<PointIndex>(best));
    }
    return seeds;
}

struct SeedState {
    std::vector<Vec3> pos;
    std::vector<Vec3> nrm;
};

} // namespace

SuperpointGraph oversegment(const PointCloud& cloud, const TriangleMesh* mesh, const OversegConfig& cfg,
                            OversegReport* report) {
    cfg.validate();
    const auto n = cloud.size();
    if (n == 0) throw Error(ErrorCode::EmptyCloud, "cannot oversegment an empty cloud");
    if (std::none_of(cloud.normal_valid.begin(), cloud.normal_valid.end(), [](auto v) { return v != 0; }))
        throw Error(ErrorCode::NoValidNormals, "every normal is flagged invalid");

    const auto target = static_cast<std::size_t>(cfg.target_points_per_sp);
    const std::size_t n_seeds = std::min(n, (n + target - 1) / target);
    const auto seed_idx = farthest_point_seeds(cloud, n_seeds, cfg.seed);

    SeedState seeds;
    for (auto i : seed_idx) {
        seeds.pos.push_back(cloud.positions[i]);
        seeds.nrm.push_back(cloud.normal_valid[i] ? cloud.normals[i] : Vec3::UnitZ());
    }

    // r: mean distance from each seed to its nearest other seed
    double spacing = 0.0;
    if (n_seeds > 1) {
        KdTree seed_tree(seeds.pos);
        for (const auto& s : seeds.pos) spacing += seed_tree.knn(s, 2).back().second;
        spacing /= static_cast<double>(n_seeds);
    } else {
        for (const auto& p : cloud.positions) spacing = std::max(spacing, (p - seeds.pos[0]).norm());
    }
    spacing = std::max(spacing, 1e-12);
    const double inv_r2 = 1.0 / (spacing * spacing);
    const double lambda = cfg.lambda_normal;

    auto energy = [&](PointIndex p, std::uint32_t s, const SeedState& st) {
        double e = (cloud.positions[p] - st.pos[s]).squaredNorm() * inv_r2;
        if (cloud.normal_valid[p]) e += lambda * (1.0 - std::abs(cloud.normals[p].dot(st.nrm[s])));
        return e;
    };

    constexpr auto kUnassigned = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> assign(n, kUnassigned);
    std::vector<double> energies;
    std::vector<PointIndex> cand;

    for (int iter = 0; iter < cfg.lloyd_iterations; ++iter) {
        // assignment
        KdTree seed_tree(seeds.pos);
        for (PointIndex p = 0; p < n; ++p) {
            seed_tree.radius(cloud.positions[p], 3.0 * spacing, cand);
            std::uint32_t best = assign[p];
            double best_e = best == kUnassigned ? std::numeric_limits<double>::infinity() : energy(p, best, seeds);
            for (auto s : cand) {
                double e = energy(p, s, seeds);
                if (e < best_e || (e == best_e && s < best)) {
                    best_e = e;
                    best = s;
                }
            }
            if (best == kUnassigned) best = seed_tree.nearest(cloud.positions[p]);
            assign[p] = best;
        }

        // update: centroid + sign-aligned mean normal, each kept only if it lowers the cluster energy
        std::vector<Vec3> psum(n_seeds, Vec3::Zero()), nsum(n_seeds, Vec3::Zero());
        std::vector<std::size_t> count(n_seeds, 0);
        for (PointIndex p = 0; p < n; ++p) {
            auto s = assign[p];
            psum[s] += cloud.positions[p];
            ++count[s];
            if (cloud.normal_valid[p]) {
                const Vec3& np = cloud.normals[p];
                nsum[s] += np.dot(seeds.nrm[s]) < 0 ? Vec3(-np) : np;
            }
        }
        SeedState next = seeds;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            if (count[s] == 0) continue;
            next.pos[s] = psum[s] / static_cast<double>(count[s]);
            if (nsum[s].norm() > 1e-12) next.nrm[s] = nsum[s].normalized();
        }
        std::vector<double> pos_old(n_seeds, 0.0), pos_new(n_seeds, 0.0), nrm_old(n_seeds, 0.0), nrm_new(n_seeds, 0.0);
        for (PointIndex p = 0; p < n; ++p) {
            auto s = assign[p];
            pos_old[s] += (cloud.positions[p] - seeds.pos[s]).squaredNorm();
            pos_new[s] += (cloud.positions[p] - next.pos[s]).squaredNorm();
            if (cloud.normal_valid[p]) {
                nrm_old[s] += 1.0 - std::abs(cloud.normals[p].dot(seeds.nrm[s]));
                nrm_new[s] += 1.0 - std::abs(cloud.normals[p].dot(next.nrm[s]));
            }
        }
        for (std::size_t s = 0; s < n_seeds; ++s) {
            if (pos_new[s] > pos_old[s]) next.pos[s] = seeds.pos[s];
            if (nrm_new[s] > nrm_old[s]) next.nrm[s] = seeds.nrm[s];
        }
        seeds = std::move(next);

        double total = 0.0;
        for (PointIndex p = 0; p < n; ++p) total += energy(p, assign[p], seeds);
        if (!energies.empty() && total > energies.back() * (1.0 + 1e-12) + 1e-12)
            throw std::logic_error("oversegmentation energy increased between Lloyd iterations");
        energies.push_back(total);
    }

    // split disconnected superpoints into connected components
    const auto adj = build_point_adjacency(cloud, mesh, cfg.knn_adjacency_k);
    UnionFind uf(n);
    for (PointIndex i = 0; i < n; ++i)
        for (auto j : adj.of(i))
            if (j > i && assign[i] == assign[j]) uf.unite(i, j);
    std::vector<std::uint32_t> component(n);
    for (PointIndex i = 0; i < n; ++i) component[i] = uf.find(i);

    auto graph = SuperpointGraph::from_labels(cloud, component);
    graph.edges = edges_from_adjacency(adj, graph.point_to_sp);

    if (report) {
        report->n_seeds = n_seeds;
        report->seed_spacing = spacing;
        report->energy = std::move(energies);
        report->n_superpoints = graph.size();
    }
    return graph;
}

SuperpointGraph build_adjacency(SuperpointGraph graph, const PointCloud& cloud, const TriangleMesh* mesh, int knn_k) {
    const auto adj = build_point_adjacency(cloud, mesh, knn_k);
    graph.edges = edges_from_adjacency(adj, graph.point_to_sp);
    return graph;
}

GraphStats graph_stats(const SuperpointGraph& graph) {
    GraphStats s;
    s.n_superpoints = graph.size();
    s.n_edges = graph.edges.size();
    if (graph.superpoints.empty()) return s;
    s.min_size = std::numeric_limits<std::size_t>::max();
    std::size_t total = 0;
    for (const auto& sp : graph.superpoints) {
        total += sp.member_count();
        s.min_size = std::min(s.min_size, sp.member_count());
        s.max_size = std::max(s.max_size, sp.member_count());
    }
    s.mean_size = static_cast<double>(total) / static_cast<double>(s.n_superpoints);
    return s;
}

nlohmann::json graph_to_json(const SuperpointGraph& graph) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [a, b] : graph.edges) edges.push_back({a, b});
    return {{"point_to_sp", graph.point_to_sp}, {"edges", std::move(edges)}};
}

SuperpointGraph graph_from_json(const nlohmann::json& j, const PointCloud& cloud) {
    auto labels = j.at("point_to_sp").get<std::vector<std::uint32_t>>();
    auto g = SuperpointGraph::from_labels(cloud, labels);
    // ids in the file may not follow smallest-member order; translate through the relabeling
    std::vector<std::uint32_t> file_to_dense;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= file_to_dense.size()) file_to_dense.resize(labels[i] + 1, 0);
        file_to_dense[labels[i]] = g.point_to_sp[i];
    }
    for (const auto& e : j.at("edges")) {
        auto a = e.at(0).get<std::uint32_t>(), b = e.at(1).get<std::uint32_t>();
        if (a >= file_to_dense.size() || b >= file_to_dense.size())
            throw Error(ErrorCode::MalformedManifest, "graph edge references an unknown superpoint");
        a = file_to_dense[a];
        b = file_to_dense[b];
        if (a != b) g.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    return g;
}

void write_graph(BinaryWriter& w, const SuperpointGraph& graph) {
    w.put_array<std::uint32_t>(graph.point_to_sp);
    std::vector<std::uint32_t> flat;
    flat.reserve(2 * graph.edges.size());
    for (auto [a, b] : graph.edges) flat.insert(flat.end(), {a, b});
    w.put_array<std::uint32_t>(flat);
}

SuperpointGraph read_graph(BinaryReader& r, const PointCloud& cloud) {
    auto labels = r.get_array<std::uint32_t>();
    auto flat = r.get_array<std::uint32_t>();
    if (labels.size() != cloud.size() || flat.size() % 2) throw Error(ErrorCode::CorruptCache, "graph payload malformed");
    auto g = SuperpointGraph::from_labels(cloud, labels);
    if (g.point_to_sp != labels) throw Error(ErrorCode::CorruptCache, "cached graph ids are not canonical");
    for (std::size_t i = 0; i < flat.size(); i += 2) g.edges.emplace_back(flat[i], flat[i + 1]);
    g.validate(cloud.size());
    return g;
}

} // namespace ovseg
