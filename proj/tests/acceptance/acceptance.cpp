// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Uses only the in-process synthetic provider.

#include "oracles.hpp"

#include "ovseg/error.hpp"
#include "ovseg/merge.hpp"
#include "ovseg/pipeline.hpp"
#include "ovseg/query.hpp"
#include "ovseg/synthetic_provider.hpp"
#include "ovseg/synthetic_scene.hpp"
#include "ovseg/visibility.hpp"

#include <Eigen/Geometry>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace ovseg;
namespace fs = std::filesystem;

namespace {

constexpr double kTau = 0.95;
constexpr int kRounds = 8;
constexpr double kVoxel = 0.005;

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Counts failures and keeps the first one for the report line.
struct Checker {
    std::size_t failures = 0;
    std::string first;
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (failures++ == 0) first = what;
    }
    Outcome outcome(const std::string& summary) const {
        if (failures == 0) return {true, summary};
        return {false, summary + "; " + std::to_string(failures) + " failed checks, first: " + first};
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Default synthetic scene written once.
const SyntheticScene& scene() {
    static const SyntheticScene s = make_synthetic_scene();
    return s;
}

const fs::path& scene_dir() {
    static const fs::path dir = [] {
        auto d = testing::fresh_dir("acceptance-scene");
        write_synthetic_scene(scene(), d);
        return d;
    }();
    return dir;
}

PipelineConfig config_in(const std::string& tag) {
    PipelineConfig cfg;
    cfg.manifest = scene_dir() / "manifest.json";
    cfg.cache_dir = testing::fresh_dir(tag);
    cfg.voxel_size = kVoxel;
    cfg.overseg.target_points_per_sp = 200;
    cfg.merge.tau = kTau;
    cfg.merge.rounds = kRounds;
    cfg.cluster.mode = ThresholdMode::Absolute;
    cfg.cluster.value = 0.5;
    return cfg;
}

// Partition check written against the struct fields only.
std::string partition_error(const SuperpointGraph& g, std::size_t n_points) {
    if (g.point_to_sp.size() != n_points) return "point_to_sp has wrong size";
    std::vector<int> seen(n_points, 0);
    for (std::size_t s = 0; s < g.size(); ++s) {
        const auto& sp = g.superpoints[s];
        if (sp.id != s) return "superpoint id differs from its index";
        if (sp.point_indices.empty()) return "empty superpoint";
        for (std::size_t k = 0; k < sp.point_indices.size(); ++k) {
            auto p = sp.point_indices[k];
            if (p >= n_points) return "point index out of range";
            if (k > 0 && sp.point_indices[k - 1] >= p) return "member list not strictly ascending";
            if (g.point_to_sp[p] != s) return "point_to_sp disagrees with members";
            ++seen[p];
        }
    }
    for (auto c : seen)
        if (c != 1) return "point not covered exactly once";
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        auto [a, b] = g.edges[e];
        if (a >= b || b >= g.size()) return "bad edge";
        if (e > 0 && !(g.edges[e - 1] < g.edges[e])) return "edges not sorted and unique";
    }
    return {};
}

std::string round_error(const MergeRoundStats& s) {
    if (s.n_superpoints_after != s.n_superpoints_before - s.n_merges) return "merge count differs from n_before - n_after";
    return {};
}

// Ground-truth label of every prepared point, looked up by exact position.
std::vector<std::uint32_t> labels_of(const PointCloud& cloud) {
    std::map<std::array<double, 3>, std::uint32_t> by_pos;
    const auto& s = scene();
    for (PointIndex i = 0; i < s.cloud.size(); ++i) {
        const auto& p = s.cloud.positions[i];
        by_pos[{p.x(), p.y(), p.z()}] = s.labels[i];
    }
    std::vector<std::uint32_t> out;
    for (const auto& p : cloud.positions) {
        auto it = by_pos.find({p.x(), p.y(), p.z()});
        if (it == by_pos.end()) throw Error(ErrorCode::InvalidArgument, "prepared point not in the generated scene");
        out.push_back(it->second);
    }
    return out;
}

double iou(const std::vector<PointIndex>& a, const std::set<PointIndex>& b) {
    std::size_t inter = 0;
    for (auto p : a) inter += b.count(p);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

Outcome end_to_end() {
    auto t0 = std::chrono::steady_clock::now();
    auto cfg = config_in("acceptance-e2e");
    SyntheticProvider provider(64);
    cmd_prepare(cfg);
    auto feats = cmd_features(cfg, provider, provider);
    auto prepared = load_prepared(cfg);
    const auto& cloud = prepared.scene.cloud;
    auto labels = labels_of(cloud);

    Checker c;
    std::ostringstream detail;
    for (std::string name : {"red", "green", "blue"}) {
        auto label = scene().label_of(name);
        QueryOptions q;
        q.prompt = name;
        q.threshold = 0.5;
        std::ostringstream sink;
        auto out = cmd_query(cfg, provider, q, sink);

        // superpoints whose majority label is the box must outrank all others
        double worst_box = 2, best_other = -2;
        std::size_t box_sps = 0;
        for (const auto& sp : feats.graph.superpoints) {
            std::size_t in_box = 0;
            for (auto p : sp.point_indices) in_box += labels[p] == label;
            auto it = out.result.sp_scores.find(sp.id);
            double score = it == out.result.sp_scores.end() ? kNoFeatureScore : it->second;
            if (2 * in_box > sp.point_indices.size()) {
                ++box_sps;
                worst_box = std::min(worst_box, score);
            } else {
                best_other = std::max(best_other, score);
            }
        }
        c.expect(box_sps > 0, name + ": no superpoint belongs to the box");
        c.expect(worst_box > best_other, name + ": a non-box superpoint ranks above a box superpoint");

        std::set<PointIndex> truth;
        for (PointIndex p = 0; p < labels.size(); ++p)
            if (labels[p] == label) truth.insert(p);
        double best = 0;
        for (const auto& inst : out.instances) best = std::max(best, iou(inst.point_indices, truth));
        c.expect(best >= 0.80, name + ": best instance IoU " + std::to_string(best));
        detail << name << " IoU " << std::fixed << std::setprecision(3) << best << ", ";
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= 60.0, "runtime " + std::to_string(secs) + " s");
    detail << feats.graph.size() << " superpoints, " << std::setprecision(1) << secs << " s";
    return c.outcome(detail.str());
}

Outcome partition_invariants() {
    Checker c;
    std::ostringstream detail;

    // synthetic scene: prepared graph and every merge round
    auto cfg = config_in("acceptance-partition");
    auto prepared = cmd_prepare(cfg);
    const auto& cloud = prepared.scene.cloud;
    const auto& views = prepared.scene.views;
    auto err = partition_error(prepared.graph, cloud.size());
    c.expect(err.empty(), "prepared graph: " + err);

    SyntheticProvider provider(64);
    std::vector<SuperpointId> all(prepared.graph.size());
    std::iota(all.begin(), all.end(), 0U);
    auto features = extract_features(all, prepared.visibility, views, provider, cfg.features, cfg.views);
    MergeLoopHooks hooks;
    hooks.recompute_visibility = [&](const SuperpointGraph& g, std::span<const SuperpointId> ids) {
        return build_visibility(g, cloud, views, cfg.occlusion, ids);
    };
    std::size_t checked_rounds = 0;
    hooks.on_round_complete = [&](const MergeLoopState& s) {
        ++checked_rounds;
        auto e = partition_error(s.graph, cloud.size());
        c.expect(e.empty(), "synthetic round " + std::to_string(s.rounds_done) + ": " + e);
        auto r = round_error(s.report.back());
        c.expect(r.empty(), "synthetic round " + std::to_string(s.rounds_done) + ": " + r);
        c.expect(s.report.back().n_superpoints_after == s.graph.size(), "round stats disagree with the graph");
    };
    auto out = run_merge_loop({prepared.graph, features, {}, {}, 0, false}, cloud, views, provider, hooks, cfg.merge,
                              cfg.features, cfg.views);
    c.expect(checked_rounds == out.report.size(), "round hook count");
    detail << "synthetic " << prepared.graph.size() << " -> " << out.graph.size() << " in " << checked_rounds
           << " rounds; ";

    // 100k random points, clustered features per spatial octant
    auto random = testing::random_cloud(100000, 42);
    auto g = oversegment(random, nullptr, {});
    err = partition_error(g, random.size());
    c.expect(err.empty(), "random graph: " + err);
    std::mt19937_64 rng(9);
    std::vector<std::vector<double>> bases;
    for (int k = 0; k < 8; ++k) bases.push_back(testing::random_unit(16, rng));
    std::normal_distribution<double> noise(0, 0.08);
    FeatureMap f;
    for (const auto& sp : g.superpoints) {
        int octant = (sp.centroid.x() > 0.5) + 2 * (sp.centroid.y() > 0.5) + 4 * (sp.centroid.z() > 0.5);
        auto v = bases[octant];
        for (auto& x : v) x += noise(rng);
        if (rng() % 20) f.emplace(sp.id, FeatureVector(v));
    }
    std::size_t start = g.size(), rounds = 0;
    for (; rounds < kRounds; ++rounds) {
        auto r = merge_round(g, random, f, kTau);
        auto e = partition_error(r.graph, random.size());
        c.expect(e.empty(), "random round " + std::to_string(rounds + 1) + ": " + e);
        auto re = round_error(r.stats);
        c.expect(re.empty(), "random round " + std::to_string(rounds + 1) + ": " + re);
        c.expect(r.stats.n_superpoints_before == g.size() && r.stats.n_superpoints_after == r.graph.size(),
                 "random round stats disagree with the graphs");
        g = std::move(r.graph);
        f = std::move(r.features);
        if (r.stats.n_merges == 0) break;
    }
    detail << "random " << start << " -> " << g.size();
    return c.outcome(detail.str());
}

Mat4 random_pose(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    q.normalize();
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = q.toRotationMatrix();
    m.topRightCorner<3, 1>() = Vec3(n(rng), n(rng), n(rng));
    return m;
}

Outcome projection_occlusion() {
    Checker c;
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> U(-3, 3);
    CameraView v;
    v.intrinsics = {500, 500, 320, 240, 640, 480};
    v.depth = DepthImage(640, 480);
    v.rgb = RgbImage(640, 480);
    double worst = 0;
    std::size_t projected = 0;
    for (int pose = 0; pose < 10; ++pose) {
        v.view_id = "pose" + std::to_string(pose);
        v.cam_to_world = random_pose(rng);
        std::vector<Vec3> pts;
        // half the points are placed in front of the camera so most project
        for (int i = 0; i < 1000; ++i) {
            if (i % 2) {
                double z = 1.0 + std::abs(U(rng));
                Vec3 local(z * 0.2 * U(rng), z * 0.15 * U(rng), z);
                pts.push_back((v.cam_to_world * local.homogeneous()).head<3>());
            } else {
                pts.emplace_back(U(rng), U(rng), U(rng));
            }
        }
        for (const auto& p : pts) {
            auto ref = testing::homogeneous_project(p, v);
            bool on_edge = ref.w > 0 && (std::abs(ref.u) < 1e-6 || std::abs(ref.u - 640) < 1e-6 ||
                                         std::abs(ref.v) < 1e-6 || std::abs(ref.v - 480) < 1e-6);
            if (on_edge) continue;
            bool inside = ref.w > 0 && ref.u >= 0 && ref.u < 640 && ref.v >= 0 && ref.v < 480;
            auto got = project_point(p, v);
            c.expect(static_cast<bool>(got) == inside, "in-image decision differs from the reference");
            if (!got || !inside) continue;
            ++projected;
            worst = std::max({worst, std::abs(got->pixel.u - ref.u), std::abs(got->pixel.v - ref.v)});
        }
    }
    c.expect(worst <= 1e-9, "projection error " + std::to_string(worst) + " px");
    c.expect(projected >= 5000, "too few points projected");

    const auto& s = scene();
    OcclusionConfig occ;
    std::size_t decided = 0, occluded = 0, wrong = 0;
    for (const auto& view : s.views)
        for (PointIndex p = 0; p < s.cloud.size(); ++p) {
            auto truth = testing::raycast_visibility(s.rects, s.cloud.positions[p], s.rects[s.point_rect[p]].normal, view);
            if (!truth) continue;
            auto pr = project_point(s.cloud.positions[p], view);
            if (!pr) {
                ++wrong;
                continue;
            }
            ++decided;
            occluded += !*truth;
            wrong += is_visible(*pr, view, occ) != *truth;
        }
    c.expect(wrong == 0, std::to_string(wrong) + " occlusion disagreements");
    c.expect(occluded > 0, "no occluded samples");
    std::ostringstream d;
    d << projected << " projections, max error " << std::scientific << std::setprecision(1) << worst << " px; "
      << decided << " occlusion decisions (" << occluded << " occluded), " << wrong << " disagreements";
    return c.outcome(d.str());
}

// Superpoint i gets counts[i] points on a line.
SuperpointGraph line_graph(PointCloud& cloud, const std::vector<std::size_t>& counts, std::vector<SuperpointEdge> edges) {
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t k = 0; k < counts[i]; ++k) {
            cloud.positions.emplace_back(static_cast<double>(labels.size()) * 0.01, 0, 0);
            cloud.colors.push_back({0, 0, 0});
            cloud.normals.push_back(Vec3::UnitZ());
            cloud.normal_valid.push_back(1);
            labels.push_back(static_cast<std::uint32_t>(i));
        }
    auto g = SuperpointGraph::from_labels(cloud, labels);
    std::sort(edges.begin(), edges.end());
    g.edges = std::move(edges);
    return g;
}

Outcome merge_semantics() {
    Checker c;
    std::mt19937_64 rng(1000);
    std::size_t merges = 0;
    double lowest = 2;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng() % 6;
        int edge_pct = 30 + static_cast<int>(rng() % 71);
        std::vector<SuperpointEdge> edges;
        for (SuperpointId a = 0; a < n; ++a)
            for (SuperpointId b = a + 1; b < n; ++b)
                if (static_cast<int>(rng() % 100) < edge_pct) edges.emplace_back(a, b);
        std::vector<std::size_t> counts(n);
        for (auto& k : counts) k = 1 + rng() % 20;
        // features near a shared direction so that some edges pass tau
        auto base = testing::random_unit(8, rng);
        std::normal_distribution<double> noise(0, 0.02 + 0.2 * static_cast<double>(rng() % 100) / 100.0);
        FeatureMap f;
        std::vector<std::optional<std::vector<double>>> raw(n);
        for (SuperpointId i = 0; i < n; ++i) {
            if (rng() % 10 == 0) continue;
            auto v = base;
            for (auto& x : v) x += noise(rng);
            FeatureVector fv(v);
            raw[i] = std::vector<double>(fv.values().begin(), fv.values().end());
            f.emplace(i, fv);
        }
        PointCloud cloud;
        auto g = line_graph(cloud, counts, edges);
        auto r = merge_round(g, cloud, f, kTau);
        auto o = testing::ordered_merge_oracle(n, g.edges, raw, counts, kTau);

        std::map<SuperpointId, std::set<SuperpointId>> by_new;
        for (SuperpointId s = 0; s < n; ++s) by_new[r.old_to_new[s]].insert(s);
        std::set<std::set<SuperpointId>> groups;
        for (auto& [k, v] : by_new) groups.insert(v);
        std::string t = "trial " + std::to_string(trial);
        c.expect(groups == o.groups, t + ": partition differs from the oracle");
        c.expect(r.decisions.size() == o.decision_similarities.size(), t + ": decision count differs");
        for (std::size_t i = 0; i < std::min(r.decisions.size(), o.decision_similarities.size()); ++i)
            c.expect(std::abs(r.decisions[i].similarity - o.decision_similarities[i]) <= 1e-12,
                     t + ": decision similarity differs");
        for (const auto& [grp, feat] : o.merged_features) {
            const auto& got = r.features.at(r.old_to_new[*grp.begin()]);
            for (std::size_t k = 0; k < feat.size(); ++k)
                c.expect(std::abs(got[k] - feat[k]) <= 1e-12, t + ": merged feature differs");
        }
        for (const auto& d : r.decisions) {
            lowest = std::min(lowest, d.similarity);
            c.expect(d.similarity >= kTau, t + ": merge below tau");
        }
        merges += r.decisions.size();
    }
    c.expect(merges > 500, "trials exercised too few merges");
    std::ostringstream d;
    d << "1000 trials, " << merges << " merges, lowest merge similarity " << std::setprecision(4) << lowest;
    return c.outcome(d.str());
}

Outcome clustering() {
    Checker c;
    std::mt19937_64 rng(200);
    auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    std::size_t total_clusters = 0, max_points = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t budget = 100 + rng() % 1901;
        std::vector<Vec3> pts;
        int blobs = 1 + static_cast<int>(rng() % 6);
        for (int b = 0; b < blobs && pts.size() < budget; ++b) {
            Vec3 centre(2 * unit(), 2 * unit(), 2 * unit());
            double r = 0.03 + 0.2 * unit();
            std::size_t n = std::min<std::size_t>(budget - pts.size(), 20 + rng() % 400);
            for (std::size_t i = 0; i < n; ++i)
                pts.push_back(centre + r * Vec3(2 * unit() - 1, 2 * unit() - 1, 2 * unit() - 1));
        }
        while (pts.size() < budget) pts.emplace_back(2 * unit(), 2 * unit(), 2 * unit());
        max_points = std::max(max_points, pts.size());

        PointCloud cloud;
        cloud.positions = pts;
        cloud.colors.assign(pts.size(), {0, 0, 0});
        cloud.normals.assign(pts.size(), Vec3::UnitZ());
        cloud.normal_valid.assign(pts.size(), 1);
        std::vector<PointIndex> sel;
        for (PointIndex i = 0; i < pts.size(); ++i)
            if (rng() % 5) sel.push_back(i);
        ClusterConfig cfg;
        cfg.epsilon = 0.01 + 0.12 * unit();
        cfg.min_cluster_size = 1 + static_cast<int>(rng() % 40);
        auto got = cluster_instances(sel, cloud, cfg);
        std::set<std::set<PointIndex>> got_sets;
        for (const auto& m : got) got_sets.emplace(m.point_indices.begin(), m.point_indices.end());
        auto want = testing::density_cluster_oracle(sel, pts, cfg.epsilon, cfg.min_cluster_size);
        c.expect(got_sets == want, "trial " + std::to_string(trial) + " differs from the oracle");
        total_clusters += want.size();
    }
    return c.outcome("200 configurations up to " + std::to_string(max_points) + " points, " +
                     std::to_string(total_clusters) + " clusters");
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

Outcome determinism() {
    std::vector<std::map<std::string, std::string>> runs;
    for (std::string tag : {"acceptance-det-a", "acceptance-det-b"}) {
        auto cfg = config_in(tag);
        cfg.seed = 12345;
        SyntheticProvider provider(64);
        cmd_prepare(cfg);
        cmd_features(cfg, provider, provider);
        for (std::string prompt : {"red", "blue"}) {
            QueryOptions q;
            q.prompt = prompt;
            q.heatmap_path = cfg.cache_dir / ("heatmap-" + prompt + ".ply");
            q.instances_path = cfg.cache_dir / ("instances-" + prompt + ".ply");
            std::ostringstream sink;
            cmd_query(cfg, provider, q, sink);
        }
        runs.push_back(dir_bytes(cfg.cache_dir));
    }
    Checker c;
    c.expect(runs[0].size() == runs[1].size(), "different file sets");
    std::size_t bytes = 0, plys = 0;
    for (const auto& [name, data] : runs[0]) {
        auto it = runs[1].find(name);
        c.expect(it != runs[1].end() && it->second == data, name + " differs");
        bytes += data.size();
        plys += name.ends_with(".ply");
    }
    c.expect(plys == 4, "expected four PLY exports");
    return c.outcome(std::to_string(runs[0].size()) + " files (" + std::to_string(plys) + " PLY), " +
                     std::to_string(bytes) + " bytes identical");
}

Outcome downsampling() {
    Checker c;
    std::size_t in = 0, out = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        double extent = 0.05 * static_cast<double>(seed);
        auto cloud = testing::random_cloud(20000, seed, extent);
        auto d = voxel_downsample(cloud, kVoxel);
        auto expect = testing::hash_grid_voxel_count(cloud.positions, kVoxel);
        c.expect(d.size() == expect, "cloud " + std::to_string(seed) + ": " + std::to_string(d.size()) +
                                         " voxels, oracle " + std::to_string(expect));
        c.expect(voxel_downsample(d, kVoxel) == d, "cloud " + std::to_string(seed) + ": not idempotent");
        in += cloud.size();
        out += d.size();
    }
    return c.outcome("10 clouds, " + std::to_string(in) + " -> " + std::to_string(out) + " points");
}

Outcome merge_protocol() {
    auto cfg = config_in("acceptance-protocol");
    SyntheticProvider merge_inner(64), query_inner(64);
    testing::CountingProvider merge_p(merge_inner, "merge"), query_p(query_inner, "query");
    cmd_prepare(cfg);

    struct Snapshot {
        long merge_work, query_work, query_texts;
    };
    auto work = [](const testing::CountingProvider& p) { return p.images + p.segments; };
    std::vector<int> checkpoints;
    Snapshot last{};
    FeatureRunHooks hooks;
    hooks.on_checkpoint = [&](int round) {
        checkpoints.push_back(round);
        last = {work(merge_p), work(query_p), query_p.texts};
    };
    auto feats = cmd_features(cfg, merge_p, query_p, nullptr, hooks);

    Checker c;
    const auto& rep = feats.report;
    c.expect(!rep.empty() && rep.size() <= static_cast<std::size_t>(kRounds), "round count " + std::to_string(rep.size()));
    for (std::size_t i = 0; i + 1 < rep.size(); ++i)
        c.expect(rep[i].n_merges > 0, "loop continued after a zero-merge round");
    if (rep.size() < static_cast<std::size_t>(kRounds))
        c.expect(!rep.empty() && rep.back().n_merges == 0, "loop stopped before R without a zero-merge round");
    c.expect(rep.size() < static_cast<std::size_t>(kRounds), "early stop not exercised on the synthetic scene");
    c.expect(checkpoints.size() == rep.size() + 1, "one checkpoint per round plus the initial extraction");

    c.expect(last.query_work == 0 && last.query_texts == 0, "query provider used during the merge loop");
    c.expect(work(merge_p) == last.merge_work, "merge provider used after the merge loop");
    c.expect(merge_p.texts == 0, "merge provider asked for text embeddings");
    c.expect(work(query_p) > 0, "final pass made no query provider calls");
    c.expect(feats.query_features.size() > 0, "final pass produced no features");

    std::ostringstream d;
    d << rep.size() << " rounds (";
    for (std::size_t i = 0; i < rep.size(); ++i) d << (i ? "/" : "") << rep[i].n_merges;
    d << " merges), final pass " << work(query_p) << " query calls, " << work(merge_p) - last.merge_work
      << " merge calls";
    return c.outcome(d.str());
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"synthetic end-to-end", end_to_end},
        {"partition invariants", partition_invariants},
        {"projection and occlusion", projection_occlusion},
        {"merge semantics", merge_semantics},
        {"clustering", clustering},
        {"determinism", determinism},
        {"downsampling", downsampling},
        {"merge-loop protocol", merge_protocol},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << i + 1 << " (" << criteria[i].first
                  << "): " << o.detail << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
