#include "ovseg/merge.hpp"

#include "ovseg/error.hpp"
#include "ovseg/hash.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ovseg {

void MergeConfig::validate() const {
    if (!(tau > 0 && tau <= 1)) throw Error(ErrorCode::InvalidConfig, "merge tau must lie in (0, 1]");
    if (rounds < 0) throw Error(ErrorCode::InvalidConfig, "merge rounds must be >= 0");
}

double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    if (a.dim() != b.dim())
        throw Error(ErrorCode::DimMismatch, "cosine of " + std::to_string(a.dim()) + "-d and " + std::to_string(b.dim()) + "-d features");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
    return std::clamp(dot, -1.0, 1.0);
}

namespace {

double cosine_raw(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

} // namespace

MergeRoundResult merge_round(const SuperpointGraph& graph, const PointCloud& cloud, const FeatureMap& features,
                             double tau) {
    const auto n = graph.size();
    struct Scored {
        double sim;
        SuperpointEdge edge;
    };
    std::vector<Scored> scored;
    double sim_sum = 0.0;
    for (const auto& e : graph.edges) {
        auto fa = features.find(e.first), fb = features.find(e.second);
        if (fa == features.end() || fb == features.end()) continue;
        double s = cosine_similarity(fa->second, fb->second);
        scored.push_back({s, e});
        sim_sum += s;
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
        return x.sim > y.sim || (x.sim == y.sim && x.edge < y.edge);
    });

    // union-find whose roots carry the unnormalized weighted feature sum
    std::vector<SuperpointId> parent(n);
    std::iota(parent.begin(), parent.end(), 0U);
    std::vector<std::vector<double>> sum(n);
    for (const auto& [id, f] : features) {
        const double w = static_cast<double>(graph.superpoints[id].member_count());
        sum[id].resize(f.dim());
        for (std::size_t i = 0; i < f.dim(); ++i) sum[id][i] = w * f[i];
    }
    auto find = [&](SuperpointId x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };

    MergeRoundResult out;
    for (const auto& s : scored) {
        auto ra = find(s.edge.first), rb = find(s.edge.second);
        if (ra == rb) continue;
        double rep = cosine_raw(sum[ra], sum[rb]);
        if (rep < tau) continue;
        if (rb < ra) std::swap(ra, rb);
        parent[rb] = ra;
        for (std::size_t i = 0; i < sum[ra].size(); ++i) sum[ra][i] += sum[rb][i];
        sum[rb].clear();
        out.decisions.push_back({s.edge.first, s.edge.second, rep});
    }
    for (const auto& d : out.decisions)
        if (d.similarity < tau) throw std::logic_error("merge executed below tau");

    std::vector<std::uint32_t> labels(cloud.size());
    for (std::size_t p = 0; p < cloud.size(); ++p) labels[p] = find(graph.point_to_sp[p]);
    out.graph = SuperpointGraph::from_labels(cloud, labels);
    out.old_to_new.resize(n);
    for (SuperpointId s = 0; s < n; ++s) out.old_to_new[s] = out.graph.point_to_sp[graph.superpoints[s].point_indices.front()];

    for (const auto& e : graph.edges) {
        auto a = out.old_to_new[e.first], b = out.old_to_new[e.second];
        if (a != b) out.graph.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(out.graph.edges.begin(), out.graph.edges.end());
    out.graph.edges.erase(std::unique(out.graph.edges.begin(), out.graph.edges.end()), out.graph.edges.end());

    std::vector<std::size_t> constituents(out.graph.size(), 0);
    for (SuperpointId s = 0; s < n; ++s) ++constituents[out.old_to_new[s]];
    for (SuperpointId s = 0; s < n; ++s) {
        if (find(s) != s || sum[s].empty()) continue;
        auto nid = out.old_to_new[s];
        if (constituents[nid] > 1) out.features.emplace(nid, FeatureVector(sum[s]));
        else out.features.emplace(nid, features.at(s));
    }
    for (SuperpointId s = 0; s < out.graph.size(); ++s)
        if (constituents[s] > 1) out.changed.push_back(s);

    out.stats.n_superpoints_before = n;
    out.stats.n_merges = out.decisions.size();
    out.stats.n_superpoints_after = out.graph.size();
    out.stats.mean_edge_similarity = scored.empty() ? 0.0 : sim_sum / static_cast<double>(scored.size());
    return out;
}

MergeLoopState run_merge_loop(MergeLoopState state, const PointCloud& cloud, std::span<const CameraView> views,
                              FeatureProvider& provider, const MergeLoopHooks& hooks, const MergeConfig& cfg,
                              const FeatureConfig& feature_cfg, const ExtractionOptions& opts) {
    cfg.validate();
    while (!state.finished && state.rounds_done < cfg.rounds) {
        auto res = merge_round(state.graph, cloud, state.features, cfg.tau);
        for (const auto& d : res.decisions)
            if (d.similarity < cfg.tau) throw std::logic_error("tau-soundness violated");
        state.report.push_back(res.stats);
        state.decisions.insert(state.decisions.end(), res.decisions.begin(), res.decisions.end());
        state.graph = std::move(res.graph);
        state.features = std::move(res.features);

        if (res.stats.n_merges == 0) {
            state.finished = true;
        } else if (cfg.reextract_each_round && !res.changed.empty()) {
            if (!hooks.recompute_visibility) throw Error(ErrorCode::InvalidArgument, "merge loop needs a visibility hook");
            auto table = hooks.recompute_visibility(state.graph, res.changed);
            FeatureConfig round_cfg = feature_cfg;
            round_cfg.seed = mix_seed(feature_cfg.seed, static_cast<std::uint64_t>(state.rounds_done + 1));
            auto fresh = extract_features(res.changed, table, views, provider, round_cfg, opts);
            for (auto id : res.changed) {
                if (auto it = fresh.find(id); it != fresh.end()) state.features.insert_or_assign(id, it->second);
                else state.features.erase(id);
            }
        }
        ++state.rounds_done;
        if (state.rounds_done >= cfg.rounds) state.finished = true;
        if (hooks.on_round_complete) hooks.on_round_complete(state);
    }
    if (cfg.rounds == 0) state.finished = true;
    return state;
}

FeatureMap final_feature_pass(const SuperpointGraph& graph, const VisibilityTable& table,
                              std::span<const CameraView> views, FeatureProvider& provider,
                              const FeatureConfig& feature_cfg, const ExtractionOptions& opts) {
    std::vector<SuperpointId> all(graph.size());
    std::iota(all.begin(), all.end(), 0U);
    return extract_features(all, table, views, provider, feature_cfg, opts);
}

nlohmann::json to_json(const MergeRoundStats& s) {
    return {{"n_superpoints_before", s.n_superpoints_before},
            {"n_merges", s.n_merges},
            {"n_superpoints_after", s.n_superpoints_after},
            {"mean_edge_similarity", s.mean_edge_similarity}};
}

std::string report_to_json_lines(const MergeReport& report) {
    std::ostringstream out;
    for (std::size_t i = 0; i < report.size(); ++i) {
        auto j = to_json(report[i]);
        j["round"] = i + 1;
        out << j.dump() << "\n";
    }
    return out.str();
}

} // namespace ovseg
