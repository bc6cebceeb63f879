#include "ovseg/query.hpp"

#include "ovseg/error.hpp"
#include "ovseg/kdtree.hpp"
#include "ovseg/merge.hpp"
#include "ovseg/ply.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ovseg {

void ClusterConfig::validate() const {
    if (!(epsilon > 0)) throw Error(ErrorCode::InvalidConfig, "cluster epsilon must be positive");
    if (min_cluster_size < 1) throw Error(ErrorCode::InvalidConfig, "min_cluster_size must be >= 1");
    if (mode == ThresholdMode::Percentile && !(value > 0 && value < 100))
        throw Error(ErrorCode::InvalidConfig, "percentile must lie in (0, 100)");
    if (mode == ThresholdMode::Absolute && !std::isfinite(value))
        throw Error(ErrorCode::InvalidConfig, "absolute threshold must be finite");
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

QueryResult score_query(std::string_view prompt, const FeatureMap& features, FeatureProvider& provider,
                        const SuperpointGraph& graph) {
    if (prompt.empty()) throw Error(ErrorCode::EmptyPrompt, "query prompt is empty");
    if (features.empty()) throw Error(ErrorCode::InvalidArgument, "no superpoint features to query");
    const auto text = provider.embed_text(prompt);

    QueryResult r;
    r.prompt = std::string(prompt);
    std::vector<double> scores;
    for (const auto& [id, f] : features) {
        double s = cosine_similarity(text, f);
        r.sp_scores.emplace(id, s);
        scores.push_back(s);
    }
    r.point_scores.assign(graph.point_to_sp.size(), kNoFeatureScore);
    for (std::size_t i = 0; i < graph.point_to_sp.size(); ++i)
        if (auto it = r.sp_scores.find(graph.point_to_sp[i]); it != r.sp_scores.end())
            r.point_scores[i] = static_cast<float>(it->second);
    r.normalization = {nearest_rank_percentile(scores, 2.0), nearest_rank_percentile(scores, 98.0)};
    return r;
}

std::vector<PointIndex> threshold_points(const QueryResult& result, const ClusterConfig& cfg) {
    cfg.validate();
    double theta = cfg.value;
    if (cfg.mode == ThresholdMode::Percentile)
        theta = nearest_rank_percentile(std::vector<double>(result.point_scores.begin(), result.point_scores.end()), cfg.value);
    std::vector<PointIndex> out;
    for (std::size_t i = 0; i < result.point_scores.size(); ++i)
        if (static_cast<double>(result.point_scores[i]) >= theta) out.push_back(static_cast<PointIndex>(i));
    return out;
}

std::vector<InstanceMask> cluster_instances(std::span<const PointIndex> points, const PointCloud& cloud,
                                            const ClusterConfig& cfg, std::span<const float> point_scores) {
    cfg.validate();
    std::vector<PointIndex> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto n = pts.size();
    if (n == 0) return {};

    std::vector<Vec3> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = cloud.positions[pts[i]];
    KdTree tree(pos);

    std::vector<std::vector<PointIndex>> nbrs(n);
    std::vector<std::uint8_t> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        tree.radius(pos[i], cfg.epsilon, nbrs[i]);
        core[i] = nbrs[i].size() >= static_cast<std::size_t>(cfg.min_cluster_size);
    }

    constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> label(n, kNone);
    std::uint32_t next_label = 0;
    std::vector<PointIndex> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || label[i] != kNone) continue;
        label[i] = next_label;
        stack.assign(1, static_cast<PointIndex>(i));
        while (!stack.empty()) {
            auto c = stack.back();
            stack.pop_back();
            for (auto j : nbrs[c])
                if (core[j] && label[j] == kNone) {
                    label[j] = next_label;
                    stack.push_back(j);
                }
        }
        ++next_label;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (auto j : nbrs[i]) {
            if (!core[j]) continue;
            double d = (pos[j] - pos[i]).squaredNorm();
            if (d < best) { // nbrs ascending, so ties keep the lower index
                best = d;
                label[i] = label[j];
            }
        }
    }

    std::vector<InstanceMask> out(next_label);
    for (std::size_t i = 0; i < n; ++i)
        if (label[i] != kNone) out[label[i]].point_indices.push_back(pts[i]);
    std::erase_if(out, [&](const InstanceMask& m) {
        return m.point_indices.size() < static_cast<std::size_t>(cfg.min_cluster_size);
    });
    std::sort(out.begin(), out.end(), [](const InstanceMask& a, const InstanceMask& b) {
        if (a.point_indices.size() != b.point_indices.size()) return a.point_indices.size() > b.point_indices.size();
        return a.point_indices.front() < b.point_indices.front();
    });
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k].instance_id = static_cast<std::uint32_t>(k);
        if (!point_scores.empty()) {
            double s = 0.0;
            for (auto p : out[k].point_indices) s += point_scores[p];
            out[k].score = s / static_cast<double>(out[k].point_indices.size());
        }
    }
    return out;
}

Rgb heatmap_color(double score, const ScoreWindow& w) {
    double t = 0.5;
    if (w.hi > w.lo) t = std::clamp((score - w.lo) / (w.hi - w.lo), 0.0, 1.0);
    auto ch = [](double v) { return static_cast<std::uint8_t>(std::floor(v + 0.5)); };
    // blue (0,0,255) -> yellow (255,255,0)
    return {ch(255.0 * t), ch(255.0 * t), ch(255.0 * (1.0 - t))};
}

namespace {

std::vector<PlyColumn> position_columns(const PointCloud& cloud) {
    std::vector<PlyColumn> cols;
    const char* axes[] = {"x", "y", "z"};
    for (int a = 0; a < 3; ++a) {
        PlyColumn c{axes[a], PlyType::Float64, {}};
        c.values.reserve(cloud.size());
        for (const auto& p : cloud.positions) c.values.push_back(p[a]);
        cols.push_back(std::move(c));
    }
    return cols;
}

void add_colors(std::vector<PlyColumn>& cols, const std::vector<Rgb>& colors) {
    const char* names[] = {"red", "green", "blue"};
    for (std::size_t a = 0; a < 3; ++a) {
        PlyColumn c{names[a], PlyType::UInt8, {}};
        c.values.reserve(colors.size());
        for (const auto& col : colors) c.values.push_back(col[a]);
        cols.push_back(std::move(c));
    }
}

template <typename Fn>
void guarded_write(const std::filesystem::path& path, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        if (e.code() == ErrorCode::IoFailure || e.code() == ErrorCode::MissingFile)
            throw Error(ErrorCode::IoFailure, "cannot write " + path.string() + ": " + e.what());
        throw;
    }
}

} // namespace

void export_heatmap(const QueryResult& result, const PointCloud& cloud, const std::filesystem::path& path) {
    if (result.point_scores.size() != cloud.size())
        throw Error(ErrorCode::InvalidArgument, "score array length differs from cloud size");
    std::vector<Rgb> colors(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) colors[i] = heatmap_color(result.point_scores[i], result.normalization);
    auto cols = position_columns(cloud);
    add_colors(cols, colors);
    cols.push_back({"score", PlyType::Float32, std::vector<double>(result.point_scores.begin(), result.point_scores.end())});
    guarded_write(path, [&] { write_ply(path, cols); });
}

Rgb instance_color(std::uint32_t id) {
    // fixed categorical palette, none of them gray
    static constexpr Rgb palette[] = {
        {230, 25, 75},  {60, 180, 75},  {255, 225, 25}, {0, 130, 200},  {245, 130, 48},  {145, 30, 180},
        {70, 240, 240}, {240, 50, 230}, {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
        {170, 110, 40}, {255, 250, 200}, {128, 0, 0},   {170, 255, 195}, {128, 128, 0},  {255, 215, 180},
        {0, 0, 128},
    };
    return palette[id % std::size(palette)];
}

void export_instances(const std::vector<InstanceMask>& instances, const PointCloud& cloud,
                      const std::filesystem::path& path) {
    std::vector<double> ids(cloud.size(), -1.0);
    std::vector<Rgb> colors(cloud.size(), kNoiseColor);
    for (const auto& inst : instances)
        for (auto p : inst.point_indices) {
            if (p >= cloud.size()) throw Error(ErrorCode::InvalidArgument, "instance point index out of range");
            ids[p] = inst.instance_id;
            colors[p] = instance_color(inst.instance_id);
        }
    auto cols = position_columns(cloud);
    add_colors(cols, colors);
    cols.push_back({"instance", PlyType::Int32, std::move(ids)});
    guarded_write(path, [&] { write_ply(path, cols); });
}

nlohmann::json result_to_json(const QueryResult& result, const std::vector<InstanceMask>& instances) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [id, s] : result.sp_scores) scores[std::to_string(id)] = s;
    nlohmann::json inst = nlohmann::json::array();
    for (const auto& m : instances)
        inst.push_back({{"id", m.instance_id}, {"size", m.point_indices.size()}, {"score", m.score},
                        {"point_indices", m.point_indices}});
    return {{"prompt", result.prompt},
            {"sp_scores", std::move(scores)},
            {"normalization", {{"lo", result.normalization.lo}, {"hi", result.normalization.hi}}},
            {"instances", std::move(inst)}};
}

} // namespace ovseg
