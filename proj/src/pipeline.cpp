#include "ovseg/pipeline.hpp"

#include "ovseg/error.hpp"
#include "ovseg/hash.hpp"
#include "ovseg/http_provider.hpp"
#include "ovseg/synthetic_provider.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

namespace ovseg {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// config

void PipelineConfig::validate() const {
    if (manifest.empty()) throw Error(ErrorCode::InvalidConfig, "config: scene manifest path is empty");
    if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidConfig, "config: voxel_size must be positive");
    if (normal_k < 3) throw Error(ErrorCode::InvalidConfig, "config: normal_k must be >= 3");
    overseg.validate();
    occlusion.validate();
    if (views.top_k < 1) throw Error(ErrorCode::InvalidConfig, "config: views.k must be >= 1");
    if (views.min_visible < 1) throw Error(ErrorCode::InvalidConfig, "config: views.min_visible must be >= 1");
    features.validate();
    merge.validate();
    cluster.validate();
    if (merge_provider_url.empty() || query_provider_url.empty())
        throw Error(ErrorCode::InvalidConfig, "config: provider URLs must be set");
    if (cache_dir.empty()) throw Error(ErrorCode::InvalidConfig, "config: cache_dir is empty");
}

json PipelineConfig::to_json() const {
    return {
        {"scene", {{"manifest", manifest.string()}, {"voxel_size", voxel_size}, {"normal_k", normal_k}}},
        {"overseg",
         {{"target_points_per_sp", overseg.target_points_per_sp},
          {"lambda_normal", overseg.lambda_normal},
          {"lloyd_iterations", overseg.lloyd_iterations},
          {"knn_adjacency_k", overseg.knn_adjacency_k}}},
        {"occlusion", {{"abs_tolerance", occlusion.abs_tolerance}, {"rel_tolerance", occlusion.rel_tolerance}}},
        {"views", {{"k", views.top_k}, {"min_visible", views.min_visible}}},
        {"features",
         {{"prompts_per_view", features.prompts_per_view},
          {"crop_padding", features.crop_padding},
          {"min_mask_pixels", features.min_mask_pixels},
          {"max_in_flight", features.max_in_flight}}},
        {"merge", {{"tau", merge.tau}, {"rounds", merge.rounds}, {"reextract_each_round", merge.reextract_each_round}}},
        {"cluster",
         {{"threshold_mode", cluster.mode == ThresholdMode::Absolute ? "absolute" : "percentile"},
          {"threshold", cluster.value},
          {"epsilon", cluster.epsilon},
          {"min_cluster_size", cluster.min_cluster_size}}},
        {"providers", {{"merge_provider_url", merge_provider_url}, {"query_provider_url", query_provider_url}}},
        {"cache_dir", cache_dir.string()},
        {"seed", seed},
    };
}

namespace {

template <typename T>
void read_opt(const json& j, const char* section, const char* key, T& out) {
    if (!j.contains(section)) return;
    const auto& s = j.at(section);
    if (!s.is_object()) throw Error(ErrorCode::InvalidConfig, std::string("config: '") + section + "' must be an object");
    if (!s.contains(key)) return;
    try {
        out = s.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidConfig, std::string("config: ") + section + "." + key + " has the wrong type");
    }
}

fs::path resolve_against(const fs::path& base, const fs::path& p) {
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

} // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config root must be an object");
    PipelineConfig c;
    std::string manifest, cache_dir = c.cache_dir.string(), mode = "percentile";
    read_opt(j, "scene", "manifest", manifest);
    read_opt(j, "scene", "voxel_size", c.voxel_size);
    read_opt(j, "scene", "normal_k", c.normal_k);
    read_opt(j, "overseg", "target_points_per_sp", c.overseg.target_points_per_sp);
    read_opt(j, "overseg", "lambda_normal", c.overseg.lambda_normal);
    read_opt(j, "overseg", "lloyd_iterations", c.overseg.lloyd_iterations);
    read_opt(j, "overseg", "knn_adjacency_k", c.overseg.knn_adjacency_k);
    read_opt(j, "occlusion", "abs_tolerance", c.occlusion.abs_tolerance);
    read_opt(j, "occlusion", "rel_tolerance", c.occlusion.rel_tolerance);
    read_opt(j, "views", "k", c.views.top_k);
    read_opt(j, "views", "min_visible", c.views.min_visible);
    read_opt(j, "features", "prompts_per_view", c.features.prompts_per_view);
    read_opt(j, "features", "crop_padding", c.features.crop_padding);
    read_opt(j, "features", "min_mask_pixels", c.features.min_mask_pixels);
    read_opt(j, "features", "max_in_flight", c.features.max_in_flight);
    read_opt(j, "merge", "tau", c.merge.tau);
    read_opt(j, "merge", "rounds", c.merge.rounds);
    read_opt(j, "merge", "reextract_each_round", c.merge.reextract_each_round);
    read_opt(j, "cluster", "threshold_mode", mode);
    read_opt(j, "cluster", "threshold", c.cluster.value);
    read_opt(j, "cluster", "epsilon", c.cluster.epsilon);
    read_opt(j, "cluster", "min_cluster_size", c.cluster.min_cluster_size);
    read_opt(j, "providers", "merge_provider_url", c.merge_provider_url);
    read_opt(j, "providers", "query_provider_url", c.query_provider_url);
    if (j.contains("cache_dir")) {
        if (!j.at("cache_dir").is_string()) throw Error(ErrorCode::InvalidConfig, "config: cache_dir must be a string");
        cache_dir = j.at("cache_dir").get<std::string>();
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw Error(ErrorCode::InvalidConfig, "config: seed must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (mode == "absolute") c.cluster.mode = ThresholdMode::Absolute;
    else if (mode == "percentile") c.cluster.mode = ThresholdMode::Percentile;
    else throw Error(ErrorCode::InvalidConfig, "config: cluster.threshold_mode must be 'absolute' or 'percentile'");
    c.manifest = resolve_against(base_dir, manifest);
    c.cache_dir = resolve_against(base_dir, cache_dir);
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

std::unique_ptr<FeatureProvider> make_provider(const std::string& url) {
    if (url == "synthetic") return std::make_unique<SyntheticProvider>();
    if (url.rfind("synthetic:", 0) == 0) {
        std::size_t dim = 0;
        try {
            dim = std::stoul(url.substr(10));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidConfig, "bad synthetic provider dimension in '" + url + "'");
        }
        if (dim == 0) throw Error(ErrorCode::InvalidConfig, "synthetic provider dimension must be positive");
        return std::make_unique<SyntheticProvider>(dim);
    }
    HttpProviderOptions opts;
    opts.url = url;
    return std::make_unique<HttpProvider>(opts);
}

// ---------------------------------------------------------------------------
// stage keys

namespace {

std::string manifest_key(const fs::path& manifest) {
    ContentHasher h;
    h.text("load").u64(kCacheFormatVersion);
    if (!fs::exists(manifest)) throw Error(ErrorCode::MissingFile, manifest.string());
    h.file(manifest);
    // fold in every file the manifest references; malformed manifests are
    // reported by load_scene itself
    try {
        auto j = json::parse(read_file_bytes(manifest));
        const auto base = manifest.parent_path();
        auto add = [&](const json& v) {
            if (!v.is_string()) return;
            fs::path p = resolve_against(base, v.get<std::string>());
            h.text(v.get<std::string>());
            if (fs::exists(p)) h.file(p);
        };
        if (j.contains("cloud")) add(j["cloud"]);
        if (j.contains("mesh")) add(j["mesh"]);
        if (j.contains("views") && j["views"].is_array())
            for (const auto& v : j["views"]) {
                if (!v.is_object()) continue;
                if (v.contains("rgb")) add(v["rgb"]);
                if (v.contains("depth")) add(v["depth"]);
            }
    } catch (const json::exception&) {
    }
    return h.hex_digest();
}

} // namespace

StageKeys compute_stage_keys(const PipelineConfig& cfg) {
    StageKeys k;
    k.load = manifest_key(cfg.manifest);
    k.downsample = ContentHasher().text("downsample").text(k.load).f64(cfg.voxel_size).u64(cfg.normal_k).hex_digest();
    const auto& o = cfg.overseg;
    k.superpoints = ContentHasher()
                        .text("superpoints")
                        .text(k.downsample)
                        .u64(o.target_points_per_sp)
                        .f64(o.lambda_normal)
                        .u64(o.lloyd_iterations)
                        .u64(o.knn_adjacency_k)
                        .u64(derive_seed(cfg.seed, "superpoints"))
                        .hex_digest();
    k.visibility = ContentHasher()
                       .text("visibility")
                       .text(k.superpoints)
                       .f64(cfg.occlusion.abs_tolerance)
                       .f64(cfg.occlusion.rel_tolerance)
                       .hex_digest();
    const auto& f = cfg.features;
    // max_in_flight only changes scheduling, never results
    k.features = ContentHasher()
                     .text("features")
                     .text(k.visibility)
                     .u64(cfg.views.top_k)
                     .u64(cfg.views.min_visible)
                     .u64(f.prompts_per_view)
                     .f64(f.crop_padding)
                     .u64(f.min_mask_pixels)
                     .u64(derive_seed(cfg.seed, "features"))
                     .f64(cfg.merge.tau)
                     .u64(cfg.merge.rounds)
                     .u64(cfg.merge.reextract_each_round)
                     .text(cfg.merge_provider_url)
                     .text(cfg.query_provider_url)
                     .hex_digest();
    return k;
}

fs::path stage_path(const PipelineConfig& cfg, const std::string& stage, const std::string& key) {
    return cfg.cache_dir / (stage + "-" + key.substr(0, 32) + ".ovsg");
}

// ---------------------------------------------------------------------------
// prepare

namespace {

void note(std::ostream* log, const StageStatus& s) {
    if (log) *log << s.name << ": " << (s.cached ? "cached" : "computed") << " (" << s.key.substr(0, 12) << ")\n";
}

void save_graph_cache(const SuperpointGraph& g, const fs::path& path) {
    BinaryWriter w;
    w.put_header(CacheKind::Graph);
    write_graph(w, g);
    w.save(path);
}

SuperpointGraph load_graph_cache(const fs::path& path, const PointCloud& cloud) {
    auto r = BinaryReader::from_file(path);
    r.expect_header(CacheKind::Graph);
    auto g = read_graph(r, cloud);
    if (!r.at_end()) throw Error(ErrorCode::CorruptCache, path.string() + ": trailing bytes");
    return g;
}

void save_visibility_cache(const VisibilityTable& t, const fs::path& path) {
    BinaryWriter w;
    w.put_header(CacheKind::Visibility);
    write_visibility(w, t);
    w.save(path);
}

VisibilityTable load_visibility_cache(const fs::path& path) {
    auto r = BinaryReader::from_file(path);
    r.expect_header(CacheKind::Visibility);
    auto t = read_visibility(r);
    if (!r.at_end()) throw Error(ErrorCode::CorruptCache, path.string() + ": trailing bytes");
    return t;
}

} // namespace

PreparedScene cmd_prepare(const PipelineConfig& cfg, std::ostream* log) {
    cfg.validate();
    fs::create_directories(cfg.cache_dir);
    const auto keys = compute_stage_keys(cfg);
    PreparedScene out;

    const auto down_path = stage_path(cfg, "downsample", keys.downsample);
    if (fs::exists(down_path)) {
        out.stages.push_back({"load", keys.load, true});
        out.stages.push_back({"downsample", keys.downsample, true});
        out.scene = load_scene_cache(down_path);
    } else {
        const auto load_path = stage_path(cfg, "load", keys.load);
        SceneBundle raw;
        if (fs::exists(load_path)) {
            raw = load_scene_cache(load_path);
            out.stages.push_back({"load", keys.load, true});
        } else {
            raw = load_scene(cfg.manifest, cfg.voxel_size);
            save_scene_cache(raw, load_path);
            out.stages.push_back({"load", keys.load, false});
        }
        SceneBundle s;
        s.voxel_size = cfg.voxel_size;
        s.views = std::move(raw.views);
        s.cloud = fill_missing_normals(voxel_downsample(raw.cloud, cfg.voxel_size), cfg.normal_k);
        if (raw.mesh) {
            s.mesh = std::move(raw.mesh);
            attach_mesh(*s.mesh, s.cloud, cfg.voxel_size);
        }
        save_scene_cache(s, down_path);
        out.scene = std::move(s);
        out.stages.push_back({"downsample", keys.downsample, false});
    }
    note(log, out.stages[0]);
    note(log, out.stages[1]);

    const TriangleMesh* mesh = out.scene.mesh ? &*out.scene.mesh : nullptr;
    const auto sp_path = stage_path(cfg, "superpoints", keys.superpoints);
    bool sp_cached = fs::exists(sp_path);
    if (sp_cached) {
        out.graph = load_graph_cache(sp_path, out.scene.cloud);
    } else {
        auto ocfg = cfg.overseg;
        ocfg.seed = derive_seed(cfg.seed, "superpoints");
        out.graph = oversegment(out.scene.cloud, mesh, ocfg);
        save_graph_cache(out.graph, sp_path);
    }
    out.stages.push_back({"superpoints", keys.superpoints, sp_cached});
    note(log, out.stages.back());

    const auto vis_path = stage_path(cfg, "visibility", keys.visibility);
    bool vis_cached = fs::exists(vis_path);
    if (vis_cached) {
        out.visibility = load_visibility_cache(vis_path);
    } else {
        out.visibility = build_visibility(out.graph, out.scene.cloud, out.scene.views, cfg.occlusion);
        save_visibility_cache(out.visibility, vis_path);
    }
    out.stages.push_back({"visibility", keys.visibility, vis_cached});
    note(log, out.stages.back());
    return out;
}

PreparedScene load_prepared(const PipelineConfig& cfg) {
    cfg.validate();
    const auto keys = compute_stage_keys(cfg);
    auto require = [&](const std::string& stage, const std::string& key) {
        auto p = stage_path(cfg, stage, key);
        if (!fs::exists(p)) throw Error(ErrorCode::MissingStage, stage + " stage not cached; run `prepare` first");
        return p;
    };
    PreparedScene out;
    out.scene = load_scene_cache(require("downsample", keys.downsample));
    out.graph = load_graph_cache(require("superpoints", keys.superpoints), out.scene.cloud);
    out.visibility = load_visibility_cache(require("visibility", keys.visibility));
    out.stages = {{"load", keys.load, true},
                  {"downsample", keys.downsample, true},
                  {"superpoints", keys.superpoints, true},
                  {"visibility", keys.visibility, true}};
    return out;
}

// ---------------------------------------------------------------------------
// features

namespace {

void write_report(BinaryWriter& w, const MergeReport& report, const std::vector<MergeDecision>& decisions) {
    w.put<std::uint64_t>(report.size());
    for (const auto& s : report) {
        w.put<std::uint64_t>(s.n_superpoints_before);
        w.put<std::uint64_t>(s.n_merges);
        w.put<std::uint64_t>(s.n_superpoints_after);
        w.put<double>(s.mean_edge_similarity);
    }
    w.put<std::uint64_t>(decisions.size());
    for (const auto& d : decisions) {
        w.put<std::uint32_t>(d.a);
        w.put<std::uint32_t>(d.b);
        w.put<double>(d.similarity);
    }
}

MergeReport read_stats(BinaryReader& r) {
    auto n = r.get<std::uint64_t>();
    if (n > (1u << 20)) throw Error(ErrorCode::CorruptCache, "merge report too long");
    MergeReport report(n);
    for (auto& s : report) {
        s.n_superpoints_before = r.get<std::uint64_t>();
        s.n_merges = r.get<std::uint64_t>();
        s.n_superpoints_after = r.get<std::uint64_t>();
        s.mean_edge_similarity = r.get<double>();
    }
    return report;
}

std::vector<MergeDecision> read_decisions(BinaryReader& r) {
    auto n = r.get<std::uint64_t>();
    if (n > (1u << 28)) throw Error(ErrorCode::CorruptCache, "decision log too long");
    std::vector<MergeDecision> out(n);
    for (auto& d : out) {
        d.a = r.get<std::uint32_t>();
        d.b = r.get<std::uint32_t>();
        d.similarity = r.get<double>();
    }
    return out;
}

void save_checkpoint(const MergeLoopState& s, const fs::path& path) {
    BinaryWriter w;
    w.put_header(CacheKind::MergeCheckpoint);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.rounds_done));
    w.put<std::uint8_t>(s.finished ? 1 : 0);
    write_graph(w, s.graph);
    write_features(w, s.features);
    write_report(w, s.report, s.decisions);
    w.save(path);
}

MergeLoopState load_checkpoint(const fs::path& path, const PointCloud& cloud) {
    auto r = BinaryReader::from_file(path);
    r.expect_header(CacheKind::MergeCheckpoint);
    MergeLoopState s;
    s.rounds_done = static_cast<int>(r.get<std::uint32_t>());
    s.finished = r.get<std::uint8_t>() != 0;
    s.graph = read_graph(r, cloud);
    s.features = read_features(r);
    s.report = read_stats(r);
    s.decisions = read_decisions(r);
    if (!r.at_end()) throw Error(ErrorCode::CorruptCache, path.string() + ": trailing bytes");
    return s;
}

void save_feature_file(const FeatureMap& f, const std::string& provider, const fs::path& path) {
    BinaryWriter w;
    w.put_header(CacheKind::Features);
    w.put_string(provider);
    write_features(w, f);
    w.save(path);
}

std::pair<std::string, FeatureMap> load_feature_file(const fs::path& path) {
    auto r = BinaryReader::from_file(path);
    r.expect_header(CacheKind::Features);
    auto name = r.get_string();
    auto f = read_features(r);
    if (!r.at_end()) throw Error(ErrorCode::CorruptCache, path.string() + ": trailing bytes");
    return {std::move(name), std::move(f)};
}

void check_dims(const FeatureMap& f, std::size_t dim, const std::string& who) {
    for (const auto& [id, v] : f)
        if (v.dim() != dim)
            throw Error(ErrorCode::DimMismatch, who + " feature of superpoint " + std::to_string(id) + " has dim " +
                                                    std::to_string(v.dim()) + ", provider dim " + std::to_string(dim));
}

} // namespace

FeatureArtifacts cmd_features(const PipelineConfig& cfg, FeatureProvider& merge_provider,
                              FeatureProvider& query_provider, std::ostream* log, const FeatureRunHooks& hooks) {
    auto prepared = load_prepared(cfg);
    const auto keys = compute_stage_keys(cfg);
    const auto merged_path = stage_path(cfg, "merged", keys.features);
    const auto merge_feat_path = stage_path(cfg, "features-merge", keys.features);
    const auto query_feat_path = stage_path(cfg, "features-query", keys.features);
    if (fs::exists(merged_path) && fs::exists(merge_feat_path) && fs::exists(query_feat_path)) {
        if (log) *log << "features: cached (" << keys.features.substr(0, 12) << ")\n";
        return load_features(cfg, prepared.scene.cloud);
    }

    const auto merge_info = merge_provider.info();
    const auto query_info = query_provider.info();
    const auto& cloud = prepared.scene.cloud;
    const auto& views = prepared.scene.views;
    auto fcfg = cfg.features;
    fcfg.seed = derive_seed(cfg.seed, "features");

    const auto ckpt_path = stage_path(cfg, "merge-checkpoint", keys.features);
    MergeLoopState state;
    if (fs::exists(ckpt_path)) {
        state = load_checkpoint(ckpt_path, cloud);
        check_dims(state.features, merge_info.dim, "checkpointed");
        if (log) *log << "merge: resuming after round " << state.rounds_done << "\n";
    } else {
        std::vector<SuperpointId> ids(prepared.graph.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<SuperpointId>(i);
        state.graph = prepared.graph;
        state.features = extract_features(ids, prepared.visibility, views, merge_provider, fcfg, cfg.views);
        save_checkpoint(state, ckpt_path);
        if (log) *log << "features: extracted " << state.features.size() << " of " << ids.size() << " superpoints\n";
        if (hooks.on_checkpoint) hooks.on_checkpoint(0);
    }

    MergeLoopHooks mh;
    mh.recompute_visibility = [&](const SuperpointGraph& g, std::span<const SuperpointId> subset) {
        return build_visibility(g, cloud, views, cfg.occlusion, subset);
    };
    mh.on_round_complete = [&](const MergeLoopState& s) {
        save_checkpoint(s, ckpt_path);
        if (log && !s.report.empty()) {
            const auto& r = s.report.back();
            *log << "merge round " << s.rounds_done << ": " << r.n_superpoints_before << " -> " << r.n_superpoints_after
                 << " (" << r.n_merges << " merges)\n";
        }
        if (hooks.on_checkpoint) hooks.on_checkpoint(s.rounds_done);
    };
    if (!state.finished)
        state = run_merge_loop(std::move(state), cloud, views, merge_provider, mh, cfg.merge, fcfg, cfg.views);

    auto table = build_visibility(state.graph, cloud, views, cfg.occlusion);
    auto query_features = final_feature_pass(state.graph, table, views, query_provider, fcfg, cfg.views);
    check_dims(query_features, query_info.dim, "query");

    FeatureArtifacts out;
    out.graph = std::move(state.graph);
    out.merge_features = std::move(state.features);
    out.query_features = std::move(query_features);
    out.merge_provider = merge_info.name;
    out.query_provider = query_info.name;
    out.report = std::move(state.report);
    out.decisions = std::move(state.decisions);

    save_feature_file(out.merge_features, out.merge_provider, merge_feat_path);
    save_feature_file(out.query_features, out.query_provider, query_feat_path);
    BinaryWriter w;
    w.put_header(CacheKind::MergedState);
    write_graph(w, out.graph);
    write_report(w, out.report, out.decisions);
    w.save(merged_path);
    std::ofstream(stage_path(cfg, "merge-report", keys.features).replace_extension(".jsonl"))
        << report_to_json_lines(out.report);
    if (log) *log << "features: computed (" << keys.features.substr(0, 12) << "), " << out.graph.size()
                  << " superpoints after merging\n";
    return out;
}

FeatureArtifacts load_features(const PipelineConfig& cfg, const PointCloud& cloud) {
    const auto keys = compute_stage_keys(cfg);
    const auto merged_path = stage_path(cfg, "merged", keys.features);
    const auto merge_feat_path = stage_path(cfg, "features-merge", keys.features);
    const auto query_feat_path = stage_path(cfg, "features-query", keys.features);
    for (const auto& p : {merged_path, merge_feat_path, query_feat_path})
        if (!fs::exists(p)) throw Error(ErrorCode::MissingStage, "features stage not cached; run `features` first");
    FeatureArtifacts out;
    auto r = BinaryReader::from_file(merged_path);
    r.expect_header(CacheKind::MergedState);
    out.graph = read_graph(r, cloud);
    out.report = read_stats(r);
    out.decisions = read_decisions(r);
    if (!r.at_end()) throw Error(ErrorCode::CorruptCache, merged_path.string() + ": trailing bytes");
    std::tie(out.merge_provider, out.merge_features) = load_feature_file(merge_feat_path);
    std::tie(out.query_provider, out.query_features) = load_feature_file(query_feat_path);
    return out;
}

// ---------------------------------------------------------------------------
// query and stats

QueryOutput cmd_query(const PipelineConfig& cfg, FeatureProvider& query_provider, const QueryOptions& opts,
                      std::ostream& out) {
    if (opts.prompt.empty()) throw Error(ErrorCode::EmptyPrompt, "query prompt is empty");
    auto prepared = load_prepared(cfg);
    auto features = load_features(cfg, prepared.scene.cloud);
    const auto& cloud = prepared.scene.cloud;

    QueryOutput q;
    q.result = score_query(opts.prompt, features.query_features, query_provider, features.graph);
    auto ccfg = cfg.cluster;
    if (opts.threshold) {
        ccfg.mode = ThresholdMode::Absolute;
        ccfg.value = *opts.threshold;
    }
    if (opts.cluster) q.instances = cluster_instances(threshold_points(q.result, ccfg), cloud, ccfg, q.result.point_scores);

    if (opts.heatmap_path) export_heatmap(q.result, cloud, *opts.heatmap_path);
    if (opts.instances_path) export_instances(q.instances, cloud, *opts.instances_path);
    if (opts.json_path) {
        std::ofstream f(*opts.json_path);
        if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + opts.json_path->string());
        f << result_to_json(q.result, q.instances).dump(2) << '\n';
    }

    std::vector<std::pair<SuperpointId, double>> ranked(q.result.sp_scores.begin(), q.result.sp_scores.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    out << "prompt: " << opts.prompt << "\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.size()); ++i) {
        const auto& sp = features.graph.superpoints[ranked[i].first];
        out << "  #" << i + 1 << "  superpoint " << ranked[i].first << "  score " << ranked[i].second << "  ("
            << sp.member_count() << " points)\n";
    }
    if (opts.cluster) out << "instances: " << q.instances.size() << "\n";
    return q;
}

void cmd_stats(const PipelineConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto keys = compute_stage_keys(cfg);
    const std::pair<const char*, std::string> stages[] = {{"load", keys.load},
                                                         {"downsample", keys.downsample},
                                                         {"superpoints", keys.superpoints},
                                                         {"visibility", keys.visibility},
                                                         {"merged", keys.features}};
    for (const auto& [name, key] : stages)
        out << name << ": " << (fs::exists(stage_path(cfg, name, key)) ? "cached" : "missing") << " ("
            << key.substr(0, 12) << ")\n";

    auto print_graph = [&](const char* label, const SuperpointGraph& g) {
        auto s = graph_stats(g);
        out << label << ": " << s.n_superpoints << " superpoints, " << s.n_edges << " edges, size mean "
            << s.mean_size << " min " << s.min_size << " max " << s.max_size << "\n";
    };
    PreparedScene prepared;
    try {
        prepared = load_prepared(cfg);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MissingStage) throw;
        return;
    }
    out << "points: " << prepared.scene.cloud.size() << ", views: " << prepared.scene.views.size() << "\n";
    print_graph("oversegmentation", prepared.graph);
    try {
        auto f = load_features(cfg, prepared.scene.cloud);
        print_graph("merged", f.graph);
        out << "merge features: " << f.merge_features.size() << " (" << f.merge_provider << ")\n";
        out << "query features: " << f.query_features.size() << " (" << f.query_provider << ")\n";
        out << report_to_json_lines(f.report);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::MissingStage) throw;
    }
}

} // namespace ovseg
