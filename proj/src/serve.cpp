#include "ovseg/serve.hpp"

#include "ovseg/error.hpp"

#include <httplib.h>

#include <cmath>
#include <thread>

namespace ovseg {

using nlohmann::json;

std::vector<std::uint8_t> encode_scene_payload(const PointCloud& cloud, const SuperpointGraph& graph,
                                               double voxel_size) {
    if (!(voxel_size > 0)) throw Error(ErrorCode::InvalidArgument, "voxel_size must be positive");
    if (graph.point_to_sp.size() != cloud.size())
        throw Error(ErrorCode::InvalidArgument, "graph does not cover the cloud");
    Vec3 origin = Vec3::Zero();
    if (cloud.size() > 0) {
        origin = cloud.positions[0];
        for (const auto& p : cloud.positions) origin = origin.cwiseMin(p);
    }
    json header = {{"format", "ovseg-scene"},
                   {"version", 1},
                   {"point_count", cloud.size()},
                   {"superpoint_count", graph.size()},
                   {"voxel_size", voxel_size},
                   {"origin", {origin.x(), origin.y(), origin.z()}},
                   {"blocks",
                    {{{"name", "position"}, {"type", "int32"}, {"components", 3}},
                     {{"name", "color"}, {"type", "uint8"}, {"components", 3}},
                     {{"name", "superpoint"}, {"type", "uint32"}, {"components", 1}}}}};
    std::string h = header.dump();
    while (h.size() % 4) h.push_back(' ');

    BinaryWriter w;
    for (char c : std::string_view("OVSC")) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(h.size()));
    for (char c : h) w.put<std::uint8_t>(static_cast<std::uint8_t>(c));
    for (const auto& p : cloud.positions)
        for (int a = 0; a < 3; ++a) {
            double q = std::floor((p[a] - origin[a]) / voxel_size + 0.5);
            if (q > INT32_MAX) throw Error(ErrorCode::InvalidArgument, "scene too large for the voxel grid");
            w.put<std::int32_t>(static_cast<std::int32_t>(q));
        }
    for (const auto& c : cloud.colors)
        for (auto v : c) w.put<std::uint8_t>(v);
    for (std::size_t i = (3 * cloud.size()) % 4; i % 4 != 0; ++i) w.put<std::uint8_t>(0);
    for (auto id : graph.point_to_sp) w.put<std::uint32_t>(id);
    return w.bytes();
}

struct SceneServer::Impl {
    PipelineConfig cfg;
    PreparedScene prepared;
    FeatureArtifacts features;
    FeatureProvider& provider;
    std::string scene_payload;
    std::string meta;
    httplib::Server server;
    std::thread thread;

    Impl(PipelineConfig c, PreparedScene p, FeatureArtifacts f, FeatureProvider& prov)
        : cfg(std::move(c)), prepared(std::move(p)), features(std::move(f)), provider(prov) {}

    static void reply_error(httplib::Response& res, int status, const std::string& msg) {
        res.status = status;
        res.set_content(json{{"error", msg}}.dump(), "application/json");
    }

    // Runs fn, translating failures into HTTP status codes.
    template <typename Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            switch (e.code()) {
            case ErrorCode::ProviderUnavailable: return reply_error(res, 503, e.what());
            case ErrorCode::EmptyPrompt:
            case ErrorCode::InvalidConfig:
            case ErrorCode::InvalidArgument: return reply_error(res, 400, e.what());
            default: return reply_error(res, 500, e.what());
            }
        } catch (const json::exception& e) {
            reply_error(res, 400, std::string("malformed request: ") + e.what());
        } catch (const std::exception& e) {
            reply_error(res, 500, e.what());
        }
    }

    static std::string prompt_of(const json& body) {
        if (!body.is_object() || !body.contains("prompt") || !body.at("prompt").is_string())
            throw Error(ErrorCode::InvalidArgument, "request needs a string 'prompt'");
        return body.at("prompt").get<std::string>();
    }

    void routes() {
        server.Get("/api/scene", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(scene_payload, "application/octet-stream");
        });
        server.Get("/api/meta", [this](const httplib::Request&, httplib::Response& res) {
            res.set_content(meta, "application/json");
        });
        server.Post("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto prompt = prompt_of(json::parse(req.body));
                auto r = score_query(prompt, features.query_features, provider, features.graph);
                json scores = json::array();
                for (std::size_t i = 0; i < features.graph.size(); ++i) {
                    auto it = r.sp_scores.find(static_cast<SuperpointId>(i));
                    scores.push_back(it == r.sp_scores.end() ? json(nullptr) : json(it->second));
                }
                res.set_content(json{{"prompt", prompt},
                                     {"sp_scores", std::move(scores)},
                                     {"normalization", {{"lo", r.normalization.lo}, {"hi", r.normalization.hi}}}}
                                    .dump(),
                                "application/json");
            });
        });
        server.Post("/api/instances", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto body = json::parse(req.body);
                auto prompt = prompt_of(body);
                auto ccfg = cfg.cluster;
                if (body.contains("threshold") && !body.at("threshold").is_null()) {
                    ccfg.mode = ThresholdMode::Absolute;
                    ccfg.value = body.at("threshold").get<double>();
                }
                if (body.contains("epsilon")) ccfg.epsilon = body.at("epsilon").get<double>();
                if (body.contains("min_cluster_size")) ccfg.min_cluster_size = body.at("min_cluster_size").get<int>();
                ccfg.validate();
                auto r = score_query(prompt, features.query_features, provider, features.graph);
                auto inst = cluster_instances(threshold_points(r, ccfg), prepared.scene.cloud, ccfg, r.point_scores);
                auto j = result_to_json(r, inst);
                res.set_content(json{{"prompt", prompt}, {"instances", j["instances"]}}.dump(), "application/json");
            });
        });
    }
};

SceneServer::SceneServer(PipelineConfig cfg, PreparedScene prepared, FeatureArtifacts features,
                         FeatureProvider& provider, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(prepared), std::move(features), provider)) {
    auto& m = *impl_;
    if (m.features.graph.point_to_sp.size() != m.prepared.scene.cloud.size())
        throw Error(ErrorCode::CorruptCache, "merged graph does not match the prepared cloud");
    auto payload = encode_scene_payload(m.prepared.scene.cloud, m.features.graph, m.cfg.voxel_size);
    m.scene_payload.assign(payload.begin(), payload.end());
    json report = json::array();
    for (const auto& s : m.features.report) report.push_back(to_json(s));
    m.meta = json{{"config", m.cfg.to_json()},
                  {"point_count", m.prepared.scene.cloud.size()},
                  {"view_count", m.prepared.scene.views.size()},
                  {"superpoint_count", m.features.graph.size()},
                  {"feature_count", m.features.query_features.size()},
                  {"merge_provider", m.features.merge_provider},
                  {"query_provider", m.features.query_provider},
                  {"merge_report", std::move(report)}}
                 .dump();
    m.routes();
    if (static_dir && !m.server.set_mount_point("/", static_dir->string()))
        throw Error(ErrorCode::MissingFile, "static directory " + static_dir->string());
}

SceneServer::~SceneServer() { stop(); }

int SceneServer::start(const std::string& host, int port) {
    auto& s = impl_->server;
    int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
    return bound;
}

void SceneServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port))
        throw Error(ErrorCode::IoFailure, "cannot listen on " + host + ":" + std::to_string(port));
}

void SceneServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace ovseg
