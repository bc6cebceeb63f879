// ovseg command line: staged pipeline, query, serve, plus helpers for
// generating a synthetic scene and serving the synthetic provider over HTTP.

#include "ovseg/error.hpp"
#include "ovseg/http_provider.hpp"
#include "ovseg/pipeline.hpp"
#include "ovseg/serve.hpp"
#include "ovseg/synthetic_provider.hpp"
#include "ovseg/synthetic_scene.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace ovseg;

struct CommonOpts {
    std::string config;
    std::string provider;
};

PipelineConfig load_config(const CommonOpts& o) {
    auto cfg = PipelineConfig::load(o.config);
    if (!o.provider.empty()) {
        if (o.provider.rfind("synthetic", 0) != 0)
            throw Error(ErrorCode::InvalidArgument, "--provider accepts 'synthetic' or 'synthetic:<dim>'");
        cfg.merge_provider_url = o.provider;
        cfg.query_provider_url = o.provider;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_provider) {
    cmd->add_option("-c,--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    if (with_provider)
        cmd->add_option("--provider", o.provider, "'synthetic' overrides both provider URLs with the in-process provider");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-vocabulary 3D segmentation pipeline"};
    app.require_subcommand(1);

    CommonOpts common;

    auto* prepare = app.add_subcommand("prepare", "load, downsample, oversegment and build visibility");
    add_common(prepare, common, false);

    auto* features = app.add_subcommand("features", "extract features, merge, and re-extract with the query provider");
    add_common(features, common, true);

    auto* query = app.add_subcommand("query", "score a text prompt against the cached features");
    add_common(query, common, true);
    QueryOptions qopts;
    double threshold = 0.0;
    bool no_cluster = false;
    std::string heatmap, instances, json_out;
    query->add_option("prompt", qopts.prompt, "text prompt")->required();
    auto* thr_opt = query->add_option("--threshold", threshold, "absolute score threshold for clustering");
    query->add_flag("--no-cluster", no_cluster, "skip instance clustering");
    query->add_option("--heatmap", heatmap, "heatmap PLY output");
    query->add_option("--instances", instances, "instance PLY output");
    query->add_option("--json", json_out, "JSON result output");

    auto* serve = app.add_subcommand("serve", "serve the query API and viewer files");
    add_common(serve, common, true);
    std::string host = "127.0.0.1", static_dir;
    int port = 8080;
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port");
    serve->add_option("--static", static_dir, "viewer bundle directory")->check(CLI::ExistingDirectory);

    auto* stats = app.add_subcommand("stats", "report cached stages and graph statistics");
    add_common(stats, common, false);

    auto* synth = app.add_subcommand("synth", "write the synthetic boxes scene and a matching config");
    std::string synth_out;
    SyntheticSceneConfig scfg;
    synth->add_option("out", synth_out, "output directory")->required();
    synth->add_option("--spacing", scfg.spacing, "point grid pitch in meters");
    synth->add_option("--views", scfg.n_views, "number of views");

    auto* provider = app.add_subcommand("provider", "serve the synthetic provider over the provider protocol");
    std::size_t dim = 64;
    int provider_port = 8765;
    provider->add_option("--dim", dim, "embedding dimension");
    provider->add_option("--port", provider_port, "bind port");
    provider->add_option("--host", host, "bind address");

    auto* config = app.add_subcommand("config", "print a config with every default filled in");
    std::string manifest;
    config->add_option("manifest", manifest, "scene manifest path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*prepare) {
            cmd_prepare(load_config(common), &std::cout);
        } else if (*features) {
            auto cfg = load_config(common);
            auto mp = make_provider(cfg.merge_provider_url);
            auto qp = cfg.query_provider_url == cfg.merge_provider_url ? nullptr : make_provider(cfg.query_provider_url);
            cmd_features(cfg, *mp, qp ? *qp : *mp, &std::cout);
        } else if (*query) {
            auto cfg = load_config(common);
            if (*thr_opt) qopts.threshold = threshold;
            qopts.cluster = !no_cluster;
            if (!heatmap.empty()) qopts.heatmap_path = heatmap;
            if (!instances.empty()) qopts.instances_path = instances;
            if (!json_out.empty()) qopts.json_path = json_out;
            if (qopts.prompt.empty()) throw Error(ErrorCode::EmptyPrompt, "query prompt is empty");
            auto qp = make_provider(cfg.query_provider_url);
            cmd_query(cfg, *qp, qopts, std::cout);
        } else if (*serve) {
            auto cfg = load_config(common);
            auto prepared = load_prepared(cfg);
            auto feats = load_features(cfg, prepared.scene.cloud);
            auto qp = make_provider(cfg.query_provider_url);
            SceneServer server(cfg, std::move(prepared), std::move(feats), *qp,
                               static_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(static_dir));
            std::cout << "serving on http://" << host << ":" << port << std::endl;
            server.run(host, port);
        } else if (*stats) {
            cmd_stats(load_config(common), std::cout);
        } else if (*synth) {
            auto scene = make_synthetic_scene(scfg);
            auto manifest_path = write_synthetic_scene(scene, synth_out);
            PipelineConfig cfg;
            cfg.manifest = "manifest.json";
            cfg.cache_dir = "cache";
            std::ofstream(std::filesystem::path(synth_out) / "config.json") << cfg.to_json().dump(2) << '\n';
            std::cout << "wrote " << scene.cloud.size() << " points, " << scene.views.size() << " views to "
                      << manifest_path.parent_path().string() << "\n";
        } else if (*provider) {
            SyntheticProvider p(dim);
            ProviderServer server(p);
            std::cout << "synthetic provider (dim " << dim << ") on http://" << host << ":" << provider_port
                      << std::endl;
            server.run(host, provider_port);
        } else if (*config) {
            PipelineConfig cfg;
            cfg.manifest = manifest;
            std::cout << cfg.to_json().dump(2) << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
