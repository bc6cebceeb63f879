#include "ovseg/http_provider.hpp"

#include "ovseg/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <thread>

namespace ovseg {

using nlohmann::json;

HttpProvider::HttpProvider(HttpProviderOptions options) : opts_(std::move(options)) {
    if (opts_.url.empty()) throw Error(ErrorCode::InvalidConfig, "provider URL is empty");
    if (opts_.attempts < 1) throw Error(ErrorCode::InvalidConfig, "provider attempts must be >= 1");
}

namespace {

std::string describe(httplib::Error err) { return httplib::to_string(err); }

} // namespace

std::string HttpProvider::request(const std::string& path, const std::string* body) {
    auto backoff = opts_.backoff;
    std::string last_error;
    for (int attempt = 0; attempt < opts_.attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(backoff);
        httplib::Client cli(opts_.url);
        cli.set_connection_timeout(opts_.timeout);
        cli.set_read_timeout(opts_.timeout);
        cli.set_write_timeout(opts_.timeout);
        auto res = body ? cli.Post(path, *body, "application/json") : cli.Get(path);
        if (!res) {
            last_error = describe(res.error());
            backoff *= 2;
            continue;
        }
        if (res->status == 200) return res->body;
        if (res->status == 503) {
            last_error = "503 from " + path;
            backoff *= 2;
            if (res->has_header("Retry-After")) {
                try {
                    auto secs = std::chrono::seconds(std::stol(res->get_header_value("Retry-After")));
                    backoff = std::min<std::chrono::milliseconds>(secs, opts_.max_retry_after);
                } catch (const std::exception&) {
                }
            }
            continue;
        }
        throw Error(ErrorCode::ProviderProtocol,
                    path + " answered HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    throw Error(ErrorCode::ProviderUnavailable,
                opts_.url + path + " unreachable after " + std::to_string(opts_.attempts) + " attempts (" + last_error + ")");
}

std::string HttpProvider::post(const std::string& path, const std::string& body) { return request(path, &body); }

std::string HttpProvider::get(const std::string& path) { return request(path, nullptr); }

FeatureVector HttpProvider::parse_embedding(const std::string& body) {
    std::vector<double> values;
    try {
        values = json::parse(body).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderProtocol, std::string("bad embedding response: ") + e.what());
    }
    auto expected = info().dim;
    if (values.size() != expected)
        throw Error(ErrorCode::ProviderProtocol,
                    "embedding has " + std::to_string(values.size()) + " values, provider reports dim " + std::to_string(expected));
    try {
        return FeatureVector(std::move(values));
    } catch (const Error&) {
        throw Error(ErrorCode::ProviderProtocol, "provider returned a zero embedding");
    }
}

FeatureVector HttpProvider::embed_image(const RgbImage& image) {
    json req = {{"image", base64_encode(encode_png(image))}};
    return parse_embedding(post("/embed_image", req.dump()));
}

FeatureVector HttpProvider::embed_text(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::EmptyPrompt, "empty text prompt");
    json req = {{"text", std::string(text)}};
    return parse_embedding(post("/embed_text", req.dump()));
}

Mask HttpProvider::segment(const RgbImage& image, std::span<const Pixel> prompts) {
    json points = json::array();
    for (const auto& p : prompts) points.push_back({p.u, p.v});
    json req = {{"image", base64_encode(encode_png(image))}, {"points", std::move(points)}};
    auto body = post("/segment", req.dump());
    Mask mask;
    try {
        mask = decode_mask_png(base64_decode(json::parse(body).at("mask").get<std::string>()));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderProtocol, std::string("bad segment response: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::ProviderProtocol, std::string("undecodable mask: ") + e.what());
    }
    if (mask.width != image.width || mask.height != image.height)
        throw Error(ErrorCode::ProviderProtocol, "mask size differs from image size");
    return mask;
}

ProviderInfo HttpProvider::info() {
    std::lock_guard lock(info_mutex_);
    if (info_) return *info_;
    auto body = get("/info");
    ProviderInfo pi;
    try {
        auto j = json::parse(body);
        pi.dim = j.at("dim").get<std::size_t>();
        pi.image_model = j.value("image_model", "");
        pi.text_model = j.value("text_model", "");
        pi.max_in_flight = j.value("max_in_flight", opts_.max_in_flight);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ProviderProtocol, std::string("bad /info response: ") + e.what());
    }
    if (pi.dim == 0) throw Error(ErrorCode::ProviderProtocol, "provider reports dim 0");
    pi.name = opts_.url + " [" + pi.image_model + " | " + pi.text_model + "]";
    if (opts_.max_in_flight > 0)
        pi.max_in_flight = pi.max_in_flight > 0 ? std::min(pi.max_in_flight, opts_.max_in_flight) : opts_.max_in_flight;
    info_ = pi;
    return pi;
}

// ---------------------------------------------------------------------------

struct ProviderServer::Impl {
    FeatureProvider& provider;
    httplib::Server server;
    std::thread thread;
    std::atomic<bool> loading{false};

    explicit Impl(FeatureProvider& p) : provider(p) { routes(); }

    static void bad_request(httplib::Response& res, const std::string& msg) {
        res.status = 400;
        res.set_content(json{{"error", msg}}.dump(), "application/json");
    }

    void routes() {
        server.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
            if (!loading) return httplib::Server::HandlerResponse::Unhandled;
            res.status = 503;
            res.set_header("Retry-After", "1");
            res.set_content(json{{"error", "model loading"}}.dump(), "application/json");
            return httplib::Server::HandlerResponse::Handled;
        });
        server.Get("/info", [this](const httplib::Request&, httplib::Response& res) {
            auto pi = provider.info();
            res.set_content(json{{"dim", pi.dim}, {"image_model", pi.image_model}, {"text_model", pi.text_model}}.dump(),
                            "application/json");
        });
        server.Post("/embed_image", [this](const httplib::Request& req, httplib::Response& res) {
            RgbImage img;
            try {
                img = decode_rgb_png(base64_decode(json::parse(req.body).at("image").get<std::string>()));
            } catch (const std::exception& e) {
                return bad_request(res, e.what());
            }
            auto f = provider.embed_image(img);
            res.set_content(json{{"embedding", std::vector<double>(f.values().begin(), f.values().end())}}.dump(),
                            "application/json");
        });
        server.Post("/embed_text", [this](const httplib::Request& req, httplib::Response& res) {
            std::string text;
            try {
                text = json::parse(req.body).at("text").get<std::string>();
            } catch (const std::exception& e) {
                return bad_request(res, e.what());
            }
            if (text.empty()) return bad_request(res, "empty text");
            auto f = provider.embed_text(text);
            res.set_content(json{{"embedding", std::vector<double>(f.values().begin(), f.values().end())}}.dump(),
                            "application/json");
        });
        server.Post("/segment", [this](const httplib::Request& req, httplib::Response& res) {
            RgbImage img;
            std::vector<Pixel> prompts;
            try {
                auto j = json::parse(req.body);
                img = decode_rgb_png(base64_decode(j.at("image").get<std::string>()));
                for (const auto& p : j.at("points")) prompts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            } catch (const std::exception& e) {
                return bad_request(res, e.what());
            }
            if (prompts.empty()) return bad_request(res, "no prompt points");
            for (const auto& p : prompts)
                if (!(p.u >= 0 && p.v >= 0 && p.u < img.width && p.v < img.height))
                    return bad_request(res, "prompt point outside the image");
            auto mask = provider.segment(img, prompts);
            res.set_content(json{{"mask", base64_encode(encode_mask_png(mask))}}.dump(), "application/json");
        });
    }
};

ProviderServer::ProviderServer(FeatureProvider& provider) : impl_(std::make_unique<Impl>(provider)) {}

ProviderServer::~ProviderServer() { stop(); }

int ProviderServer::start(const std::string& host, int port) {
    int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::IoFailure, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ProviderServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw Error(ErrorCode::IoFailure, "cannot listen on " + host + ":" + std::to_string(port));
}

void ProviderServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void ProviderServer::set_loading(bool loading) { impl_->loading = loading; }

} // namespace ovseg
