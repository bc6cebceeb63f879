#pragma once

#include "ovseg/feature.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace ovseg {

struct HttpProviderOptions {
    std::string url; // scheme://host:port
    int attempts = 4;
    std::chrono::milliseconds backoff{250};
    std::chrono::seconds max_retry_after{30};
    std::chrono::seconds timeout{60};
    int max_in_flight = 4;
};

/// Client for the provider wire protocol (JSON over HTTP, base64 PNG images):
///   POST /embed_image {"image"}            -> {"embedding": [...]}
///   POST /embed_text  {"text"}             -> {"embedding": [...]}
///   POST /segment     {"image", "points"}  -> {"mask": <b64 png>}
///   GET  /info                             -> {"dim", "image_model", "text_model"}
/// Connection failures and 503s are retried with exponential backoff (honoring
/// Retry-After); exhausting the attempts raises ProviderUnavailable. Other
/// non-200 answers raise ProviderProtocol.
class HttpProvider final : public FeatureProvider {
  public:
    explicit HttpProvider(HttpProviderOptions options);

    FeatureVector embed_image(const RgbImage& image) override;
    FeatureVector embed_text(std::string_view text) override;
    Mask segment(const RgbImage& image, std::span<const Pixel> prompts) override;
    ProviderInfo info() override;

  private:
    std::string request(const std::string& path, const std::string* body);
    std::string post(const std::string& path, const std::string& body);
    std::string get(const std::string& path);
    FeatureVector parse_embedding(const std::string& body);

    HttpProviderOptions opts_;
    std::mutex info_mutex_;
    std::optional<ProviderInfo> info_;
};

/// Serves a FeatureProvider over the same wire protocol. Used by the CLI's
/// `provider` subcommand and by tests.
class ProviderServer {
  public:
    explicit ProviderServer(FeatureProvider& provider);
    ~ProviderServer();

    /// Binds (port 0 picks a free port) and serves on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks serving on the calling thread.
    void run(const std::string& host, int port);
    void stop();

    /// While set, every endpoint answers 503 with Retry-After.
    void set_loading(bool loading);

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ovseg
