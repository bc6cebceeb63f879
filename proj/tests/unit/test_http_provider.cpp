#include "oracles.hpp"

#include "ovseg/error.hpp"
#include "ovseg/http_provider.hpp"
#include "ovseg/synthetic_provider.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <thread>

using namespace ovseg;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return ErrorCode::InvalidArgument;
}

std::string url(int port) { return "http://127.0.0.1:" + std::to_string(port); }

HttpProviderOptions fast(int port, int attempts = 3) {
    HttpProviderOptions o;
    o.url = url(port);
    o.attempts = attempts;
    o.backoff = 10ms;
    o.max_retry_after = 0s;
    o.timeout = 5s;
    return o;
}

RgbImage two_color(int w, int h, int split) {
    RgbImage img(w, h, {30, 200, 30});
    for (int y = 0; y < h; ++y)
        for (int x = split; x < w; ++x) img.set(x, y, {200, 30, 200});
    return img;
}

// Minimal stand-in service for protocol violations.
struct FakeService {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    FakeService() = default;
    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeService() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
};

} // namespace

TEST_CASE("http provider round-trips the synthetic provider") {
    SyntheticProvider local(32);
    ProviderServer server(local);
    int port = server.start();
    HttpProvider remote(fast(port));

    auto info = remote.info();
    CHECK(info.dim == 32);
    CHECK(info.max_in_flight == 4);
    CHECK(info.name.find(url(port)) != std::string::npos);

    for (const char* text : {"red", "blue box", "zebra", "ünïcode"}) {
        auto a = remote.embed_text(text), b = local.embed_text(text);
        REQUIRE(a.dim() == b.dim());
        for (std::size_t i = 0; i < a.dim(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
    }
    auto img = two_color(40, 30, 17);
    auto ea = remote.embed_image(img), eb = local.embed_image(img);
    for (std::size_t i = 0; i < ea.dim(); ++i) CHECK(ea[i] == doctest::Approx(eb[i]).epsilon(1e-12));

    std::vector<Pixel> prompt{{5.4, 5.6}};
    auto m = remote.segment(img, prompt);
    CHECK(m == local.segment(img, prompt));
    CHECK(m.count() == 17 * 30);
    CHECK(code_of([&] { remote.embed_text(""); }) == ErrorCode::EmptyPrompt);
}

TEST_CASE("503 answers are retried with backoff") {
    FakeService svc;
    std::atomic<int> calls{0};
    svc.server.Get("/info", [&](const httplib::Request&, httplib::Response& res) {
        if (++calls <= 2) {
            res.status = 503;
            return;
        }
        res.set_content(json{{"dim", 4}}.dump(), "application/json");
    });
    svc.start();
    auto opts = fast(svc.port, 3);
    opts.backoff = 30ms;
    HttpProvider remote(opts);
    auto t0 = std::chrono::steady_clock::now();
    CHECK(remote.info().dim == 4);
    CHECK(std::chrono::steady_clock::now() - t0 >= 90ms); // 30 + 60
    CHECK(calls == 3);

    calls = -10;
    HttpProvider impatient(fast(svc.port, 3));
    CHECK(code_of([&] { impatient.info(); }) == ErrorCode::ProviderUnavailable);
    CHECK(calls == -7);
}

TEST_CASE("Retry-After is honored up to the cap") {
    SyntheticProvider local(16);
    ProviderServer server(local);
    int port = server.start();
    server.set_loading(true);
    auto opts = fast(port, 2);
    opts.max_retry_after = 1s;
    HttpProvider remote(opts);
    std::thread later([&] {
        std::this_thread::sleep_for(200ms);
        server.set_loading(false);
    });
    auto t0 = std::chrono::steady_clock::now();
    auto info = remote.info();
    auto waited = std::chrono::steady_clock::now() - t0;
    later.join();
    CHECK(info.dim == 16);
    CHECK(waited >= 900ms);
}

TEST_CASE("exhausted retries raise ProviderUnavailable") {
    SyntheticProvider local(16);
    ProviderServer server(local);
    int port = server.start();
    server.set_loading(true);
    HttpProvider remote(fast(port, 3));
    CHECK(code_of([&] { remote.info(); }) == ErrorCode::ProviderUnavailable);
    CHECK(exit_code_for(ErrorCode::ProviderUnavailable) == 4);
}

TEST_CASE("connection refused raises ProviderUnavailable") {
    int port;
    {
        SyntheticProvider local(16);
        ProviderServer server(local);
        port = server.start();
        server.stop();
    }
    HttpProvider remote(fast(port, 2));
    CHECK(code_of([&] { remote.embed_text("red"); }) == ErrorCode::ProviderUnavailable);
}

TEST_CASE("provider server rejects malformed and out-of-bounds requests") {
    SyntheticProvider local(16);
    ProviderServer server(local);
    int port = server.start();
    httplib::Client cli(url(port));
    auto png = base64_encode(encode_png(two_color(8, 6, 4)));

    auto post = [&](const std::string& path, const std::string& body) {
        auto r = cli.Post(path, body, "application/json");
        REQUIRE(r);
        return r->status;
    };
    CHECK(post("/embed_text", "{not json") == 400);
    CHECK(post("/embed_text", json{{"txt", "red"}}.dump()) == 400);
    CHECK(post("/embed_text", json{{"text", ""}}.dump()) == 400);
    CHECK(post("/embed_image", json{{"image", "!!!"}}.dump()) == 400);
    CHECK(post("/embed_image", json{{"image", base64_encode(std::vector<std::uint8_t>{1, 2, 3})}}.dump()) == 400);
    CHECK(post("/segment", json{{"image", png}, {"points", json::array()}}.dump()) == 400);
    CHECK(post("/segment", json{{"image", png}, {"points", {{8, 1}}}}.dump()) == 400);
    CHECK(post("/segment", json{{"image", png}, {"points", {{1, 6}}}}.dump()) == 400);
    CHECK(post("/segment", json{{"image", png}, {"points", {{-0.1, 1}}}}.dump()) == 400);
    CHECK(post("/segment", json{{"image", png}, {"points", {{7.9, 5.9}}}}.dump()) == 200);
    CHECK(post("/segment", json{{"image", png}, {"points", {{"a", 1}}}}.dump()) == 400);

    auto info = cli.Get("/info");
    REQUIRE(info);
    auto j = json::parse(info->body);
    CHECK(j.at("dim") == 16);
    CHECK(j.contains("image_model"));
    CHECK(j.contains("text_model"));

    server.set_loading(true);
    auto busy = cli.Get("/info");
    REQUIRE(busy);
    CHECK(busy->status == 503);
    CHECK(busy->get_header_value("Retry-After") == "1");
}

TEST_CASE("protocol violations raise ProviderProtocol") {
    FakeService svc;
    int dim = 4;
    std::string embedding = json{{"embedding", {1, 0, 0, 0}}}.dump();
    svc.server.Get("/info", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"dim", dim}}.dump(), "application/json");
    });
    svc.server.Post("/embed_text", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(embedding, "application/json");
    });
    svc.server.Post("/embed_image", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("{}", "application/json");
    });
    svc.server.Post("/segment", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"mask", base64_encode(encode_mask_png(Mask(3, 3)))}}.dump(), "application/json");
    });
    svc.start();

    HttpProvider remote(fast(svc.port));
    CHECK(remote.embed_text("x")[0] == 1.0);
    embedding = json{{"embedding", {1, 0}}}.dump();
    CHECK(code_of([&] { remote.embed_text("x"); }) == ErrorCode::ProviderProtocol);
    embedding = json{{"embedding", {0, 0, 0, 0}}}.dump();
    CHECK(code_of([&] { remote.embed_text("x"); }) == ErrorCode::ProviderProtocol);
    embedding = "{\"vec\": []}";
    CHECK(code_of([&] { remote.embed_text("x"); }) == ErrorCode::ProviderProtocol);
    CHECK(code_of([&] { remote.embed_image(RgbImage(2, 2)); }) == ErrorCode::ProviderProtocol);
    std::vector<Pixel> p{{0, 0}};
    CHECK(code_of([&] { remote.segment(RgbImage(4, 4), p); }) == ErrorCode::ProviderProtocol);
    CHECK(exit_code_for(ErrorCode::ProviderProtocol) == 4);

    FakeService zero;
    zero.server.Get("/info", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"dim", 0}}.dump(), "application/json");
    });
    zero.start();
    HttpProvider z(fast(zero.port));
    CHECK(code_of([&] { z.info(); }) == ErrorCode::ProviderProtocol);
}

TEST_CASE("in-flight limit is the smaller of client and service limits") {
    FakeService svc;
    svc.server.Get("/info", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(json{{"dim", 4}, {"max_in_flight", 1}}.dump(), "application/json");
    });
    svc.start();
    HttpProvider remote(fast(svc.port));
    CHECK(remote.info().max_in_flight == 1);
}

TEST_CASE("concurrent clients share one provider server") {
    SyntheticProvider local(24);
    ProviderServer server(local);
    int port = server.start();
    HttpProvider remote(fast(port));
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&, i] {
            const char* word = i % 2 ? "red" : "green";
            auto f = remote.embed_text(word), g = local.embed_text(word);
            double c = 0;
            for (std::size_t k = 0; k < f.dim(); ++k) c += f[k] * g[k];
            if (f.dim() == 24 && c > 1 - 1e-12) ++ok;
        });
    for (auto& t : threads) t.join();
    CHECK(ok == 8);
}

TEST_CASE("invalid client options") {
    HttpProviderOptions o;
    CHECK(code_of([&] { HttpProvider p(o); }) == ErrorCode::InvalidConfig);
    o.url = "http://127.0.0.1:1";
    o.attempts = 0;
    CHECK(code_of([&] { HttpProvider p(o); }) == ErrorCode::InvalidConfig);
}
