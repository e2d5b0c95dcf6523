#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "raisdr/codec.hpp"
#include "raisdr/error.hpp"
#include "raisdr/image_io.hpp"
#include "raisdr/inference.hpp"
#include "support.hpp"

using namespace raisdr;
using nlohmann::json;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

const char* kManifest = R"([
  {"image_id": "img_001", "model": "M1", "output": {"label": 1, "score": 0.93}},
  {"image_id": "img_001", "model": "MQ", "output": {"score": 0.88}},
  {"image_id": "img_001", "model": "MA", "output": {
      "macula": {"present": true, "score": 0.97, "box": [10, 10, 50, 50]},
      "optic_nerve": {"present": true, "score": 0.94}}}
])";

}  // namespace

TEST(Manifest, ParsesEntries) {
  const auto m = parse_manifest(kManifest);
  EXPECT_EQ(m.size(), 3u);
  const StubBackend stub(m);
  EXPECT_EQ(stub.classify(ModelId::M1, {"img_001"}), (ClassifierOutput{1, 0.93}));
  EXPECT_EQ(stub.classify(ModelId::MQ, {"img_001"}), (ClassifierOutput{1, 0.88}));
  const auto a = stub.detect_anatomy({"img_001"});
  EXPECT_TRUE(a.macula.present);
  EXPECT_DOUBLE_EQ(a.macula.score, 0.97);
  EXPECT_EQ(a.macula.box, (PixelBox{10, 10, 50, 50}));
  EXPECT_TRUE(a.optic_nerve.present);
  EXPECT_DOUBLE_EQ(a.optic_nerve.score, 0.94);
}

TEST(Manifest, EmptyFileIsEmptyManifest) {
  const auto m = parse_manifest("  \n");
  EXPECT_TRUE(m.empty());
  const StubBackend stub(m);
  EXPECT_EQ(code_of([&] { stub.classify(ModelId::M1, {"x"}); }),
            ErrorCode::MissingPrediction);
}

TEST(Manifest, DuplicateKey) {
  const char* text = R"([
    {"image_id": "img_001", "model": "M1", "output": {"label": 1, "score": 0.93}},
    {"image_id": "img_001", "model": "M1", "output": {"label": 0, "score": 0.1}}])";
  EXPECT_EQ(code_of([&] { parse_manifest(text); }), ErrorCode::DuplicateKey);
}

TEST(Manifest, InvalidOutputs) {
  EXPECT_EQ(code_of([&] {
              parse_manifest(R"([{"image_id":"a","model":"M1","output":{"score":1.2}}])");
            }),
            ErrorCode::InvalidOutput);
  EXPECT_EQ(code_of([&] {
              parse_manifest(
                  R"([{"image_id":"a","model":"M1","output":{"label":0,"score":0.7}}])");
            }),
            ErrorCode::InvalidOutput);
  EXPECT_EQ(code_of([&] {
              parse_manifest(R"([{"image_id":"a","model":"MA","output":{
                "macula":{"present":true,"score":0.3},
                "optic_nerve":{"present":true,"score":0.9}}}])");
            }),
            ErrorCode::InvalidOutput);
}

TEST(Manifest, MalformedJson) {
  EXPECT_EQ(code_of([&] { parse_manifest("[{"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { parse_manifest(R"({"a":1})"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] {
              parse_manifest(R"([{"image_id":"a","model":"M9","output":{}}])");
            }),
            ErrorCode::ParseError);
}

TEST(Manifest, JsonRoundTrip) {
  const auto m = parse_manifest(kManifest);
  const auto again = parse_manifest(m.to_json().dump());
  EXPECT_EQ(again.entries(), m.entries());
}

TEST(StubBackend, MissingEntry) {
  const StubBackend stub(parse_manifest(kManifest));
  EXPECT_EQ(code_of([&] { stub.classify(ModelId::MQ, {"img_002"}); }),
            ErrorCode::MissingPrediction);
  EXPECT_EQ(code_of([&] { stub.detect_anatomy({"img_002"}); }),
            ErrorCode::MissingPrediction);
}

TEST(StubBackend, Deterministic) {
  const StubBackend stub(parse_manifest(kManifest));
  const auto a = stub.classify(ModelId::M1, {"img_001"});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(stub.classify(ModelId::M1, {"img_001"}), a);
}

TEST(StubBackend, ThresholdAdjustsLabels) {
  ModelThresholds t;
  t.set(ModelId::M1, 0.95);
  const StubBackend stub(parse_manifest(kManifest), t);
  EXPECT_EQ(stub.classify(ModelId::M1, {"img_001"}).label, 0);
}

TEST(Thresholds, RejectOutOfRange) {
  ModelThresholds t;
  EXPECT_EQ(code_of([&] { t.set(ModelId::MQ, 1.5); }), ErrorCode::InvalidPolicy);
}

namespace {

/// In-process model server answering from a scripted function.
class FakeModelServer {
 public:
  explicit FakeModelServer(std::function<void(const json&, httplib::Response&)> fn)
      : fn_(std::move(fn)) {
    server_.Post("/v1/infer", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      const json body = json::parse(req.body);
      {
        std::lock_guard lock(mu_);
        last_ = body;
      }
      fn_(body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeModelServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  json last() const {
    std::lock_guard lock(mu_);
    return last_;
  }
  int requests() const { return requests_; }

 private:
  std::function<void(const json&, httplib::Response&)> fn_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> requests_{0};
  mutable std::mutex mu_;
  json last_;
};

void send(httplib::Response& res, const json& body) {
  res.set_content(body.dump(), "application/json");
}

}  // namespace

TEST(HttpBackend, WireProtocol) {
  FakeModelServer server([](const json& req, httplib::Response& res) {
    if (req["model"] == "MA") {
      send(res, {{"macula", {{"present", true}, {"score", 0.9}}},
                 {"optic_nerve", {{"present", false}, {"score", 0.2}}}});
    } else {
      send(res, {{"label", 1}, {"score", 0.75}});
    }
  });
  const HttpBackend backend(server.url());
  const auto img = preprocess(testsupport::disc_image(200, 200, 100, 100, 80), {});
  EXPECT_EQ(backend.classify(ModelId::M1, {"img_9", &img}), (ClassifierOutput{1, 0.75}));
  const auto req = server.last();
  EXPECT_EQ(req["model"], "M1");
  EXPECT_EQ(req["image_id"], "img_9");
  const auto png = base64_decode(req["image_png_base64"].get<std::string>());
  const auto decoded = decode_image(png);
  EXPECT_EQ(decoded.width(), 512);
  EXPECT_TRUE(std::equal(img.pixels().begin(), img.pixels().end(),
                         decoded.pixels().begin()));

  const auto a = backend.detect_anatomy({"img_9", &img});
  EXPECT_TRUE(a.macula.present);
  EXPECT_FALSE(a.optic_nerve.present);
  EXPECT_EQ(server.last()["model"], "MA");
}

TEST(HttpBackend, ScoreOnlyReplyDerivesLabel) {
  FakeModelServer server([](const json&, httplib::Response& res) {
    send(res, {{"score", 0.3}});
  });
  const HttpBackend backend(server.url());
  EXPECT_EQ(backend.classify(ModelId::M2, {"x"}), (ClassifierOutput{0, 0.3}));
}

TEST(HttpBackend, RejectsBadReplies) {
  FakeModelServer range([](const json&, httplib::Response& res) {
    send(res, {{"label", 1}, {"score", 1.2}});
  });
  EXPECT_EQ(code_of([&] { HttpBackend(range.url()).classify(ModelId::M1, {"x"}); }),
            ErrorCode::InvalidOutput);

  FakeModelServer disagree([](const json&, httplib::Response& res) {
    send(res, {{"label", 0}, {"score", 0.9}});
  });
  EXPECT_EQ(code_of([&] { HttpBackend(disagree.url()).classify(ModelId::M1, {"x"}); }),
            ErrorCode::InvalidOutput);

  FakeModelServer garbage([](const json&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  EXPECT_EQ(code_of([&] { HttpBackend(garbage.url()).classify(ModelId::M1, {"x"}); }),
            ErrorCode::InvalidOutput);

  FakeModelServer failing([](const json&, httplib::Response& res) { res.status = 500; });
  EXPECT_EQ(code_of([&] { HttpBackend(failing.url()).classify(ModelId::M1, {"x"}); }),
            ErrorCode::BackendUnavailable);
}

TEST(HttpBackend, UnreachableServer) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackendOptions opts;
  opts.connect_timeout = std::chrono::milliseconds(300);
  const HttpBackend backend("http://127.0.0.1:" + std::to_string(port), {}, opts);
  EXPECT_EQ(code_of([&] { backend.classify(ModelId::MQ, {"x"}); }),
            ErrorCode::BackendUnavailable);
}

TEST(HttpBackend, ConcurrentRequestsAreIsolated) {
  FakeModelServer server([](const json& req, httplib::Response& res) {
    const auto id = req["image_id"].get<std::string>();
    const double score = (id.back() - '0') / 10.0;
    send(res, {{"score", score}});
  });
  const HttpBackend backend(server.url());
  std::vector<std::thread> threads;
  std::atomic<int> wrong{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) {
        const std::string id = "img" + std::to_string(t);
        const auto out = backend.classify(ModelId::M1, {id});
        if (out.score != t / 10.0) ++wrong;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(wrong.load(), 0);
  EXPECT_EQ(server.requests(), 40);
}
