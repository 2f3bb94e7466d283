#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "hgapso/error.hpp"
#include "hgapso/trainer.hpp"

using namespace hgapso;
using nlohmann::json;

namespace {

/// Minimal line-protocol trainer on 127.0.0.1. `handler` maps a request to
/// a response line; an empty string closes the connection without reply.
class FakeTrainer {
 public:
  using Handler = std::function<std::string(const json& request)>;

  explicit FakeTrainer(Handler handler) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listen_fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd_, 16) == 0);
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  ~FakeTrainer() {
    stop_ = true;
    acceptor_.join();
    ::close(listen_fd_);
    for (auto& t : workers_) t.join();
  }

  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }
  int connections() const { return connections_; }

 private:
  void accept_loop() {
    while (!stop_) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 20) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      ++connections_;
      workers_.emplace_back([this, fd] { serve(fd); });
    }
  }

  void serve(int fd) {
    std::string buffer;
    char chunk[4096];
    while (!stop_) {
      pollfd p{fd, POLLIN, 0};
      if (::poll(&p, 1, 20) <= 0) continue;
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      for (auto pos = buffer.find('\n'); pos != std::string::npos; pos = buffer.find('\n')) {
        const std::string line = buffer.substr(0, pos);
        buffer.erase(0, pos + 1);
        const std::string reply = handler_(json::parse(line));
        if (reply.empty()) {
          ::close(fd);
          return;
        }
        const std::string out = reply + "\n";
        if (::write(fd, out.data(), out.size()) < 0) break;
      }
    }
    ::close(fd);
  }

  Handler handler_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::thread acceptor_;
  std::vector<std::thread> workers_;
};

const ArchGenome kArch{{{4, 8}}};

EvalRequest sample_request(const std::string& id) {
  EvalBudget budget;
  budget.data_fraction = 0.5;
  budget.seed = 7;
  return make_request(kArch, ConnGenome::ones(kArch), budget, id, std::nullopt);
}

std::string ok(const json& req, double fitness, double lr = 0.1) {
  return json{{"protocol_version", 1}, {"request_id", req["request_id"]}, {"fitness", fitness}, {"chosen_lr", lr},
              {"wall_time", 1.5}}
      .dump();
}

TrainerEndpoint endpoint_for(const std::string& address, double timeout = 5.0) {
  TrainerEndpoint e;
  e.address = address;
  e.timeout_seconds = timeout;
  e.dataset = {"convex", "/data/convex", 2};
  return e;
}

}  // namespace

TEST_CASE("request encoding") {
  auto req = sample_request("abc");
  const auto j = json::parse(encode_request(req, DatasetSpec{"mb", "/d", 10}));
  CHECK(j["protocol_version"] == 1);
  CHECK(j["request_id"] == "abc");
  CHECK(j["graph"]["num_classes"] == 10);
  CHECK(j["graph"]["nodes"].size() == 7);
  CHECK(j["epochs"] == 5);
  CHECK(j["lr_candidates"] == json::array({0.9, 0.1, 0.01}));
  CHECK(j["chosen_lr"].is_null());
  CHECK(j["data_fraction"] == 0.5);
  CHECK(j["seed"] == 7);
  CHECK(j["dataset"] == json{{"name", "mb"}, {"path", "/d"}, {"num_classes", 10}});
  req.chosen_lr = 0.01;
  CHECK(json::parse(encode_request(req, DatasetSpec{}))["chosen_lr"] == 0.01);
}

TEST_CASE("response decoding") {
  const auto req = sample_request("r1");
  const auto rec = decode_response(R"({"protocol_version":1,"request_id":"r1","fitness":0.83,"chosen_lr":0.1,"wall_time":12.5})", req);
  CHECK(rec.fitness == 0.83);
  CHECK(rec.chosen_lr == 0.1);
  CHECK(rec.evaluator == EvaluatorKind::kTrainer);
  CHECK(rec.seed == 7);
  CHECK(rec.data_fraction == 0.5);
  CHECK(rec.epochs == 5);
  CHECK(rec.wall_time == 12.5);

  const std::string bad = R"({"protocol_version":1,"request_id":"r1","fitness":1.7,"chosen_lr":0.1})";
  try {
    decode_response(bad, req);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(e.raw_payload() == bad);
  }
  CHECK_THROWS_AS(decode_response("nonsense", req), ProtocolError);
  CHECK_THROWS_AS(decode_response(R"({"protocol_version":2,"request_id":"r1","fitness":0.5,"chosen_lr":0.1})", req), ProtocolError);
  CHECK_THROWS_AS(decode_response(R"({"protocol_version":1,"request_id":"zz","fitness":0.5,"chosen_lr":0.1})", req), ProtocolError);
  CHECK_THROWS_AS(decode_response(R"({"protocol_version":1,"request_id":"r1","chosen_lr":0.1})", req), ProtocolError);
  try {
    decode_response(R"({"protocol_version":1,"request_id":"r1","error":"CUDA out of memory"})", req);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.kind() == EvaluationError::Kind::kRemote);
    CHECK(std::string(e.what()).find("CUDA out of memory") != std::string::npos);
  }
}

TEST_CASE("tcp round trip and idempotent request ids") {
  std::mutex mu;
  std::map<std::string, std::string> answered;
  int trainings = 0;
  FakeTrainer server([&](const json& req) {
    std::lock_guard lock(mu);
    const std::string id = req["request_id"];
    if (auto it = answered.find(id); it != answered.end()) return it->second;
    ++trainings;
    return answered[id] = ok(req, 0.83);
  });
  TrainerEvaluator eval(endpoint_for(server.address()));
  const auto req = sample_request("same");
  const auto a = eval.evaluate(kArch, ConnGenome::ones(kArch), req);
  const auto b = eval.evaluate(kArch, ConnGenome::ones(kArch), req);
  CHECK(a.fitness == 0.83);
  CHECK(a == b);
  CHECK(trainings == 1);
  CHECK(server.connections() == 1);  // pooled connection reused
  CHECK(eval.kind() == EvaluatorKind::kTrainer);
  CHECK_FALSE(eval.deterministic());
}

TEST_CASE("dropped connection is retried once with the same request id") {
  std::mutex mu;
  std::vector<std::string> seen;
  FakeTrainer server([&](const json& req) {
    std::lock_guard lock(mu);
    seen.push_back(req["request_id"]);
    if (seen.size() == 1) return std::string();  // drop without reply
    return ok(req, 0.5);
  });
  TrainerEvaluator eval(endpoint_for(server.address()));
  CHECK(eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("retry-me")).fitness == 0.5);
  CHECK(seen == std::vector<std::string>{"retry-me", "retry-me"});
}

TEST_CASE("persistent transport failure surfaces after one retry") {
  std::atomic<int> attempts{0};
  FakeTrainer server([&](const json&) {
    ++attempts;
    return std::string();
  });
  TrainerEvaluator eval(endpoint_for(server.address()));
  try {
    eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("x"));
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.kind() == EvaluationError::Kind::kTransport);
  }
  CHECK(attempts == 2);
}

TEST_CASE("timeout is reported and not retried") {
  std::atomic<int> attempts{0};
  FakeTrainer server([&](const json& req) {
    ++attempts;
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    return ok(req, 0.5);
  });
  TrainerEvaluator eval(endpoint_for(server.address(), 0.2));
  try {
    eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("slow"));
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(e.kind() == EvaluationError::Kind::kTimeout);
    CHECK(std::string(e.what()).find("slow") != std::string::npos);
  }
  CHECK(attempts == 1);
}

TEST_CASE("out-of-range fitness from the wire is a protocol error") {
  FakeTrainer server([&](const json& req) { return ok(req, 1.7); });
  TrainerEvaluator eval(endpoint_for(server.address()));
  CHECK_THROWS_AS(eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("big")), ProtocolError);
}

TEST_CASE("concurrent requests over pooled connections") {
  FakeTrainer server([&](const json& req) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    const std::string id = req["request_id"];
    return ok(req, std::stoi(id) / 100.0);
  });
  TrainerEvaluator eval(endpoint_for(server.address()));
  std::vector<double> got(8, -1);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i)
      threads.emplace_back([&, i] { got[static_cast<std::size_t>(i)] = eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request(std::to_string(i))).fitness; });
  }
  for (int i = 0; i < 8; ++i) CHECK(got[static_cast<std::size_t>(i)] == doctest::Approx(i / 100.0));
}

TEST_CASE("stdio transport") {
  // Echo the request id back with a fixed fitness using only the shell.
  const std::string script =
      "stdio:while IFS= read -r line; do "
      "id=$(printf '%s' \"$line\" | sed 's/.*\"request_id\":\"\\([^\"]*\\)\".*/\\1/'); "
      "printf '{\"protocol_version\":1,\"request_id\":\"%s\",\"fitness\":0.42,\"chosen_lr\":0.01}\\n' \"$id\"; "
      "done";
  TrainerEvaluator eval(endpoint_for(script));
  const auto rec = eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("via-pipe"));
  CHECK(rec.fitness == 0.42);
  CHECK(rec.chosen_lr == 0.01);
  CHECK(eval.evaluate(kArch, ConnGenome::ones(kArch), sample_request("second")).fitness == 0.42);
}

TEST_CASE("endpoint errors") {
  CHECK_THROWS_AS(open_channel("localhost"), ConfigError);
  CHECK_THROWS_AS(open_channel("localhost:abc"), ConfigError);
  // Nothing listens on port 1.
  CHECK_THROWS_AS(open_channel("tcp://127.0.0.1:1"), EvaluationError);
  CHECK_THROWS_AS(TrainerEvaluator(endpoint_for("127.0.0.1:1", 0.0)), ConfigError);
}
