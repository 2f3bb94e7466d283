#include "hgapso/trainer.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "hgapso/error.hpp"

namespace hgapso {

using ojson = nlohmann::ordered_json;

std::string encode_request(const EvalRequest& request, const DatasetSpec& dataset) {
  ojson j;
  j["protocol_version"] = kProtocolVersion;
  j["request_id"] = request.request_id;
  j["graph"] = ojson::parse(request.graph);
  j["epochs"] = request.epochs;
  j["lr_candidates"] = request.lr_candidates;
  j["chosen_lr"] = request.chosen_lr ? ojson(*request.chosen_lr) : ojson(nullptr);
  j["data_fraction"] = request.data_fraction;
  j["seed"] = request.seed;
  j["dataset"] = {{"name", dataset.name}, {"path", dataset.path}, {"num_classes", dataset.num_classes}};
  return j.dump();
}

FitnessRecord decode_response(const std::string& line, const EvalRequest& request) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError("trainer response is not JSON", line);
  }
  if (!j.is_object()) throw ProtocolError("trainer response is not an object", line);
  if (!j.contains("protocol_version") || !j["protocol_version"].is_number_integer() ||
      j["protocol_version"].get<int>() != kProtocolVersion)
    throw ProtocolError("trainer response has missing or unsupported protocol_version", line);
  if (!j.contains("request_id") || !j["request_id"].is_string() || j["request_id"] != request.request_id)
    throw ProtocolError("trainer response does not echo request_id " + request.request_id, line);
  if (j.contains("error")) {
    const std::string msg = j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump();
    throw EvaluationError(EvaluationError::Kind::kRemote, "trainer error for " + request.request_id + ": " + msg);
  }
  if (!j.contains("fitness") || !j["fitness"].is_number()) throw ProtocolError("trainer response lacks fitness", line);
  if (!j.contains("chosen_lr") || !j["chosen_lr"].is_number()) throw ProtocolError("trainer response lacks chosen_lr", line);
  const double fitness = j["fitness"].get<double>();
  if (!(fitness >= 0.0 && fitness <= 1.0)) throw ProtocolError("trainer fitness outside [0, 1]", line);

  FitnessRecord rec;
  rec.fitness = fitness;
  rec.chosen_lr = j["chosen_lr"].get<double>();
  rec.evaluator = EvaluatorKind::kTrainer;
  rec.seed = request.seed;
  rec.data_fraction = request.data_fraction;
  rec.epochs = request.epochs;
  if (j.contains("wall_time")) {
    if (!j["wall_time"].is_number()) throw ProtocolError("trainer wall_time is not a number", line);
    rec.wall_time = j["wall_time"].get<double>();
  }
  return rec;
}

// --- channels ----------------------------------------------------------------

namespace {

[[noreturn]] void transport_failure(const std::string& what) {
  throw EvaluationError(EvaluationError::Kind::kTransport, what);
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) {
      const ssize_t m = ::write(fd, data.data(), data.size());
      if (m < 0) {
        if (errno == EINTR) continue;
        transport_failure(std::string("write failed: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(m));
      continue;
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      transport_failure(std::string("send failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

/// Buffered line reader over a file descriptor with a deadline.
class FdLineReader {
 public:
  std::string read_line(int fd, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw EvaluationError(EvaluationError::Kind::kTimeout, "trainer response timed out");
      pollfd p{fd, POLLIN, 0};
      const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1LL << 30)));
      if (r < 0) {
        if (errno == EINTR) continue;
        transport_failure(std::string("poll failed: ") + std::strerror(errno));
      }
      if (r == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        transport_failure(std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) transport_failure("trainer closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string buffer_;
};

class TcpChannel final : public LineChannel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override { ::close(fd_); }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void send_line(std::string_view line) override {
    write_all(fd_, line);
    write_all(fd_, "\n");
  }
  std::string read_line(std::chrono::milliseconds timeout) override { return reader_.read_line(fd_, timeout); }

 private:
  int fd_;
  FdLineReader reader_;
};

class ProcessChannel final : public LineChannel {
 public:
  ProcessChannel(pid_t pid, int to_child, int from_child) : pid_(pid), to_child_(to_child), from_child_(from_child) {}
  ~ProcessChannel() override {
    ::close(to_child_);
    ::close(from_child_);
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  void send_line(std::string_view line) override {
    write_all(to_child_, line);
    write_all(to_child_, "\n");
  }
  std::string read_line(std::chrono::milliseconds timeout) override { return reader_.read_line(from_child_, timeout); }

 private:
  pid_t pid_;
  int to_child_;
  int from_child_;
  FdLineReader reader_;
};

}  // namespace

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    transport_failure("cannot resolve " + host + ": " + ::gai_strerror(rc));
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<TcpChannel>(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  transport_failure("cannot connect to " + host + ":" + service + ": " + last_error);
}

std::unique_ptr<LineChannel> spawn_process(const std::string& command) {
  // A child that exits early must surface as a write error, not kill us.
  static const bool ignore_sigpipe = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)ignore_sigpipe;
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) transport_failure("pipe failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    transport_failure("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) transport_failure("fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  return std::make_unique<ProcessChannel>(pid, in_pipe[1], out_pipe[0]);
}

std::unique_ptr<LineChannel> open_channel(const std::string& address) {
  constexpr std::string_view kStdio = "stdio:";
  constexpr std::string_view kTcp = "tcp://";
  if (address.starts_with(kStdio)) return spawn_process(address.substr(kStdio.size()));
  std::string hostport = address.starts_with(kTcp) ? address.substr(kTcp.size()) : address;
  const auto colon = hostport.rfind(':');
  if (colon == std::string::npos) throw ConfigError("trainer endpoint '" + address + "' lacks a port");
  int port = 0;
  try {
    port = std::stoi(hostport.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("trainer endpoint '" + address + "' has an invalid port");
  }
  std::string host = hostport.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return connect_tcp(host, port);
}

// --- evaluator ---------------------------------------------------------------

TrainerEvaluator::TrainerEvaluator(TrainerEndpoint endpoint)
    : TrainerEvaluator(endpoint, [address = endpoint.address] { return open_channel(address); }) {}

TrainerEvaluator::TrainerEvaluator(TrainerEndpoint endpoint, ChannelFactory factory)
    : endpoint_(std::move(endpoint)), factory_(std::move(factory)) {
  if (!(endpoint_.timeout_seconds > 0.0)) throw ConfigError("trainer timeout must be positive");
}

std::unique_ptr<LineChannel> TrainerEvaluator::acquire() {
  {
    std::lock_guard lock(pool_mutex_);
    if (!idle_.empty()) {
      auto ch = std::move(idle_.back());
      idle_.pop_back();
      return ch;
    }
  }
  return factory_();
}

void TrainerEvaluator::release(std::unique_ptr<LineChannel> channel) {
  std::lock_guard lock(pool_mutex_);
  idle_.push_back(std::move(channel));
}

FitnessRecord TrainerEvaluator::evaluate(const ArchGenome&, const ConnGenome&, const EvalRequest& request) {
  request.validate();
  const std::string line = encode_request(request, endpoint_.dataset);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(std::ceil(endpoint_.timeout_seconds * 1000.0)));
  for (int attempt = 0;; ++attempt) {
    std::string response;
    try {
      auto channel = acquire();
      channel->send_line(line);
      response = channel->read_line(timeout);
      release(std::move(channel));
    } catch (const EvaluationError& e) {
      // A failed channel is dropped; only transport failures are retried.
      if (e.kind() == EvaluationError::Kind::kTransport && attempt == 0) continue;
      throw EvaluationError(e.kind(), "request " + request.request_id + ": " + e.what());
    }
    return decode_response(response, request);
  }
}

}  // namespace hgapso
