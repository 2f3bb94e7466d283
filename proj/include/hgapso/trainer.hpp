#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hgapso/fitness.hpp"

namespace hgapso {

inline constexpr int kProtocolVersion = 1;

struct DatasetSpec {
  std::string name = "dataset";
  std::string path;
  int num_classes = 10;
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// `address` is "host:port" / "tcp://host:port" for a listening trainer, or
/// "stdio:<shell command>" to spawn one and talk over its stdin/stdout.
struct TrainerEndpoint {
  std::string address = "127.0.0.1:7878";
  double timeout_seconds = 3600.0;
  DatasetSpec dataset;
  friend bool operator==(const TrainerEndpoint&, const TrainerEndpoint&) = default;
};

/// One JSON object per line, protocol_version 1.
std::string encode_request(const EvalRequest& request, const DatasetSpec& dataset);

/// Maps a response line to a record. Throws ProtocolError (raw line kept)
/// for malformed or out-of-contract payloads and EvaluationError(kRemote)
/// when the trainer reports an error.
FitnessRecord decode_response(const std::string& line, const EvalRequest& request);

/// Bidirectional newline-delimited stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Throws EvaluationError(kTransport) on a broken stream.
  virtual void send_line(std::string_view line) = 0;
  /// Throws EvaluationError(kTimeout) or EvaluationError(kTransport).
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<LineChannel> connect_tcp(const std::string& host, int port);
std::unique_ptr<LineChannel> spawn_process(const std::string& command);
/// Dispatches on the address scheme described on TrainerEndpoint.
std::unique_ptr<LineChannel> open_channel(const std::string& address);

/// Client for an external trainer. Connections are pooled; each one carries
/// a single request at a time. A transport failure is retried once on a
/// fresh connection with the same request_id; a timeout is not retried.
class TrainerEvaluator final : public Evaluator {
 public:
  using ChannelFactory = std::function<std::unique_ptr<LineChannel>()>;

  explicit TrainerEvaluator(TrainerEndpoint endpoint);
  TrainerEvaluator(TrainerEndpoint endpoint, ChannelFactory factory);

  EvaluatorKind kind() const override { return EvaluatorKind::kTrainer; }
  bool deterministic() const override { return false; }
  FitnessRecord evaluate(const ArchGenome& arch, const ConnGenome& conn, const EvalRequest& request) override;

  const TrainerEndpoint& endpoint() const { return endpoint_; }

 private:
  std::unique_ptr<LineChannel> acquire();
  void release(std::unique_ptr<LineChannel> channel);

  TrainerEndpoint endpoint_;
  ChannelFactory factory_;
  std::mutex pool_mutex_;
  std::vector<std::unique_ptr<LineChannel>> idle_;
};

}  // namespace hgapso
