#pragma once

#include <stdexcept>
#include <string>

namespace hgapso {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A genome, graph, or parameter set violates its invariants.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The evaluator could not produce a fitness (timeout, transport failure,
/// trainer-reported error). Distinct from a fitness of zero.
class EvaluationError : public Error {
 public:
  enum class Kind { kTimeout, kTransport, kRemote };

  EvaluationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// The trainer replied with something that does not follow the wire protocol.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw_payload)
      : Error(what), raw_payload_(std::move(raw_payload)) {}

  const std::string& raw_payload() const { return raw_payload_; }

 private:
  std::string raw_payload_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace hgapso
