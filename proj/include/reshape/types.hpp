#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>

namespace reshape {

using Key = std::int64_t;
using WorkerId = std::int32_t;
using Epoch = std::uint64_t;
using Seq = std::uint64_t;

/// Virtual time, measured in scheduler ticks. One tick is one time unit.
using Time = std::int64_t;

inline constexpr WorkerId kNoWorker = -1;

/// A keyed tuple flowing from the upstream operator to the mitigated one.
/// `seq` is assigned at the source and increases per key in emission order.
struct Record {
    Key key = 0;
    Seq seq = 0;
    std::string payload;

    friend bool operator==(const Record&, const Record&) = default;
};

enum class MarkerKind : std::uint8_t { End, PartitionChange };

struct Marker {
    MarkerKind kind = MarkerKind::End;
    WorkerId origin = kNoWorker;  // upstream worker that emitted it
    Epoch epoch = 0;

    friend bool operator==(const Marker&, const Marker&) = default;
};

/// Input ports of a worker. Only the hash join uses the build port.
enum class Port : std::uint8_t { Probe, Build };

struct DataMessage {
    Port port = Port::Probe;
    std::variant<Record, Marker> item;
};

// Error hierarchy. Everything derives from Error so the C API can map it
// onto a status code in one place.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class RoutingError : public Error {
  public:
    using Error::Error;
};

class InvalidShareError : public Error {
  public:
    using Error::Error;
};

class UnsupportedMergeError : public Error {
  public:
    using Error::Error;
};

class ProtocolError : public Error {
  public:
    using Error::Error;
};

class DeadlockError : public Error {
  public:
    using Error::Error;
};

}  // namespace reshape
