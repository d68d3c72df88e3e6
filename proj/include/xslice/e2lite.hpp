#pragma once
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xslice/types.hpp"

namespace xslice {

class RanEnv;

// Thrown by decode(); byte_offset points at the parse failure (0 when the
// line parsed but the message shape was wrong).
struct DecodeError : std::runtime_error {
  size_t byte_offset;
  DecodeError(const std::string& what, size_t offset) : std::runtime_error(what), byte_offset(offset) {}
};
struct UnsupportedMessage : DecodeError {
  explicit UnsupportedMessage(const std::string& what) : DecodeError(what, 0) {}
};

// ---- messages ----

struct Subscribe {
  double period_ms = 100.0;
};
struct KpmReport {
  int round = 0;
  std::string digest;  // slice-config digest, see slice_digest()
  std::vector<KpmRecord> records;
};
struct SliceCommand {
  int round = 0;  // the report this command answers
  Allocation allocation;
};
struct Ack {
  int round = 0;
};
struct Bye {};

using E2Message = std::variant<Subscribe, KpmReport, SliceCommand, Ack, Bye>;

// One '\n'-terminated line of JSON with a fixed key order; no interior
// newlines.  decode() is the inverse and ignores unknown fields.
std::string encode(const E2Message& msg);
E2Message decode(std::string_view line);

// 16-hex-digit digest over the slice configuration, carried in every report
// so a mis-matched peer is detectable.
std::string slice_digest(std::span<const SliceSpec> specs);

// Shortest decimal that parses back to the same double (wire + CSV format).
std::string format_double(double v);

// ---- transports ----

enum class RecvStatus { Ok, Timeout, Closed };

class Transport {
 public:
  virtual ~Transport() = default;
  // false when the peer is gone
  virtual bool send_line(const std::string& line) = 0;
  // timeout_ms < 0 blocks until a line or close
  virtual RecvStatus recv_line(std::string& line, int timeout_ms) = 0;
  virtual void close() = 0;
};

// in-process bidirectional queue pair (returns the two ends)
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_inproc_pair();

// unix stream sockets; listen blocks for exactly one peer
std::unique_ptr<Transport> unix_listen(const std::string& path);
std::unique_ptr<Transport> unix_connect(const std::string& path, int retry_ms = 5000);

// ---- endpoint loops ----

struct RanEndpointStats {
  int rounds = 0;
  int fresh_commands = 0;   // rounds stepped with a command for this round
  int stale_fallbacks = 0;  // rounds stepped with the previous allocation
  bool clean_shutdown = false;
};

// Serve one subscriber: emit a report per round, wait up to deadline_ms for
// the matching command (deadline_ms <= 0 waits indefinitely: lockstep mode),
// fall back to the previous allocation on timeout, discard late commands for
// stale rounds, apply + step.  `initial` is the round-0 fallback.
RanEndpointStats run_ran_endpoint(RanEnv& env, Transport& t, int deadline_ms, int max_rounds,
                                  const Allocation& initial);

struct XappEndpointStats {
  int rounds = 0;
  int decode_errors = 0;
  bool clean_shutdown = false;
};

// Subscribe, then answer every report with decide(); after_reply() runs off
// the reply path (training etc.) before the next report is read.
XappEndpointStats run_xapp_endpoint(Transport& t, double period_ms,
                                    const std::function<Allocation(const KpmReport&)>& decide,
                                    const std::function<void(const KpmReport&)>& after_reply);

}  // namespace xslice
