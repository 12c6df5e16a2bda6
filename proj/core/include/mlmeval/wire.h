#ifndef MLMEVAL_WIRE_H_
#define MLMEVAL_WIRE_H_

// Newline-delimited JSON request/response protocol for external model
// backends. Requests are {"id", "method", "params"}; responses carry the
// same id and either "result" or "error": {"code", "message"}. Responses may
// come back in any order.

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "mlmeval/scorer.h"

namespace mlmeval {

namespace wire_code {
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;
inline constexpr int kContract = 1;
inline constexpr int kOverflow = 2;  // error.data.required_length
inline constexpr int kBackendFailure = 3;
}  // namespace wire_code

// Bidirectional line transport. Send may be called from many threads;
// Receive only from one. Lines carry no trailing newline.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  // Throws ConnectionError when the peer is gone.
  virtual void Send(const std::string &line) = 0;
  // Blocks for the next line; nullopt once the channel is closed.
  virtual std::optional<std::string> Receive() = 0;
  // Idempotent; wakes a blocked Receive.
  virtual void Close() = 0;
};

// Runs `command` under /bin/sh with its stdin/stdout wired to the channel.
std::unique_ptr<LineChannel> SpawnProcessChannel(const std::string &command);

// POSTs each line to <base_url>/v1/rpc; the response body is the reply line.
std::unique_ptr<LineChannel> ConnectHttpChannel(const std::string &base_url);

// Backend client over a LineChannel. Calls from several threads are
// multiplexed on one channel and matched back by request id.
class WireBackend : public Backend {
 public:
  // timeout 0 waits forever.
  explicit WireBackend(std::unique_ptr<LineChannel> channel,
                       std::chrono::milliseconds timeout = std::chrono::milliseconds(0));
  ~WireBackend() override;

  WireBackend(const WireBackend &) = delete;
  WireBackend &operator=(const WireBackend &) = delete;

  // Fetched once, then cached for the session.
  ModelInfo Info() override;
  Tokenized Tokenize(std::span<const std::string> words) override;
  TopK ScoreMasked(std::span<const SubwordId> ids,
                   std::span<const std::size_t> positions, int k) override;
  std::vector<std::vector<double>> Embed(
      std::span<const SubwordId> ids, std::span<const std::size_t> positions) override;
  std::string Detokenize(std::span<const SubwordId> ids) override;

  // Number of requests sent so far.
  std::size_t requests_sent() const;
  // Reply lines that were unparseable or matched no pending request.
  std::size_t dropped_frames() const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// "http://host:port" -> HTTP channel, anything else -> shell command.
std::unique_ptr<WireBackend> ConnectBackend(const std::string &endpoint);

// Server side: answers one request line against `backend`. Never throws;
// failures become error frames.
std::string HandleWireRequest(Backend &backend, std::string_view line);

// Answers request lines from `in` on `out` until EOF.
void ServeLines(Backend &backend, std::istream &in, std::ostream &out);

}  // namespace mlmeval

#endif  // MLMEVAL_WIRE_H_
