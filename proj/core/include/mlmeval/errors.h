#ifndef MLMEVAL_ERRORS_H_
#define MLMEVAL_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlmeval {

// Malformed treebank input. line() is 1-based within the parsed text.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string &detail,
             const std::string &source = "")
      : std::runtime_error((source.empty() ? "line " : source + ":") +
                           std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string &detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

// A caller violated an operation's precondition (bad position, unknown id,
// unpredicted item, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Tokenized input does not fit the model's max_seq_len.
class OverflowError : public std::runtime_error {
 public:
  explicit OverflowError(std::size_t required_length)
      : std::runtime_error("sequence needs " + std::to_string(required_length) +
                           " positions, exceeds max_seq_len"),
        required_length_(required_length) {}
  std::size_t required_length() const { return required_length_; }

 private:
  std::size_t required_length_;
};

// Backend transport is down or closed.
class ConnectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The remote side answered with an error frame we do not map to a more
// specific type.
class RpcError : public std::runtime_error {
 public:
  RpcError(int code, const std::string &message)
      : std::runtime_error("rpc error " + std::to_string(code) + ": " + message),
        code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, const std::string &what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace mlmeval

#endif  // MLMEVAL_ERRORS_H_
