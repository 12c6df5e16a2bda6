#ifndef MLMEVAL_RUN_LOG_H_
#define MLMEVAL_RUN_LOG_H_

#include <cstddef>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace mlmeval {

// Thread-safe line log. Lines are kept in order of arrival and optionally
// echoed to a stream.
class RunLog {
 public:
  explicit RunLog(std::ostream *echo = nullptr) : echo_(echo) {}

  void Info(const std::string &message) { Add("info", message); }
  void Warn(const std::string &message) {
    Add("warn", message);
    std::lock_guard<std::mutex> lock(mu_);
    ++warnings_;
  }

  std::vector<std::string> lines() const {
    std::lock_guard<std::mutex> lock(mu_);
    return lines_;
  }
  std::size_t warnings() const {
    std::lock_guard<std::mutex> lock(mu_);
    return warnings_;
  }

 private:
  void Add(const char *level, const std::string &message) {
    std::string line = std::string(level) + ": " + message;
    std::lock_guard<std::mutex> lock(mu_);
    if (echo_ != nullptr) *echo_ << line << '\n';
    lines_.push_back(std::move(line));
  }

  mutable std::mutex mu_;
  std::ostream *echo_;
  std::vector<std::string> lines_;
  std::size_t warnings_ = 0;
};

}  // namespace mlmeval

#endif  // MLMEVAL_RUN_LOG_H_
