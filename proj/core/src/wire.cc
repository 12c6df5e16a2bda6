#include "mlmeval/wire.h"

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <deque>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mlmeval/errors.h"

namespace mlmeval {
namespace {

using json = nlohmann::json;

class ProcessChannel : public LineChannel {
 public:
  explicit ProcessChannel(const std::string &command) {
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw ConnectionError(std::string("socketpair: ") + std::strerror(errno));
    }
    pid_ = fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw ConnectionError(std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      dup2(fds[1], STDIN_FILENO);
      dup2(fds[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
      _exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ~ProcessChannel() override {
    Close();
    Reap();
    ::close(fd_);
  }

  void Send(const std::string &line) override {
    std::lock_guard<std::mutex> lock(write_mu_);
    if (closed_) throw ConnectionError("channel closed");
    std::string frame = line + '\n';
    std::size_t off = 0;
    while (off < frame.size()) {
      ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw ConnectionError(std::string("write to backend: ") + std::strerror(errno));
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> Receive() override {
    while (true) {
      std::size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[65536];
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        if (buffer_.empty()) return std::nullopt;
        std::string line = std::move(buffer_);
        buffer_.clear();
        return line;
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void Close() override {
    std::lock_guard<std::mutex> lock(write_mu_);
    if (closed_) return;
    closed_ = true;
    ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  void Reap() {
    if (pid_ <= 0) return;
    for (int i = 0; i < 200; ++i) {
      if (waitpid(pid_, nullptr, WNOHANG) != 0) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }

  pid_t pid_ = -1;
  int fd_ = -1;
  std::mutex write_mu_;
  bool closed_ = false;
  std::string buffer_;
};

class HttpChannel : public LineChannel {
 public:
  explicit HttpChannel(std::string base_url) : base_url_(std::move(base_url)) {}

  void Send(const std::string &line) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_) throw ConnectionError("channel closed");
    }
    httplib::Client client(base_url_);
    client.set_read_timeout(std::chrono::seconds(600));
    auto res = client.Post("/v1/rpc", line, "application/json");
    if (!res) {
      throw ConnectionError("POST " + base_url_ + "/v1/rpc: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ConnectionError("POST " + base_url_ + "/v1/rpc: HTTP " + std::to_string(res->status));
    }
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    {
      std::lock_guard<std::mutex> lock(mu_);
      replies_.push_back(std::move(body));
    }
    cv_.notify_one();
  }

  std::optional<std::string> Receive() override {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !replies_.empty(); });
    if (replies_.empty()) return std::nullopt;
    std::string line = std::move(replies_.front());
    replies_.pop_front();
    return line;
  }

  void Close() override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::string base_url_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> replies_;
  bool closed_ = false;
};

json IdsJson(std::span<const SubwordId> ids) { return json(std::vector<SubwordId>(ids.begin(), ids.end())); }
json PositionsJson(std::span<const std::size_t> p) {
  return json(std::vector<std::size_t>(p.begin(), p.end()));
}

[[noreturn]] void ThrowMalformed(const std::string &method, const std::string &what) {
  throw RpcError(wire_code::kBackendFailure, "malformed " + method + " result: " + what);
}

json ErrorFrame(const json &id, int code, const std::string &message,
                const json &data = nullptr) {
  json err = {{"code", code}, {"message", message}};
  if (!data.is_null()) err["data"] = data;
  return {{"id", id}, {"error", err}};
}

}  // namespace

struct WireBackend::State {
  std::unique_ptr<LineChannel> channel;
  std::chrono::milliseconds timeout;
  std::thread reader;

  std::mutex mu;
  std::map<std::int64_t, std::promise<json>> pending;
  bool closed = false;
  std::atomic<std::int64_t> next_id{1};
  std::atomic<std::size_t> sent{0};
  std::atomic<std::size_t> dropped{0};

  std::once_flag info_once;
  ModelInfo info;

  void ReadLoop() {
    while (auto line = channel->Receive()) {
      json frame = json::parse(*line, nullptr, /*allow_exceptions=*/false);
      if (frame.is_discarded() || !frame.is_object() || !frame.contains("id") ||
          !frame["id"].is_number_integer()) {
        ++dropped;
        continue;
      }
      std::promise<json> promise;
      {
        std::lock_guard<std::mutex> lock(mu);
        auto it = pending.find(frame["id"].get<std::int64_t>());
        if (it == pending.end()) {
          ++dropped;
          continue;
        }
        promise = std::move(it->second);
        pending.erase(it);
      }
      Deliver(promise, frame);
    }
    std::map<std::int64_t, std::promise<json>> orphans;
    {
      std::lock_guard<std::mutex> lock(mu);
      closed = true;
      orphans.swap(pending);
    }
    for (auto &[id, promise] : orphans) {
      promise.set_exception(
          std::make_exception_ptr(ConnectionError("backend closed the connection")));
    }
  }

  static void Deliver(std::promise<json> &promise, const json &frame) {
    if (frame.contains("result")) {
      promise.set_value(frame["result"]);
      return;
    }
    int code = wire_code::kBackendFailure;
    std::string message = "response has neither result nor error";
    json data;
    if (frame.contains("error") && frame["error"].is_object()) {
      const json &err = frame["error"];
      if (err.contains("code") && err["code"].is_number_integer()) code = err["code"].get<int>();
      message = err.value("message", std::string("(no message)"));
      if (err.contains("data")) data = err["data"];
    }
    std::exception_ptr ex;
    if (code == wire_code::kOverflow && data.is_object() &&
        data.contains("required_length") && data["required_length"].is_number_unsigned()) {
      ex = std::make_exception_ptr(OverflowError(data["required_length"].get<std::size_t>()));
    } else if (code == wire_code::kContract) {
      ex = std::make_exception_ptr(ContractError(message));
    } else {
      ex = std::make_exception_ptr(RpcError(code, message));
    }
    promise.set_exception(ex);
  }

  json Call(const std::string &method, json params) {
    const std::int64_t id = next_id++;
    std::future<json> reply;
    {
      std::lock_guard<std::mutex> lock(mu);
      if (closed) throw ConnectionError("backend closed the connection");
      reply = pending[id].get_future();
    }
    json request = {{"id", id}, {"method", method}, {"params", std::move(params)}};
    try {
      channel->Send(request.dump());
      ++sent;
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      pending.erase(id);
      throw;
    }
    if (timeout.count() > 0 &&
        reply.wait_for(timeout) != std::future_status::ready) {
      std::lock_guard<std::mutex> lock(mu);
      pending.erase(id);
      throw ConnectionError(method + ": no reply within timeout");
    }
    return reply.get();
  }
};

WireBackend::WireBackend(std::unique_ptr<LineChannel> channel,
                         std::chrono::milliseconds timeout)
    : state_(std::make_unique<State>()) {
  state_->channel = std::move(channel);
  state_->timeout = timeout;
  state_->reader = std::thread([s = state_.get()] { s->ReadLoop(); });
}

WireBackend::~WireBackend() {
  state_->channel->Close();
  if (state_->reader.joinable()) state_->reader.join();
}

std::size_t WireBackend::requests_sent() const { return state_->sent.load(); }
std::size_t WireBackend::dropped_frames() const { return state_->dropped.load(); }

ModelInfo WireBackend::Info() {
  std::call_once(state_->info_once, [&] {
    json r = state_->Call("model_info", json::object());
    ModelInfo info;
    try {
      info.hidden_size = r.at("hidden_size").get<int>();
      info.vocab_size = r.at("vocab_size").get<int>();
      info.max_seq_len = r.at("max_seq_len").get<int>();
      info.mask_id = r.at("mask_id").get<SubwordId>();
      info.cls_id = r.at("cls_id").get<SubwordId>();
      info.sep_id = r.at("sep_id").get<SubwordId>();
      info.unk_id = r.at("unk_id").get<SubwordId>();
      info.lowercases = r.at("lowercases").get<bool>();
    } catch (const json::exception &e) {
      ThrowMalformed("model_info", e.what());
    }
    info.Validate();
    state_->info = info;
  });
  return state_->info;
}

Tokenized WireBackend::Tokenize(std::span<const std::string> words) {
  for (const std::string &w : words) {
    if (w.empty()) throw ContractError("tokenize: empty word");
  }
  const ModelInfo info = Info();
  json r = state_->Call("tokenize", {{"words", std::vector<std::string>(words.begin(), words.end())}});
  Tokenized out;
  try {
    out.ids = r.at("ids").get<std::vector<SubwordId>>();
    for (const json &span : r.at("spans")) {
      out.alignment.spans.push_back({span.at(0).get<std::size_t>(), span.at(1).get<std::size_t>()});
    }
  } catch (const json::exception &e) {
    ThrowMalformed("tokenize", e.what());
  }
  if (out.ids.size() < 2 || out.ids.front() != info.cls_id || out.ids.back() != info.sep_id) {
    ThrowMalformed("tokenize", "ids must start with cls_id and end with sep_id");
  }
  if (out.alignment.spans.size() != words.size()) {
    ThrowMalformed("tokenize", "one span per word expected");
  }
  std::size_t expect = 1;
  for (const Span &span : out.alignment.spans) {
    if (span.start != expect || span.end <= span.start) {
      ThrowMalformed("tokenize", "spans must be contiguous and non-empty");
    }
    expect = span.end;
  }
  if (expect != out.ids.size() - 1) ThrowMalformed("tokenize", "spans must cover all pieces");
  if (out.ids.size() > static_cast<std::size_t>(info.max_seq_len)) {
    throw OverflowError(out.ids.size());
  }
  return out;
}

TopK WireBackend::ScoreMasked(std::span<const SubwordId> ids,
                              std::span<const std::size_t> positions, int k) {
  const ModelInfo info = Info();
  CheckMaskedQuery(info, ids, positions, k);
  json r = state_->Call("score_masked", {{"ids", IdsJson(ids)},
                                         {"positions", PositionsJson(positions)},
                                         {"k", k}});
  TopK out;
  try {
    for (const json &list : r.at("topk")) {
      CandidateList candidates;
      for (const json &pair : list) {
        candidates.push_back({pair.at(0).get<SubwordId>(), pair.at(1).get<double>()});
      }
      out.positions.push_back(std::move(candidates));
    }
  } catch (const json::exception &e) {
    ThrowMalformed("score_masked", e.what());
  }
  if (out.positions.size() != positions.size()) {
    ThrowMalformed("score_masked", "one candidate list per position expected");
  }
  for (CandidateList &candidates : out.positions) {
    if (candidates.empty()) ThrowMalformed("score_masked", "empty candidate list");
    for (const Candidate &c : candidates) {
      if (!info.InVocab(c.id)) ThrowMalformed("score_masked", "candidate id out of range");
    }
    SortCandidates(candidates);
    if (candidates.size() > static_cast<std::size_t>(k)) candidates.resize(k);
  }
  return out;
}

std::vector<std::vector<double>> WireBackend::Embed(
    std::span<const SubwordId> ids, std::span<const std::size_t> positions) {
  const ModelInfo info = Info();
  CheckPositions(ids, positions);
  json r = state_->Call("embed", {{"ids", IdsJson(ids)}, {"positions", PositionsJson(positions)}});
  std::vector<std::vector<double>> vectors;
  try {
    vectors = r.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const json::exception &e) {
    ThrowMalformed("embed", e.what());
  }
  if (vectors.size() != positions.size()) ThrowMalformed("embed", "one vector per position expected");
  for (const auto &v : vectors) {
    if (v.size() != static_cast<std::size_t>(info.hidden_size)) {
      ThrowMalformed("embed", "vector length differs from hidden_size");
    }
  }
  return vectors;
}

std::string WireBackend::Detokenize(std::span<const SubwordId> ids) {
  const ModelInfo info = Info();
  for (SubwordId id : ids) {
    if (!info.InVocab(id)) throw ContractError("unknown subword id " + std::to_string(id));
  }
  json r = state_->Call("detokenize", {{"ids", IdsJson(ids)}});
  try {
    return r.at("text").get<std::string>();
  } catch (const json::exception &e) {
    ThrowMalformed("detokenize", e.what());
  }
}

std::unique_ptr<WireBackend> ConnectBackend(const std::string &endpoint) {
  if (endpoint.rfind("http://", 0) == 0 || endpoint.rfind("https://", 0) == 0) {
    return std::make_unique<WireBackend>(ConnectHttpChannel(endpoint));
  }
  return std::make_unique<WireBackend>(SpawnProcessChannel(endpoint));
}

std::unique_ptr<LineChannel> SpawnProcessChannel(const std::string &command) {
  return std::make_unique<ProcessChannel>(command);
}

std::unique_ptr<LineChannel> ConnectHttpChannel(const std::string &base_url) {
  std::string url = base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  return std::make_unique<HttpChannel>(url);
}

std::string HandleWireRequest(Backend &backend, std::string_view line) {
  json request = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (request.is_discarded()) {
    return ErrorFrame(nullptr, wire_code::kParseError, "invalid JSON").dump();
  }
  if (!request.is_object() || !request.contains("id") || !request["id"].is_number_integer() ||
      !request.contains("method") || !request["method"].is_string()) {
    json id = request.is_object() && request.contains("id") ? request["id"] : json(nullptr);
    return ErrorFrame(id, wire_code::kInvalidRequest, "request needs integer id and method").dump();
  }
  const json id = request["id"];
  const std::string method = request["method"].get<std::string>();
  const json params = request.value("params", json::object());
  try {
    json result;
    if (method == "model_info") {
      ModelInfo info = backend.Info();
      result = {{"hidden_size", info.hidden_size}, {"vocab_size", info.vocab_size},
                {"max_seq_len", info.max_seq_len}, {"mask_id", info.mask_id},
                {"cls_id", info.cls_id},           {"sep_id", info.sep_id},
                {"unk_id", info.unk_id},           {"lowercases", info.lowercases}};
    } else if (method == "tokenize") {
      auto words = params.at("words").get<std::vector<std::string>>();
      Tokenized t = backend.Tokenize(words);
      json spans = json::array();
      for (const Span &s : t.alignment.spans) spans.push_back({s.start, s.end});
      result = {{"ids", t.ids}, {"spans", spans}};
    } else if (method == "score_masked") {
      auto ids = params.at("ids").get<std::vector<SubwordId>>();
      auto positions = params.at("positions").get<std::vector<std::size_t>>();
      TopK top = backend.ScoreMasked(ids, positions, params.at("k").get<int>());
      json lists = json::array();
      for (const CandidateList &list : top.positions) {
        json pairs = json::array();
        for (const Candidate &c : list) pairs.push_back({c.id, c.score});
        lists.push_back(std::move(pairs));
      }
      result = {{"topk", lists}};
    } else if (method == "embed") {
      auto ids = params.at("ids").get<std::vector<SubwordId>>();
      auto positions = params.at("positions").get<std::vector<std::size_t>>();
      result = {{"vectors", backend.Embed(ids, positions)}};
    } else if (method == "detokenize") {
      auto ids = params.at("ids").get<std::vector<SubwordId>>();
      result = {{"text", backend.Detokenize(ids)}};
    } else {
      return ErrorFrame(id, wire_code::kMethodNotFound, "unknown method '" + method + "'").dump();
    }
    return json{{"id", id}, {"result", std::move(result)}}.dump();
  } catch (const json::exception &e) {
    return ErrorFrame(id, wire_code::kInvalidParams, e.what()).dump();
  } catch (const OverflowError &e) {
    return ErrorFrame(id, wire_code::kOverflow, e.what(),
                      {{"required_length", e.required_length()}})
        .dump();
  } catch (const ContractError &e) {
    return ErrorFrame(id, wire_code::kContract, e.what()).dump();
  } catch (const std::exception &e) {
    return ErrorFrame(id, wire_code::kBackendFailure, e.what()).dump();
  }
}

void ServeLines(Backend &backend, std::istream &in, std::ostream &out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << HandleWireRequest(backend, line) << '\n' << std::flush;
  }
}

}  // namespace mlmeval
