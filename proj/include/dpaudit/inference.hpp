#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

// Eigen must precede httplib: httplib drags in <resolv.h>, whose _res macro
// breaks Eigen headers included after it.
#include <Eigen/Core>

#include <httplib.h>
#include <json.hpp>

#include <dpaudit/errors.hpp>
#include <dpaudit/mock.hpp>
#include <dpaudit/plan.hpp>
#include <dpaudit/profile.hpp>
#include <dpaudit/prompts.hpp>

namespace dpaudit {

struct ClientConfig {
  std::string endpoint;  // full URL of the chat-completions route
  std::string model;
  std::string auth_env = "DPAUDIT_API_KEY";  // token read from this env var, never logged
  int max_tokens = 512;
  double temperature = 0.0;  // greedy decoding default
  int timeout_sec = 120;
  int retry_budget = 3;       // retries after the first attempt
  double backoff_base_sec = 1.0;
  double backoff_cap_sec = 30.0;
  int max_in_flight = 4;
  bool merge_system_into_user = false;  // for endpoints that reject system roles
};

struct TrialResult {
  std::string trial_id;
  std::string raw_text;
  std::int64_t latency_ms = 0;
  int attempt_count = 0;
  bool ok = true;
  std::string timestamp;  // ISO 8601 UTC

  bool operator==(const TrialResult&) const = default;
};

inline ojson to_json(const TrialResult& r) {
  ojson j;
  j["trial_id"] = r.trial_id;
  j["raw_text"] = r.raw_text;
  j["latency_ms"] = r.latency_ms;
  j["attempt_count"] = r.attempt_count;
  j["status"] = r.ok ? "ok" : "failed";
  j["timestamp"] = r.timestamp;
  return j;
}

inline TrialResult trial_result_from_json(const ojson& j) {
  TrialResult r;
  r.trial_id = j.at("trial_id").get<std::string>();
  r.raw_text = j.at("raw_text").get<std::string>();
  r.latency_ms = j.at("latency_ms").get<std::int64_t>();
  r.attempt_count = j.at("attempt_count").get<int>();
  r.ok = j.at("status").get<std::string>() == "ok";
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

inline std::vector<TrialResult> read_results_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<TrialResult> rs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError(path + " line " + std::to_string(lineno) + ": bad JSON");
    rs.push_back(trial_result_from_json(j));
  }
  return rs;
}

// One unit of work. Prompts are rendered lazily by clients that need text;
// the mock decides from features directly.
struct BatchItem {
  TrialSpec spec;
  Profile profile;
};

class ChatClient {
 public:
  struct Reply {
    bool ok = false;
    bool retryable = false;
    std::string text;
    std::string error;
  };
  virtual ~ChatClient() = default;
  virtual Reply complete(const BatchItem& item) = 0;
};

// Single chat-completions POST: messages with roles, single text choice. The
// auth token comes from the configured environment variable and is never
// written anywhere.
inline ChatClient::Reply post_chat(const ClientConfig& cfg, const std::string& system_text,
                                   const std::string& user_text) {
  const auto scheme_end = cfg.endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint must be a full URL, got '" + cfg.endpoint + "'");
  const auto path_start = cfg.endpoint.find('/', scheme_end + 3);
  const std::string base = cfg.endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/v1/chat/completions"
                                                           : cfg.endpoint.substr(path_start);

  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  auto messages = nlohmann::ordered_json::array();
  if (!system_text.empty())
    messages.push_back({{"role", "system"}, {"content", system_text}});
  messages.push_back({{"role", "user"}, {"content", user_text}});
  body["messages"] = std::move(messages);
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;

  httplib::Client cli(base);
  cli.set_connection_timeout(cfg.timeout_sec, 0);
  cli.set_read_timeout(cfg.timeout_sec, 0);
  httplib::Headers headers;
  if (!cfg.auth_env.empty())
    if (const char* tok = std::getenv(cfg.auth_env.c_str()))
      headers.emplace("Authorization", std::string("Bearer ") + tok);
  auto res = cli.Post(path, headers, body.dump(), "application/json");

  ChatClient::Reply reply;
  if (!res) {
    reply.retryable = true;
    reply.error = "transport: " + httplib::to_string(res.error());
    return reply;
  }
  if (res->status >= 500 || res->status == 429) {
    reply.retryable = true;
    reply.error = "http " + std::to_string(res->status);
    return reply;
  }
  if (res->status != 200) {
    reply.retryable = false;
    reply.error = "http " + std::to_string(res->status);
    return reply;
  }
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
    reply.retryable = false;
    reply.error = "malformed completion response";
    return reply;
  }
  const auto& choice = j["choices"][0];
  if (choice.contains("message") && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    reply.ok = true;
    reply.text = choice["message"]["content"].get<std::string>();
    return reply;
  }
  reply.error = "no message content in response";
  return reply;
}

// HTTP(S) client that renders each trial's prompt from the bundled templates.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(const ClientConfig& cfg, PromptLibrary lib)
      : cfg_(cfg), lib_(std::move(lib)) {}

  Reply complete(const BatchItem& item) override {
    const Institution inst{item.spec.institution, item.spec.acceptance_rate, item.spec.tier};
    const auto prompt =
        render_prompt(lib_, inst, item.profile, item.spec.system, item.spec.mode,
                      item.spec.prompt_variant, item.spec.attr_seed,
                      cfg_.merge_system_into_user);
    return post_chat(cfg_, prompt.system_text, prompt.user_text);
  }

 private:
  ClientConfig cfg_;
  PromptLibrary lib_;
};

// Offline stand-in driven by the planted logistic model.
class MockChatClient : public ChatClient {
 public:
  explicit MockChatClient(MockParams params = {}) : params_(params) {}
  Reply complete(const BatchItem& item) override {
    return {true, false, mock_response(item.spec, item.profile, params_), ""};
  }
  const MockParams& params() const { return params_; }

 private:
  MockParams params_;
};

namespace detail {

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Append-only JSONL writer with periodic fsync.
class ResultLog {
 public:
  explicit ResultLog(const std::string& path) : path_(path) {
    file_ = std::fopen(path.c_str(), "ab");
    if (!file_) throw IoError("cannot open result log " + path);
  }
  ~ResultLog() {
    if (file_) {
      std::fflush(file_);
      ::fsync(fileno(file_));
      std::fclose(file_);
    }
  }
  void append(const TrialResult& r) {
    const std::string line = to_json(r).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_) != line.size())
      throw IoError("short write to " + path_);
    if (++since_sync_ >= 64) {
      std::fflush(file_);
      ::fsync(fileno(file_));
      since_sync_ = 0;
    }
  }

 private:
  std::string path_;
  std::FILE* file_ = nullptr;
  int since_sync_ = 0;
};

}  // namespace detail

// Executes every trial not already present in the log, with bounded
// parallelism and exponential backoff with full jitter on retryable errors.
// The log is append-only; a rerun skips finished trials, so an interrupted
// batch resumes where it stopped. Returns one result per input item
// (existing log entries included), ordered by trial_id.
inline std::vector<TrialResult> execute_batch(
    const std::vector<BatchItem>& items, ChatClient& client, const ClientConfig& cfg,
    const std::string& log_path,
    const std::function<void(std::size_t, std::size_t)>& progress = {}) {
  std::map<std::string, TrialResult> done;
  {
    std::ifstream probe(log_path);
    if (probe.good()) {
      probe.close();
      for (auto& r : read_results_jsonl(log_path)) done[r.trial_id] = std::move(r);
    }
  }

  std::vector<const BatchItem*> todo;
  for (const auto& item : items)
    if (!done.count(item.spec.trial_id)) todo.push_back(&item);

  if (!todo.empty()) {
    detail::ResultLog log(log_path);
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};

    auto worker = [&]() {
      while (true) {
        const std::size_t k = next.fetch_add(1);
        if (k >= todo.size()) return;
        const BatchItem& item = *todo[k];
        TrialResult result;
        result.trial_id = item.spec.trial_id;

        RngStream jitter(fnv1a64(item.spec.trial_id), "retry_jitter");
        const auto t0 = std::chrono::steady_clock::now();
        for (int attempt = 1; attempt <= cfg.retry_budget + 1; ++attempt) {
          result.attempt_count = attempt;
          ChatClient::Reply reply = client.complete(item);
          if (reply.ok) {
            result.ok = true;
            result.raw_text = std::move(reply.text);
            break;
          }
          result.ok = false;
          result.raw_text.clear();
          if (!reply.retryable || attempt == cfg.retry_budget + 1) break;
          const double cap = std::min(cfg.backoff_cap_sec,
                                      cfg.backoff_base_sec * std::pow(2.0, attempt - 1));
          const double sleep_s = jitter.uniform(0.0, cap);
          std::this_thread::sleep_for(std::chrono::milliseconds(
              static_cast<std::int64_t>(sleep_s * 1000)));
        }
        result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
        result.timestamp = detail::utc_timestamp();

        std::lock_guard<std::mutex> lock(mu);
        log.append(result);
        done[result.trial_id] = std::move(result);
        const std::size_t f = ++finished;
        if (progress && (f % 1000 == 0 || f == todo.size())) progress(f, todo.size());
      }
    };

    const int n_threads = std::max(1, std::min<int>(cfg.max_in_flight,
                                                    static_cast<int>(todo.size())));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<TrialResult> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    auto it = done.find(item.spec.trial_id);
    if (it != done.end()) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end(),
            [](const TrialResult& a, const TrialResult& b) { return a.trial_id < b.trial_id; });
  return out;
}

}  // namespace dpaudit
