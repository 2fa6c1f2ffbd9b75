#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "core/error.hpp"
#include "llmgen/llmgen.hpp"

namespace mutforge::llmgen {

using nlohmann::json;

namespace {

class Gate {
 public:
  explicit Gate(std::size_t slots) : free_(slots) {}
  void acquire() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lk(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t free_;
};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::Config, "endpoint '" + url + "' must start with http://");
  }
  if (url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorCode::Config,
                "endpoint '" + url + "': only plain http is supported (no TLS in this build)");
  }
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(BackendDescriptor d)
      : d_(std::move(d)), endpoint_(split_endpoint(d_.endpoint)), gate_(d_.max_in_flight) {}

  const BackendDescriptor& descriptor() const override { return d_; }

  Completion complete(const std::string& prompt) override {
    json body = {{"model", d_.model_name},
                 {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
                 {"temperature", d_.temperature}};
    std::string payload = body.dump();
    httplib::Headers headers;
    if (const char* key = std::getenv(d_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    gate_.acquire();
    struct Release {
      Gate& g;
      ~Release() { g.release(); }
    } release{gate_};

    std::string last_error;
    double backoff = d_.backoff_seconds;
    for (int attempt = 0; attempt <= d_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2;
      }
      httplib::Client cli(endpoint_.origin);
      auto secs = static_cast<time_t>(d_.request_timeout);
      auto usecs = static_cast<time_t>((d_.request_timeout - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(endpoint_.path, headers, payload, "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::Transport, d_.id + ": HTTP " + std::to_string(res->status) + ": " +
                                              res->body.substr(0, 200));
      }
      return decode(res->body);
    }
    throw Error(ErrorCode::Transport, d_.id + ": giving up after " +
                                          std::to_string(d_.retries + 1) +
                                          " attempt(s): " + last_error);
  }

 private:
  Completion decode(const std::string& body) const {
    json j = json::parse(body, nullptr, false);
    auto bad = [&](const std::string& what) {
      return Error(ErrorCode::Protocol, d_.id + ": malformed chat response: " + what);
    };
    if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      throw bad("missing choices[0]");
    }
    const json& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) {
      throw bad("missing choices[0].message");
    }
    Completion c;
    const json& msg = choice["message"];
    if (msg.contains("content") && !msg["content"].is_null()) {
      if (!msg["content"].is_string()) throw bad("message.content is not a string");
      c.text = msg["content"].get<std::string>();
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      const json& u = j["usage"];
      if (u.contains("prompt_tokens") && u["prompt_tokens"].is_number_unsigned()) {
        c.usage.prompt_tokens = u["prompt_tokens"].get<std::uint64_t>();
      }
      if (u.contains("completion_tokens") && u["completion_tokens"].is_number_unsigned()) {
        c.usage.completion_tokens = u["completion_tokens"].get<std::uint64_t>();
      }
    }
    return c;
  }

  BackendDescriptor d_;
  Endpoint endpoint_;
  Gate gate_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_http_backend(const BackendDescriptor& d) {
  return std::make_unique<HttpBackend>(d);
}

}  // namespace mutforge::llmgen
