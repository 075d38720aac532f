// Eigen comes in before httplib: <resolv.h>, pulled in by httplib, defines
// a `_res` macro that collides with Eigen parameter names.
#include "iamm/instruction.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "iamm/errors.hpp"

namespace iamm {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("chat: url must start with http://");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw ConfigError("chat: only http:// endpoints are supported in this build");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (p.origin.size() <= scheme_end + 3) throw ConfigError("chat: url has no host");
  return p;
}

bool transient(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string chat_request_body(const InstructionPrompt& prompt, const std::string& model) {
  json messages = json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  return json{{"model", model}, {"messages", std::move(messages)}}.dump();
}

std::string chat_send(const InstructionPrompt& prompt, const ChatEndpoint& endpoint) {
  const char* key = std::getenv(endpoint.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("chat: credential variable " + endpoint.api_key_env + " is not set");
  if (endpoint.max_attempts < 1) throw ConfigError("chat: max_attempts must be >= 1");
  const ParsedUrl url = parse_url(endpoint.url);

  httplib::Client client(url.origin);
  client.set_connection_timeout(endpoint.timeout_seconds, 0);
  client.set_read_timeout(endpoint.timeout_seconds, 0);
  client.set_write_timeout(endpoint.timeout_seconds, 0);
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
  const std::string body = chat_request_body(prompt, endpoint.model);

  std::string last_error;
  auto delay = endpoint.backoff;
  for (int attempt = 1; attempt <= endpoint.max_attempts; ++attempt) {
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      try {
        const json j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw TransportError(std::string("chat: malformed response: ") + e.what());
      }
    } else if (transient(res->status)) {
      last_error = "status " + std::to_string(res->status);
    } else {
      throw TransportError("chat: status " + std::to_string(res->status) + ": " + res->body);
    }
    if (attempt < endpoint.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError("chat: giving up after " + std::to_string(endpoint.max_attempts) + " attempts (" +
                       last_error + ")");
}

}  // namespace iamm
