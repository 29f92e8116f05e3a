#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "vortex/errors.hpp"
#include "vortex/shaper.hpp"

namespace vortex {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("remote endpoint must be a full URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.base = url;
    out.path = "/";
  } else {
    out.base = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

// Completion text from common chat-response envelopes, else the raw body.
std::string completion_text(const std::string& body) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return body;
  if (doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    const json& c0 = doc["choices"][0];
    if (c0.contains("message") && c0["message"].contains("content"))
      return c0["message"]["content"].get<std::string>();
    if (c0.contains("text")) return c0["text"].get<std::string>();
  }
  if (doc.contains("content") && doc["content"].is_string())
    return doc["content"].get<std::string>();
  return body;
}

}  // namespace

RemoteShaper::RemoteShaper(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw ConfigError("remote backend needs an endpoint URL");
  if (cfg_.model.empty()) throw ConfigError("remote backend needs a model name");
}

std::string RemoteShaper::complete(const std::string& prompt_text) {
  const char* key = std::getenv(cfg_.api_key_env.c_str());
  if (!key || !*key)
    throw ConfigError("credential environment variable " + cfg_.api_key_env +
                      " is not set");

  ParsedUrl url = parse_url(cfg_.endpoint);
  json body = {
      {"model", cfg_.model},
      {"temperature", cfg_.temperature},
      {"messages", json::array({{{"role", "user"}, {"content", prompt_text}}})},
  };
  std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      int wait = cfg_.backoff_ms << (attempt - 1);
      std::this_thread::sleep_for(std::chrono::milliseconds(wait));
    }
    httplib::Client client(url.base);
    client.set_connection_timeout(cfg_.timeout_s, 0);
    client.set_read_timeout(cfg_.timeout_s, 0);
    httplib::Headers headers = {
        {"Authorization", std::string("Bearer ") + key}};
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    return completion_text(res->body);
  }
  throw ProposalError(ProposalFailure::kTransport,
                      "remote endpoint failed after " +
                          std::to_string(cfg_.max_retries + 1) +
                          " attempts: " + last_error);
}

ShaperOutput RemoteShaper::propose(const ShaperContext& ctx) {
  std::string prompt_text = render_prompt(ctx.prompt, cfg_.prompt_history_cap);

  std::vector<std::string> warnings;
  ShaperOutput out;
  out.backend = name();
  for (int ask = 0; ask < 2; ++ask) {
    std::string request = prompt_text;
    if (ask == 1)
      request += "\n\nReminder: respond with a single JSON object mapping every "
                 "class id (0.." + std::to_string(ctx.env.Z - 1) +
                 ") to a numeric shaping reward.";
    std::string text = complete(request);
    try {
      std::string obj = extract_first_json_object(text);
      std::vector<double> values = parse_reward_object(obj, ctx.env.Z);
      out.shaping = validate_shaping(values, ctx.env.Z, cfg_.r_max,
                                     /*clamp_out_of_range=*/true, &warnings);
      break;
    } catch (const ProposalError& e) {
      if (e.kind() == ProposalFailure::kParse && ask == 0) continue;
      throw;
    }
  }
  for (const auto& w : warnings)
    out.rationale += (out.rationale.empty() ? "" : "; ") + w;
  return out;
}

}  // namespace vortex
