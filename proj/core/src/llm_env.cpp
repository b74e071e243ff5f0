#include "dualplan/llm_env.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace dualplan {

using nlohmann::json;

std::string LlmConfig::resolved_api_key() const {
  if (!api_key.empty()) return api_key;
  if (const char* env = std::getenv("OPENAI_API_KEY")) return env;
  return "";
}

json build_chat_request(const LlmConfig& cfg, const std::vector<ChatMessage>& messages) {
  json msgs = json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", m.role}, {"content", m.content}});
  }
  return json{{"model", cfg.model},
              {"temperature", cfg.temperature},
              {"messages", std::move(msgs)}};
}

HttpChatTransport::HttpChatTransport(LlmConfig cfg) : cfg_(std::move(cfg)) {}

json HttpChatTransport::complete(const json& request) {
  httplib::Client client(cfg_.endpoint);
  client.set_connection_timeout(cfg_.timeout_s, 0);
  client.set_read_timeout(cfg_.timeout_s, 0);
  httplib::Headers headers{{"Authorization", "Bearer " + cfg_.resolved_api_key()}};
  const auto res = client.Post(cfg_.completion_path, headers, request.dump(),
                               "application/json");
  if (!res) {
    throw TransportError("chat request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 401 || res->status == 403) {
    throw AuthError("chat endpoint rejected the credential (HTTP " +
                    std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status) +
                         ": " + res->body);
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("unparseable chat response: ") + e.what());
  }
}

CassetteTransport::CassetteTransport(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cassette: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseFailure(std::string("bad cassette json: ") + e.what());
  }
  for (const auto& entry : j) {
    entries_.push_back({entry.at("request"), entry.at("response"), false});
  }
}

json CassetteTransport::complete(const json& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (auto& entry : entries_) {
    if (!entry.used && entry.request == request) {
      entry.used = true;
      return entry.response;
    }
  }
  throw TransportError("no unused cassette entry matches the request: " + request.dump());
}

RecordingTransport::RecordingTransport(std::shared_ptr<ChatTransport> inner,
                                       std::filesystem::path path)
    : inner_(std::move(inner)), path_(std::move(path)) {}

RecordingTransport::~RecordingTransport() {
  std::ofstream out(path_);
  if (out) out << recorded_.dump(2) << '\n';
}

json RecordingTransport::complete(const json& request) {
  json response = inner_->complete(request);
  std::lock_guard<std::mutex> lock(mutex_);
  recorded_.push_back({{"request", request}, {"response", response}});
  return response;
}

std::string llm_chat(ChatTransport& transport, const LlmConfig& cfg,
                     const std::vector<ChatMessage>& messages,
                     const std::function<void(int)>& sleeper) {
  const json request = build_chat_request(cfg, messages);
  if (cfg.trace) std::cerr << "[llm] request: " << request.dump() << '\n';

  auto sleep_ms = sleeper ? sleeper : [](int ms) {
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  };

  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, cfg.max_retries); ++attempt) {
    if (attempt > 0) sleep_ms(cfg.backoff_base_ms << (attempt - 1));
    try {
      const json response = transport.complete(request);
      if (cfg.trace) std::cerr << "[llm] response: " << response.dump() << '\n';
      try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const json::exception& e) {
        throw TransportError(std::string("malformed completion payload: ") + e.what());
      }
    } catch (const AuthError&) {
      throw;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
  }
  throw StepFailed("chat call failed after " + std::to_string(cfg.max_retries) +
                   " attempts: " + last_error);
}

LlmBackend::LlmBackend(PromptPack pack, LlmConfig cfg,
                       std::shared_ptr<ChatTransport> transport)
    : pack_(std::move(pack)), cfg_(std::move(cfg)), transport_(std::move(transport)) {
  if (!transport_) throw ConfigError("llm backend needs a transport");
}

namespace {

void append_history(std::vector<ChatMessage>& messages, const DialogueState& state,
                    bool system_is_assistant) {
  for (const auto& u : state.history) {
    const bool is_system = u.speaker == Speaker::System;
    const char* role = (is_system == system_is_assistant) ? "assistant" : "user";
    messages.push_back({role, u.text});
  }
}

}  // namespace

std::vector<ChatMessage> LlmBackend::assistant_messages(const DialogueState& state,
                                                        const std::string& instruction) const {
  auto subs = background_placeholders(state.background);
  subs["action"] = instruction;
  std::vector<ChatMessage> messages;
  for (const auto& t : pack_.assistant_scaffold) {
    messages.push_back({t.role, render_template(t.content, subs)});
  }
  append_history(messages, state, /*system_is_assistant=*/true);
  return messages;
}

std::vector<ChatMessage> LlmBackend::user_messages(const DialogueState& state) const {
  const auto subs = background_placeholders(state.background);
  std::vector<ChatMessage> messages;
  for (const auto& t : pack_.user_scaffold) {
    messages.push_back({t.role, render_template(t.content, subs)});
  }
  append_history(messages, state, /*system_is_assistant=*/false);
  return messages;
}

std::vector<ChatMessage> LlmBackend::critic_messages(const DialogueState& state) const {
  auto subs = background_placeholders(state.background);
  subs["conversation"] = render_transcript(state, pack_);
  std::vector<ChatMessage> messages;
  for (const auto& t : pack_.reward_scaffold) {
    messages.push_back({t.role, render_template(t.content, subs)});
  }
  return messages;
}

std::string LlmBackend::system_respond(const DialogueState& state,
                                       const std::string& instruction) {
  return llm_chat(*transport_, cfg_, assistant_messages(state, instruction));
}

std::string LlmBackend::user_respond(const DialogueState& state) {
  return llm_chat(*transport_, cfg_, user_messages(state));
}

std::string LlmBackend::critic_judge(const DialogueState& state, int /*sample_index*/) {
  return llm_chat(*transport_, cfg_, critic_messages(state));
}

std::shared_ptr<LlmBackend> make_llm_backend(const PromptPack& pack, const LlmConfig& cfg,
                                             std::shared_ptr<ChatTransport> transport) {
  if (!transport) {
    if (cfg.resolved_api_key().empty()) {
      throw ConfigError(
          "llm backend selected but no credential configured "
          "(set OPENAI_API_KEY or api_key in the config)");
    }
    transport = std::make_shared<HttpChatTransport>(cfg);
  }
  return std::make_shared<LlmBackend>(pack, cfg, std::move(transport));
}

}  // namespace dualplan
