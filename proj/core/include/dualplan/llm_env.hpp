#pragma once

#include "dualplan/env.hpp"
#include "dualplan/errors.hpp"
#include "dualplan/prompt_pack.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dualplan {

/// Network-level failure of a chat call; retried with backoff.
struct TransportError : Error {
  using Error::Error;
};

/// Credential rejection; never retried.
struct AuthError : TransportError {
  using TransportError::TransportError;
};

struct LlmConfig {
  std::string endpoint = "https://api.openai.com";
  std::string completion_path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  std::string api_key;  // falls back to $OPENAI_API_KEY
  int max_retries = 3;
  int backoff_base_ms = 1000;
  int timeout_s = 60;
  bool trace = false;

  std::string resolved_api_key() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// OpenAI-compatible chat-completions request body.
nlohmann::json build_chat_request(const LlmConfig& cfg,
                                  const std::vector<ChatMessage>& messages);

/// Raw request/response exchange channel; implementations are HTTP, cassette
/// replay, or a recording wrapper.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual nlohmann::json complete(const nlohmann::json& request) = 0;
};

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(LlmConfig cfg);
  nlohmann::json complete(const nlohmann::json& request) override;

 private:
  LlmConfig cfg_;
};

/// Replays recorded request/response pairs from a JSON fixture file:
/// [{"request": {...}, "response": {...}}, ...]. Requests must match the
/// recorded ones exactly; every entry replays at most once.
class CassetteTransport final : public ChatTransport {
 public:
  explicit CassetteTransport(const std::filesystem::path& path);
  nlohmann::json complete(const nlohmann::json& request) override;

 private:
  struct Entry {
    nlohmann::json request;
    nlohmann::json response;
    bool used = false;
  };
  std::mutex mutex_;
  std::vector<Entry> entries_;
};

/// Records every exchange passing through an inner transport and appends it
/// to a cassette file on destruction.
class RecordingTransport final : public ChatTransport {
 public:
  RecordingTransport(std::shared_ptr<ChatTransport> inner, std::filesystem::path path);
  ~RecordingTransport() override;
  nlohmann::json complete(const nlohmann::json& request) override;

 private:
  std::shared_ptr<ChatTransport> inner_;
  std::filesystem::path path_;
  std::mutex mutex_;
  nlohmann::json recorded_ = nlohmann::json::array();
};

/// Single completion with the configured retry policy (default 3 attempts,
/// backoff 1s/2s/4s). Auth errors fail fast. The sleeper is injectable so
/// tests do not wait.
std::string llm_chat(ChatTransport& transport, const LlmConfig& cfg,
                     const std::vector<ChatMessage>& messages,
                     const std::function<void(int ms)>& sleeper = {});

/// Three-role backend that renders the prompt pack scaffolds around the
/// dialogue history and calls an OpenAI-compatible endpoint.
class LlmBackend final : public RoleBackend {
 public:
  LlmBackend(PromptPack pack, LlmConfig cfg, std::shared_ptr<ChatTransport> transport);

  std::string system_respond(const DialogueState& state,
                             const std::string& instruction) override;
  std::string user_respond(const DialogueState& state) override;
  std::string critic_judge(const DialogueState& state, int sample_index) override;

  /// Messages as sent on the wire, exposed for golden-fixture tests.
  std::vector<ChatMessage> assistant_messages(const DialogueState& state,
                                              const std::string& instruction) const;
  std::vector<ChatMessage> user_messages(const DialogueState& state) const;
  std::vector<ChatMessage> critic_messages(const DialogueState& state) const;

 private:
  PromptPack pack_;
  LlmConfig cfg_;
  std::shared_ptr<ChatTransport> transport_;
};

/// Builds an LLM backend after the fail-fast configuration checks: a live
/// HTTP transport requires a credential at startup, never mid-episode.
std::shared_ptr<LlmBackend> make_llm_backend(const PromptPack& pack, const LlmConfig& cfg,
                                             std::shared_ptr<ChatTransport> transport = nullptr);

}  // namespace dualplan
