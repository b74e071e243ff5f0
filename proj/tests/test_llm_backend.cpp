#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualplan/errors.hpp"
#include "dualplan/llm_env.hpp"
#include "dualplan/prompt_pack.hpp"

#include "test_util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace dualplan;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kPromptDir = DUALPLAN_PROMPT_DIR;
const fs::path kDataDir = DUALPLAN_TEST_DATA_DIR;

/// In-memory transport with a scripted completion queue.
class FakeTransport final : public ChatTransport {
 public:
  std::vector<json> responses;
  std::vector<json> seen;
  int failures_before_success = 0;
  bool auth_fail = false;

  json complete(const json& request) override {
    if (auth_fail) throw AuthError("401");
    if (failures_before_success > 0) {
      --failures_before_success;
      throw TransportError("flaky network");
    }
    seen.push_back(request);
    if (responses.empty()) {
      return json{{"choices", {{{"message", {{"content", "ok"}}}}}}};
    }
    json r = responses.front();
    responses.erase(responses.begin());
    return r;
  }
};

CaseBackground esconv_background() {
  CaseBackground bg;
  bg.situation =
      "I think I will be losing my job soon. I just read an email talking about the need "
      "for us to cut costs and also how we have not got any support from the government.";
  bg.emotion_type = "Fear";
  bg.problem_type = "Job Crisis";
  return bg;
}

}  // namespace

TEST_CASE("prompt packs load for all three built-in tasks") {
  for (const auto task : {TaskId::ESConv, TaskId::CIMA, TaskId::CraigslistBargain}) {
    const auto pack = PromptPack::load(kPromptDir, task);
    CHECK(!pack.assistant_scaffold.empty());
    CHECK(!pack.user_scaffold.empty());
    CHECK(!pack.reward_scaffold.empty());
    pack.catalog.validate();
  }
  const auto esconv = PromptPack::load(kPromptDir, TaskId::ESConv);
  CHECK(esconv.catalog.size() == 8);
  CHECK(esconv.assistant_scaffold[0].role == "system");
  CHECK(esconv.reward_scaffold[1].content.find(
            "You can only reply with one of the following sentences") != std::string::npos);
  CHECK(esconv.system_display == "Therapist");
}

TEST_CASE("prompt pack catalogs match the embedded built-ins byte for byte") {
  for (const auto task : {TaskId::ESConv, TaskId::CIMA, TaskId::CraigslistBargain}) {
    const auto pack = PromptPack::load(kPromptDir, task);
    const auto builtin = StrategyCatalog::builtin(task);
    REQUIRE(pack.catalog.size() == builtin.size());
    for (int i = 0; i < builtin.size(); ++i) {
      CHECK(pack.catalog.at(i).name == builtin.at(i).name);
      CHECK(pack.catalog.at(i).instruction == builtin.at(i).instruction);
    }
  }
}

TEST_CASE("render_template substitutes every named placeholder") {
  const std::string out = render_template(
      "about [emotion type] regarding [problem type]: [emotion type]",
      {{"emotion type", "Fear"}, {"problem type", "Job Crisis"}});
  CHECK(out == "about Fear regarding Job Crisis: Fear");
  // Unknown placeholders stay literal ([price] in the CB reward prompt).
  CHECK(render_template("deal at [price].", {{"conversation", "x"}}) == "deal at [price].");
}

TEST_CASE("assistant message assembly: scaffold, action slot, history roles") {
  const auto pack = PromptPack::load(kPromptDir, TaskId::ESConv);
  LlmConfig cfg;
  cfg.model = "test-model";
  auto transport = std::make_shared<FakeTransport>();
  LlmBackend backend(pack, cfg, transport);

  DialogueState state = llm_initial_state(TaskId::ESConv, esconv_background());
  Utterance sys;
  sys.text = "Tell me more about the email.";
  sys.strategy = 0;
  Utterance usr;
  usr.text = "It said costs must be cut.";
  state = state.advanced(sys, usr);

  const auto messages = backend.assistant_messages(
      state, "Please provide suggestion to the Patient on the situation they just described.");
  REQUIRE(messages.size() == 6);  // 3 scaffold + 3 history
  CHECK(messages[0].role == "system");
  CHECK(messages[1].content.find("[action]") == std::string::npos);
  CHECK(messages[1].content.find("Please provide suggestion") != std::string::npos);
  CHECK(messages[2].role == "assistant");
  CHECK(messages[3].role == "user");       // patient situation
  CHECK(messages[4].role == "assistant");  // therapist turn
  CHECK(messages[5].role == "user");

  // The user simulator sees the same dialogue with roles flipped.
  const auto user_side = backend.user_messages(state);
  CHECK(user_side.back().role == "assistant");
  CHECK(user_side.back().content == "It said costs must be cut.");
}

TEST_CASE("critic messages embed the rendered transcript") {
  const auto pack = PromptPack::load(kPromptDir, TaskId::ESConv);
  LlmBackend backend(pack, {}, std::make_shared<FakeTransport>());
  DialogueState state = llm_initial_state(TaskId::ESConv, esconv_background());
  const auto messages = backend.critic_messages(state);
  REQUIRE(messages.size() == 2);
  CHECK(messages[1].content.find("Patient: I think I will be losing my job soon.") !=
        std::string::npos);
  CHECK(messages[1].content.find("about Fear regarding Job Crisis") != std::string::npos);
}

TEST_CASE("wire schema matches the golden fixture") {
  const auto pack = PromptPack::load(kPromptDir, TaskId::ESConv);
  LlmConfig cfg;
  cfg.model = "gpt-3.5-turbo";
  cfg.temperature = 0.7;
  auto transport = std::make_shared<FakeTransport>();
  LlmBackend backend(pack, cfg, transport);

  const DialogueState state = llm_initial_state(TaskId::ESConv, esconv_background());
  const json request = build_chat_request(
      cfg, backend.assistant_messages(
               state, "Please ask the Patient to elaborate on the situation they just "
                      "described."));

  std::ifstream golden_file(kDataDir / "golden_chat_request.json");
  REQUIRE(golden_file.good());
  const json golden = json::parse(golden_file);
  CHECK(request == golden);
}

TEST_CASE("llm_chat parses completions and retries transient failures") {
  LlmConfig cfg;
  cfg.max_retries = 3;
  FakeTransport transport;
  transport.failures_before_success = 2;
  transport.responses = {json{{"choices", {{{"message", {{"content", "No, the Patient feels the same."}}}}}}}};
  int sleeps = 0;
  const std::string reply =
      llm_chat(transport, cfg, {{"user", "hi"}}, [&sleeps](int) { ++sleeps; });
  CHECK(reply == "No, the Patient feels the same.");
  CHECK(sleeps == 2);  // backoff before the 2nd and 3rd attempts
}

TEST_CASE("llm_chat gives up after max_retries and fails fast on auth errors") {
  LlmConfig cfg;
  cfg.max_retries = 3;
  FakeTransport always_down;
  always_down.failures_before_success = 99;
  int sleeps = 0;
  CHECK_THROWS_AS(llm_chat(always_down, cfg, {{"user", "hi"}}, [&sleeps](int) { ++sleeps; }),
                  StepFailed);
  CHECK(sleeps == 2);

  FakeTransport locked;
  locked.auth_fail = true;
  int auth_sleeps = 0;
  CHECK_THROWS_AS(
      llm_chat(locked, cfg, {{"user", "hi"}}, [&auth_sleeps](int) { ++auth_sleeps; }),
      AuthError);
  CHECK(auth_sleeps == 0);  // no retry on credential rejection
}

TEST_CASE("offline llm backend fails at startup without a credential") {
  const auto pack = PromptPack::load(kPromptDir, TaskId::ESConv);
  LlmConfig cfg;
  cfg.api_key = "";
  const char* saved = std::getenv("OPENAI_API_KEY");
  std::string saved_value = saved ? saved : "";
  unsetenv("OPENAI_API_KEY");
  CHECK_THROWS_AS(make_llm_backend(pack, cfg), ConfigError);
  if (saved) setenv("OPENAI_API_KEY", saved_value.c_str(), 1);

  // An explicit transport (cassette/testing) needs no credential.
  CHECK(make_llm_backend(pack, cfg, std::make_shared<FakeTransport>()) != nullptr);
}

TEST_CASE("cassette replay returns recorded responses bit-exactly") {
  const auto cassette_path = kDataDir / "cassette_sample.json";
  REQUIRE(fs::exists(cassette_path));
  CassetteTransport transport(cassette_path);

  std::ifstream in(cassette_path);
  const json entries = json::parse(in);
  REQUIRE(entries.size() >= 2);

  // Entries match regardless of call order and replay at most once.
  const json second = transport.complete(entries[1]["request"]);
  CHECK(second == entries[1]["response"]);
  const json first = transport.complete(entries[0]["request"]);
  CHECK(first == entries[0]["response"]);
  CHECK_THROWS_AS(transport.complete(entries[0]["request"]), TransportError);
  CHECK_THROWS_AS(transport.complete(json{{"model", "unknown"}}), TransportError);
}

TEST_CASE("recording transport writes a replayable cassette") {
  const auto path = fs::temp_directory_path() / "dualplan_recorded_cassette.json";
  {
    auto inner = std::make_shared<FakeTransport>();
    inner->responses = {json{{"choices", {{{"message", {{"content", "hello"}}}}}}}};
    RecordingTransport recorder(inner, path);
    const json request = build_chat_request({}, {{"user", "hi"}});
    recorder.complete(request);
  }
  CassetteTransport replay(path);
  const json request = build_chat_request({}, {{"user", "hi"}});
  CHECK(replay.complete(request)["choices"][0]["message"]["content"] == "hello");
  fs::remove(path);
}

TEST_CASE("llm-backed episode over a cassette produces a full transition") {
  const auto pack = PromptPack::load(kPromptDir, TaskId::ESConv);
  LlmConfig cfg;
  cfg.model = "gpt-3.5-turbo";
  auto transport = std::make_shared<FakeTransport>();
  // One system reply, one user reply, then ten critic verdicts.
  transport->responses.push_back(
      json{{"choices", {{{"message", {{"content", "Could you tell me more?"}}}}}}});
  transport->responses.push_back(
      json{{"choices", {{{"message", {{"content", "I am afraid of losing income."}}}}}}});
  for (int i = 0; i < 10; ++i) {
    transport->responses.push_back(json{
        {"choices", {{{"message", {{"content", "No, but the Patient feels better."}}}}}}});
  }
  const auto backend = make_llm_backend(pack, cfg, transport);

  auto task = TaskSpec::builtin(TaskId::ESConv);
  CallCounter counter;
  EnvSession session(backend, task, &counter);
  const auto state = llm_initial_state(TaskId::ESConv, esconv_background());
  const auto t = session.step(state, task.catalog.at(0));
  CHECK(t.reward == doctest::Approx(0.1));
  CHECK(!t.done);
  CHECK(counter.snapshot().acting.units() == 3);
  CHECK(counter.snapshot().acting.critic_samples == 10);
}
