#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace slic::llm {

class LlmClient {
public:
  virtual ~LlmClient() = default;
  // Completion for `prompt`, truncated before the first stop sequence.
  // Implementations must be safe to call from several threads at once.
  virtual std::string complete(const std::string& prompt, const std::vector<std::string>& stop) const = 0;
  virtual std::string name() const = 0;
};

// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stops(std::string text, const std::vector<std::string>& stop);

struct MockRule {
  // Substring of the prompt, or a regex when wrapped in slashes ("/.../").
  std::string match;
  // $1..$9 expand to regex capture groups.
  std::string response;
};

// Replays a script: the first rule matching the prompt answers; anything
// unmatched gets the refusal.
class MockLlm final : public LlmClient {
public:
  static constexpr const char* kDefaultRefusal = "I cannot answer that.";

  explicit MockLlm(std::vector<MockRule> rules, std::string refusal = kDefaultRefusal);
  ~MockLlm() override;
  MockLlm(MockLlm&&) noexcept;

  // Line-delimited JSON of {"match", "response"}; blank lines skipped.
  static MockLlm parse(const std::string& jsonl);
  static MockLlm load(const std::filesystem::path& path);

  std::string complete(const std::string& prompt, const std::vector<std::string>& stop) const override;
  std::string name() const override { return "mock"; }

  std::size_t calls() const { return calls_->load(); }

private:
  struct Compiled;
  std::vector<Compiled> compiled_;
  std::string refusal_;
  std::unique_ptr<std::atomic<std::size_t>> calls_;
};

// OpenAI-style completions endpoint: POST <base>/v1/completions with
// {"model", "prompt", "stop", "max_tokens", "temperature": 0}. Bearer token
// from SLIC_LLM_TOKEN when set. Transport or HTTP failures raise
// LlmUnavailable.
class HttpLlmClient final : public LlmClient {
public:
  HttpLlmClient(std::string base_url, std::string model, int max_tokens = 512);
  std::string complete(const std::string& prompt, const std::vector<std::string>& stop) const override;
  std::string name() const override { return "http:" + model_; }

private:
  std::string base_url_;
  std::string model_;
  int max_tokens_;
};

}  // namespace slic::llm
