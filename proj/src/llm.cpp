#include "slic/llm.hpp"

#include <boost/regex.hpp>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "slic/error.hpp"
#include "slic/util.hpp"

namespace slic::llm {

using nlohmann::json;

std::string apply_stops(std::string text, const std::vector<std::string>& stop) {
  std::size_t cut = text.size();
  for (const auto& s : stop) {
    if (s.empty()) continue;
    cut = std::min(cut, text.find(s));
  }
  text.resize(cut);
  return text;
}

struct MockLlm::Compiled {
  MockRule rule;
  std::optional<boost::regex> re;
};

MockLlm::MockLlm(std::vector<MockRule> rules, std::string refusal)
    : refusal_(std::move(refusal)), calls_(std::make_unique<std::atomic<std::size_t>>(0)) {
  for (auto& r : rules) {
    Compiled c{std::move(r), std::nullopt};
    const auto& m = c.rule.match;
    if (m.size() >= 2 && m.front() == '/' && m.back() == '/') {
      try {
        c.re.emplace(m.substr(1, m.size() - 2), boost::regex::perl);
      } catch (const boost::regex_error& e) {
        throw FormatError("mock rule regex " + m + ": " + e.what());
      }
    }
    compiled_.push_back(std::move(c));
  }
}

MockLlm::~MockLlm() = default;
MockLlm::MockLlm(MockLlm&&) noexcept = default;

MockLlm MockLlm::parse(const std::string& jsonl) {
  std::vector<MockRule> rules;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      rules.push_back({j.at("match").get<std::string>(), j.at("response").get<std::string>()});
    } catch (const json::exception& e) {
      throw FormatError("mock script line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return MockLlm(std::move(rules));
}

MockLlm MockLlm::load(const std::filesystem::path& path) { return parse(util::read_file(path)); }

namespace {

std::string expand(const std::string& templ, const boost::smatch& m) {
  std::string out;
  for (std::size_t i = 0; i < templ.size(); ++i) {
    if (templ[i] == '$' && i + 1 < templ.size() && templ[i + 1] >= '1' && templ[i + 1] <= '9') {
      std::size_t g = static_cast<std::size_t>(templ[i + 1] - '0');
      if (g < m.size()) out += m[g].str();
      ++i;
    } else {
      out += templ[i];
    }
  }
  return out;
}

}  // namespace

std::string MockLlm::complete(const std::string& prompt, const std::vector<std::string>& stop) const {
  calls_->fetch_add(1);
  for (const auto& c : compiled_) {
    if (c.re) {
      boost::smatch m;
      if (boost::regex_search(prompt, m, *c.re)) return apply_stops(expand(c.rule.response, m), stop);
    } else if (prompt.find(c.rule.match) != std::string::npos) {
      return apply_stops(c.rule.response, stop);
    }
  }
  return apply_stops(refusal_, stop);
}

HttpLlmClient::HttpLlmClient(std::string base_url, std::string model, int max_tokens)
    : base_url_(std::move(base_url)), model_(std::move(model)), max_tokens_(max_tokens) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpLlmClient::complete(const std::string& prompt, const std::vector<std::string>& stop) const {
  httplib::Client client(base_url_);
  client.set_connection_timeout(5);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (const char* token = std::getenv("SLIC_LLM_TOKEN"); token && *token)
    headers.emplace("Authorization", std::string("Bearer ") + token);
  json body{{"model", model_}, {"prompt", prompt}, {"max_tokens", max_tokens_}, {"temperature", 0}};
  if (!stop.empty()) body["stop"] = stop;
  auto res = client.Post("/v1/completions", headers, body.dump(), "application/json");
  if (!res) throw LlmUnavailable(base_url_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw LlmUnavailable(base_url_ + " returned HTTP " + std::to_string(res->status));
  try {
    return apply_stops(json::parse(res->body).at("choices").at(0).at("text").get<std::string>(), stop);
  } catch (const json::exception& e) {
    throw LlmUnavailable(std::string("malformed completion response: ") + e.what());
  }
}

}  // namespace slic::llm
