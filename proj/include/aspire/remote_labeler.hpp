#pragma once

// Report labeler that delegates to an HTTP endpoint. The request body is a
// plain-text prompt wrapping the report; the response must carry the label
// as <answer>0</answer> or <answer>1</answer>. Requires cpp-httplib.

#include <chrono>
#include <regex>
#include <string>
#include <string_view>

#include <httplib.h>

#include "aspire/core/errors.hpp"
#include "aspire/pipeline.hpp"

namespace aspire::pipeline {

inline std::string labeling_prompt(std::string_view report) {
  std::string p =
      "You are given a Chest X-Ray of a patient.\n"
      "Your job is to determine if the patient aspirated.\n"
      "Return an answer 0/1 within XML tags <answer></answer>.\n"
      "Return 1 if the patient aspirated and 0 if you think the patient did not aspirate.\n"
      "Do not provide any additional commentary.\n"
      "Here is the Chest X-Ray: <report>";
  p += report;
  p += "</report>.";
  return p;
}

/// Extracts the single 0/1 answer; anything else is a labeling error.
inline bool parse_answer(std::string_view body) {
  static const std::regex tag(R"(<answer>\s*([^<]*?)\s*</answer>)");
  const std::string text(body);
  auto it = std::sregex_iterator(text.begin(), text.end(), tag);
  if (it == std::sregex_iterator()) throw LabelingError("labeler response has no <answer> tag");
  const std::string value = (*it)[1].str();
  if (std::next(it) != std::sregex_iterator()) throw LabelingError("labeler response has several <answer> tags");
  if (value == "1") return true;
  if (value == "0") return false;
  throw LabelingError("labeler answer must be 0 or 1, got '" + value + "'");
}

class RemoteLabeler final : public ReportLabeler {
 public:
  /// `base_url` like "http://host:8080"; `path` is the POST target.
  RemoteLabeler(std::string base_url, std::string path = "/label",
                std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)), path_(std::move(path)), timeout_(timeout) {}

  bool label(std::string_view text) const override {
    httplib::Client client(base_url_);
    if (!client.is_valid()) throw ConfigError("pipeline.labeler_url", "invalid labeler URL '" + base_url_ + "'");
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    const auto res = client.Post(path_, labeling_prompt(text), "text/plain");
    if (!res) throw LabelingError("labeler request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw LabelingError("labeler returned HTTP " + std::to_string(res->status));
    return parse_answer(res->body);
  }

 private:
  std::string base_url_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

}  // namespace aspire::pipeline
