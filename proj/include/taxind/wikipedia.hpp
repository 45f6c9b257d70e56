#pragma once

#include <cctype>
#include <set>
#include <string>

#include "taxind/definitions.hpp"
#include "taxind/llm/http_backend.hpp"

namespace taxind {

/// Wikipedia REST summaries plus opensearch for the top hit.
class WikipediaClient : public EncyclopediaClient {
 public:
  explicit WikipediaClient(std::string base_url = "https://en.wikipedia.org", int timeout_s = 30)
      : base_(llm::split_base_url(base_url)), timeout_s_(timeout_s) {}

  std::optional<Article> summary(const std::string& title) override {
    auto client = llm::make_client(base_, timeout_s_);
    std::string page = title;
    for (auto& c : page) {
      if (c == ' ') c = '_';
    }
    auto res = client->Get(base_.path + "/api/rest_v1/page/summary/" + httplib::detail::encode_url(page));
    if (res && res->status == 404) return std::nullopt;
    llm::check_http_result(res, "encyclopedia summary");
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    Article a;
    a.title = j.value("title", title);
    a.extract = j.value("extract", "");
    a.disambiguation = j.value("type", "") == "disambiguation";
    return a;
  }

  /// Wikipedia titles are case-sensitive beyond the first letter, so this tries
  /// the common casings of the title.
  std::optional<Article> summary_ignore_case(const std::string& title) override {
    std::set<std::string> variants{ascii_lower(title), capitalize_words(title), capitalize_first(ascii_lower(title))};
    variants.erase(title);
    for (const auto& v : variants) {
      if (auto a = summary(v)) return a;
    }
    return std::nullopt;
  }

  std::optional<std::string> top_search_hit(const std::string& query) override {
    auto client = llm::make_client(base_, timeout_s_);
    auto res = client->Get(base_.path + "/w/api.php?action=opensearch&limit=1&namespace=0&format=json&search=" +
                           httplib::detail::encode_url(query));
    llm::check_http_result(res, "encyclopedia search");
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.is_array() || j.size() < 2 || !j[1].is_array() || j[1].empty()) {
      return std::nullopt;
    }
    return j[1][0].get<std::string>();
  }

 private:
  static std::string capitalize_first(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
  }

  static std::string capitalize_words(std::string s) {
    bool start = true;
    for (auto& c : s) {
      auto u = static_cast<unsigned char>(c);
      c = static_cast<char>(start ? std::toupper(u) : std::tolower(u));
      start = std::isspace(u) != 0;
    }
    return s;
  }

  llm::BaseUrl base_;
  int timeout_s_;
};

}  // namespace taxind
