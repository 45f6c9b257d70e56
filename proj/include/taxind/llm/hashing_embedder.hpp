#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "taxind/llm/gateway.hpp"

namespace taxind::llm {

/// Deterministic bag-of-words feature-hashing embedder. Stands in for a
/// sentence-embedding service in offline fixtures and tests.
class HashingEmbedder : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const std::string&) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  std::vector<double> embed_one(const std::string& text) const {
    std::vector<double> v(dimension_, 0.0);
    std::string token;
    auto flush = [&] {
      if (token.empty()) return;
      std::uint64_t h = fnv1a(token);
      v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
      token.clear();
    };
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        token += static_cast<char>(std::tolower(c));
      } else {
        flush();
      }
    }
    flush();
    // Keep the vector non-zero for texts without word characters.
    if (l2_norm(v) == 0.0) v[0] = 1.0;
    return v;
  }

 private:
  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  std::size_t dimension_;
};

}  // namespace taxind::llm
