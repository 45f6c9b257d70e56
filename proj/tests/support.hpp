#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

#include "taxind/llm/gateway.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(TAXIND_FIXTURE_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("taxind-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

/// Chat backend answering through a callback; counts calls.
class ScriptedChat : public taxind::llm::ChatBackend {
 public:
  using Fn = std::function<std::string(const taxind::llm::ChatRequest&, int call)>;
  explicit ScriptedChat(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const taxind::llm::ChatRequest& r) override { return fn_(r, calls_++); }
  int calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::atomic<int> calls_{0};
};

/// Embeds text as a fixed-dimension vector; optionally scaled to test
/// gateway-side normalization.
class ScriptedEmbedder : public taxind::llm::EmbeddingBackend {
 public:
  using Fn = std::function<std::vector<double>(const std::string&)>;
  explicit ScriptedEmbedder(Fn fn) : fn_(std::move(fn)) {}
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const std::string&) override {
    ++batches_;
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(fn_(t));
    return out;
  }
  int batches() const { return batches_.load(); }

 private:
  Fn fn_;
  std::atomic<int> batches_{0};
};

}  // namespace testing_support
