#pragma once

#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vfscan/embedding.hpp"
#include "vfscan/errors.hpp"

namespace vfscan {

/// Client for an external encoder speaking the /info + /embed protocol.
/// Each request opens its own connection, so one instance can be shared by
/// several threads.
class RemoteBackend final : public EmbeddingBackend {
 public:
  struct Options {
    std::size_t batch_size = 32;
    std::size_t concurrency = 1;
    int timeout_seconds = 120;
  };

  explicit RemoteBackend(std::string url) : RemoteBackend(std::move(url), Options{}) {}
  RemoteBackend(std::string url, Options options) : url_(std::move(url)), options_(options) {
    require(options_.batch_size >= 1 && options_.concurrency >= 1, ErrorCode::InvalidArgument,
            "remote batch size and concurrency must be positive");
  }

  EmbedderInfo info() override {
    std::lock_guard lock(info_mutex_);
    if (cached_info_) return *cached_info_;
    auto client = make_client();
    auto res = client.Get("/info");
    if (!res) fail(ErrorCode::BackendUnavailable, "GET " + url_ + "/info: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorCode::BackendUnavailable, "GET /info returned HTTP " + std::to_string(res->status));
    try {
      const auto j = nlohmann::json::parse(res->body);
      EmbedderInfo info{j.at("dim").get<std::size_t>(), j.at("max_tokens").get<std::size_t>()};
      require(info.dim > 0 && info.max_tokens > 0, ErrorCode::BackendUnavailable, "/info reported a zero size");
      cached_info_ = info;
      return info;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BackendUnavailable, std::string("malformed /info response: ") + e.what());
    }
  }

  std::vector<EmbedVector> embed(std::span<const TextPair> pairs) override {
    const auto dim = info().dim;
    std::vector<EmbedVector> out(pairs.size());
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < pairs.size(); start += options_.batch_size)
      batches.emplace_back(start, std::min(pairs.size(), start + options_.batch_size));

    auto run_batch = [&](std::size_t b) {
      const auto [begin, end] = batches[b];
      auto vectors = post_batch(pairs.subspan(begin, end - begin), dim);
      for (std::size_t i = 0; i < vectors.size(); ++i) out[begin + i] = std::move(vectors[i]);
    };

    if (options_.concurrency <= 1 || batches.size() <= 1) {
      for (std::size_t b = 0; b < batches.size(); ++b) run_batch(b);
      return out;
    }
    // Batches are dispatched in waves; a failure in any of them aborts the call.
    for (std::size_t wave = 0; wave < batches.size(); wave += options_.concurrency) {
      std::vector<std::future<void>> running;
      for (std::size_t b = wave; b < std::min(batches.size(), wave + options_.concurrency); ++b)
        running.push_back(std::async(std::launch::async, run_batch, b));
      std::exception_ptr first_error;
      for (auto& f : running) {
        try {
          f.get();
        } catch (...) {
          if (!first_error) first_error = std::current_exception();
        }
      }
      if (first_error) std::rethrow_exception(first_error);
    }
    return out;
  }

  nlohmann::json identity() const override { return {{"kind", "remote"}, {"url", url_}}; }

  const std::string& url() const noexcept { return url_; }

 private:
  httplib::Client make_client() const {
    httplib::Client client(url_);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);
    return client;
  }

  std::vector<EmbedVector> post_batch(std::span<const TextPair> batch, std::size_t dim) const {
    nlohmann::json body = {{"pairs", nlohmann::json::array()}};
    for (const auto& p : batch) body["pairs"].push_back({{"nl", p.nl}, {"pl", p.pl}});
    auto client = make_client();
    auto res = client.Post("/embed", body.dump(), "application/json");
    if (!res) fail(ErrorCode::BackendUnavailable, "POST " + url_ + "/embed: " + httplib::to_string(res.error()));
    if (res->status != 200) fail(ErrorCode::BackendUnavailable, "POST /embed returned HTTP " + std::to_string(res->status));
    std::vector<EmbedVector> vectors;
    try {
      const auto j = nlohmann::json::parse(res->body);
      for (const auto& v : j.at("vectors")) vectors.push_back(v.get<EmbedVector>());
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BackendUnavailable, std::string("malformed /embed response: ") + e.what());
    }
    require(vectors.size() == batch.size(), ErrorCode::DimensionMismatch,
            "/embed returned " + std::to_string(vectors.size()) + " vectors for " + std::to_string(batch.size()) + " pairs");
    for (const auto& v : vectors)
      require(v.size() == dim, ErrorCode::DimensionMismatch,
              "/embed vector has dimension " + std::to_string(v.size()) + ", expected " + std::to_string(dim));
    return vectors;
  }

  std::string url_;
  Options options_;
  std::mutex info_mutex_;
  std::optional<EmbedderInfo> cached_info_;
};

}  // namespace vfscan
