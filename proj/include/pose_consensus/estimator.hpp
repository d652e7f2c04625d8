#pragma once

// Black-box pose estimators and the persistent result cache in front of
// them. A backend turns an EstimatorRequest into one protocol result line;
// estimate() ingests that line into a RelativePose.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <sys/stat.h>
#include <unistd.h>
#include <unordered_map>

#include "pose_consensus/digest.hpp"
#include "pose_consensus/error.hpp"
#include "pose_consensus/protocol.hpp"

namespace pose_consensus {

class EstimatorBackend {
 public:
  virtual ~EstimatorBackend() = default;

  virtual std::string id() const = 0;
  virtual std::string version() const = 0;

  // One backend invocation. Returns the result line verbatim.
  std::string call(const EstimatorRequest& req) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_call(req);
  }

  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::string do_call(const EstimatorRequest& req) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

// In-process backend answering every request with the identity pose.
class EchoBackend final : public EstimatorBackend {
 public:
  std::string id() const override { return "echo"; }
  std::string version() const override { return "1"; }

 protected:
  std::string do_call(const EstimatorRequest& req) override {
    EstimatorResponse resp;
    resp.request_id = req.request_id;
    resp.status = ResponseStatus::ok;
    return serialize_response(resp);
  }
};

struct Estimate {
  EstimatorResponse response;
  std::optional<RelativePose> pose;  // engaged iff the response is ok
  std::string line;                  // wire form, as stored in the cache
  bool from_cache = false;
};

inline Estimate estimate(EstimatorBackend& backend, const EstimatorRequest& req) {
  if (req.frames.size() < 2) throw Error("estimator request needs at least two frames");
  std::string line = backend.call(req);
  auto ingested = ingest_response(line, req.request_id);
  return {std::move(ingested.response), std::move(ingested.pose), std::move(line), false};
}

// Content digest of one frame reference: the file's bytes when it names a
// readable regular file, otherwise the reference text itself (virtual
// frames used by the synthetic backend).
inline std::string frame_digest(const std::string& ref) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(ref, ec)) return sha256_file(ref);
  return sha256_hex("ref:" + ref);
}

// One file per key under `root`, named by the hex key and holding the
// response line verbatim. Inserts go through a temp file and rename, so
// concurrent readers never observe partial entries.
class ResultCache {
 public:
  explicit ResultCache(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw IoError("cannot create cache directory " + root_.string() + ": " + ec.message());
  }

  const std::filesystem::path& root() const { return root_; }

  // Key over backend identity and the ordered frame contents.
  std::string key(const EstimatorBackend& backend, const EstimatorRequest& req) {
    Sha256 h;
    h.update("pose-consensus-cache-v1\n");
    h.update(backend.id()).update("\n").update(backend.version()).update("\n");
    for (const auto& f : req.frames) h.update(digest_of(f)).update("\n");
    return h.hex();
  }

  std::optional<std::string> lookup(const std::string& key) const {
    std::ifstream in(root_ / key, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void store(const std::string& key, const std::string& line) {
    static std::atomic<unsigned> counter{0};
    const auto tmp = root_ / (key + ".tmp." + std::to_string(::getpid()) + "." +
                              std::to_string(counter.fetch_add(1)));
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write cache entry " + tmp.string());
      out << line;
      if (!out.flush()) throw IoError("cannot write cache entry " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, root_ / key, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw IoError("cannot publish cache entry " + key);
    }
  }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  void record_hit() { hits_.fetch_add(1); }
  void record_miss() { misses_.fetch_add(1); }

 private:
  std::string digest_of(const std::string& ref) {
    {
      std::lock_guard lock(mu_);
      if (auto it = digests_.find(ref); it != digests_.end()) return it->second;
    }
    std::string d = frame_digest(ref);
    std::lock_guard lock(mu_);
    return digests_.emplace(ref, std::move(d)).first->second;
  }

  std::filesystem::path root_;
  std::mutex mu_;
  std::unordered_map<std::string, std::string> digests_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// Serves `req` from the cache when possible. A corrupt entry is reported on
// stderr, ignored and overwritten with a fresh backend result. Malformed
// backend output is never stored.
inline Estimate cached_estimate(ResultCache& cache, EstimatorBackend& backend, const EstimatorRequest& req) {
  const std::string key = cache.key(backend, req);
  if (auto line = cache.lookup(key)) {
    try {
      auto ingested = ingest_response(*line);
      ingested.response.request_id = req.request_id;
      cache.record_hit();
      return {std::move(ingested.response), std::move(ingested.pose), std::move(*line), true};
    } catch (const MalformedResponse& e) {
      std::cerr << "warning: ignoring corrupt cache entry " << key << ": " << e.what() << "\n";
    }
  }
  cache.record_miss();
  Estimate fresh = estimate(backend, req);
  cache.store(key, fresh.line);
  return fresh;
}

}  // namespace pose_consensus
