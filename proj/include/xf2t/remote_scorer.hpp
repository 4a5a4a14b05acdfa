#pragma once

// HTTP client for an entailment scoring service.
//
//   POST {base}/score   {"premise": str, "hypothesis": str}
//   200                 {"entail_prob": number in [0, 1],
//                        "label": "entail" | "neutral" | "contradict"}

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

#include "httplib.h"
// <resolv.h>, pulled in by httplib, defines `_res` as a macro, which
// collides with identifiers inside Eigen headers included later.
#ifdef _res
#undef _res
#endif
#include "json.hpp"
#include "xf2t/aligner.hpp"

namespace xf2t::align {

/// The service answered, but not with a well-formed score.
class ProtocolError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

/// Validates a response body against the wire schema.
inline ScorerOutput parse_score_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("response is not a JSON object");
  auto prob = j.find("entail_prob");
  auto label = j.find("label");
  if (prob == j.end() || !prob->is_number()) throw ProtocolError("missing numeric entail_prob");
  if (label == j.end() || !label->is_string()) throw ProtocolError("missing string label");
  const double p = prob->get<double>();
  if (!(p >= 0.0 && p <= 1.0)) throw ProtocolError("entail_prob outside [0, 1]");
  auto l = parse_label(label->get<std::string>());
  if (!l) throw ProtocolError("unknown label \"" + label->get<std::string>() + "\"");
  return {p, *l};
}

inline std::string score_request_body(const std::string& premise, const std::string& hypothesis) {
  return nlohmann::json{{"premise", premise}, {"hypothesis", hypothesis}}.dump();
}

struct RemoteScorerOptions {
  std::chrono::milliseconds timeout{5000};
  /// Concurrent requests allowed across all callers; 0 means unlimited.
  size_t max_in_flight = 0;
};

/// Retries once on transport failure; caches results by (premise,
/// hypothesis). Thread-safe.
class RemoteScorer : public EntailmentScorer {
 public:
  /// `endpoint` is "http://host[:port][/base]"; requests go to base + "/score".
  explicit RemoteScorer(std::string endpoint, RemoteScorerOptions opts = {})
      : endpoint_(std::move(endpoint)), opts_(opts) {
    const std::string scheme = "http://";
    if (endpoint_.rfind(scheme, 0) != 0) {
      throw std::invalid_argument("remote scorer: endpoint must start with http://, got \"" +
                                  endpoint_ + "\"");
    }
    const size_t slash = endpoint_.find('/', scheme.size());
    host_ = slash == std::string::npos ? endpoint_ : endpoint_.substr(0, slash);
    std::string base = slash == std::string::npos ? "" : endpoint_.substr(slash);
    while (!base.empty() && base.back() == '/') base.pop_back();
    path_ = base + "/score";
    if (host_.size() == scheme.size()) throw std::invalid_argument("remote scorer: empty host");
  }

  const std::string& endpoint() const { return endpoint_; }

  ScorerOutput score(const std::string& premise, const std::string& hypothesis) const override {
    const auto key = std::make_pair(premise, hypothesis);
    {
      std::lock_guard lock(cache_mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    const ScorerOutput out = fetch(premise, hypothesis);
    std::lock_guard lock(cache_mu_);
    cache_.emplace(key, out);
    return out;
  }

  /// HTTP requests issued, including retries.
  size_t requests_sent() const { return requests_.load(); }

  size_t cache_size() const {
    std::lock_guard lock(cache_mu_);
    return cache_.size();
  }

 private:
  class Slot {
   public:
    explicit Slot(const RemoteScorer& s) : s_(s) {
      if (s_.opts_.max_in_flight == 0) return;
      std::unique_lock lock(s_.slot_mu_);
      s_.slot_cv_.wait(lock, [&] { return s_.in_flight_ < s_.opts_.max_in_flight; });
      ++s_.in_flight_;
    }
    ~Slot() {
      if (s_.opts_.max_in_flight == 0) return;
      {
        std::lock_guard lock(s_.slot_mu_);
        --s_.in_flight_;
      }
      s_.slot_cv_.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    const RemoteScorer& s_;
  };

  ScorerOutput fetch(const std::string& premise, const std::string& hypothesis) const {
    const std::string body = score_request_body(premise, hypothesis);
    Slot slot(*this);
    httplib::Client client(host_);
    const auto secs = std::chrono::duration_cast<std::chrono::microseconds>(opts_.timeout);
    client.set_connection_timeout(secs);
    client.set_read_timeout(secs);
    client.set_write_timeout(secs);
    httplib::Result res;
    for (int attempt = 0; attempt < 2; ++attempt) {
      ++requests_;
      res = client.Post(path_, body, "application/json");
      if (res) break;
    }
    if (!res) {
      throw ScorerError("scorer at " + endpoint_ + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw ScorerError("scorer at " + endpoint_ + " returned HTTP " + std::to_string(res->status));
    }
    try {
      return parse_score_response(res->body);
    } catch (const ProtocolError& e) {
      throw ProtocolError("scorer at " + endpoint_ + ": " + e.what());
    }
  }

  std::string endpoint_;
  std::string host_;
  std::string path_;
  RemoteScorerOptions opts_;
  mutable std::mutex cache_mu_;
  mutable std::map<std::pair<std::string, std::string>, ScorerOutput> cache_;
  mutable std::atomic<size_t> requests_{0};
  mutable std::mutex slot_mu_;
  mutable std::condition_variable slot_cv_;
  mutable size_t in_flight_ = 0;
};

}  // namespace xf2t::align
