#pragma once

// Tabular autoregressive softmax policy. Conditioning on the prefix is
// collapsed to (query, position): pi(y_t | x, y_<t) = softmax(theta[x][t])[y_t].
// Symbol 0 ends a sequence; sequences also end at max_length.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dvao {

inline constexpr std::size_t kStopSymbol = 0;

/// Deterministic 64-bit seed from a master seed and two stream coordinates.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

class PolicyTable {
 public:
  PolicyTable(std::size_t num_queries, std::size_t max_length, std::size_t vocab_size,
              double init_logit = 0.0)
      : num_queries_(num_queries), max_length_(max_length), vocab_size_(vocab_size),
        logits_(num_queries * max_length * vocab_size, init_logit) {
    if (num_queries == 0) throw std::invalid_argument("policy needs at least one query");
    if (max_length == 0) throw std::invalid_argument("max_length must be positive");
    if (vocab_size < 2) throw std::invalid_argument("vocab_size must be at least 2");
  }

  std::size_t num_queries() const noexcept { return num_queries_; }
  std::size_t max_length() const noexcept { return max_length_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t num_parameters() const noexcept { return logits_.size(); }

  std::size_t index(std::size_t query, std::size_t position, std::size_t symbol) const {
    return (query * max_length_ + position) * vocab_size_ + symbol;
  }

  double& logit(std::size_t query, std::size_t position, std::size_t symbol) {
    return logits_[index(query, position, symbol)];
  }
  double logit(std::size_t query, std::size_t position, std::size_t symbol) const {
    return logits_[index(query, position, symbol)];
  }

  std::span<double> logits() noexcept { return logits_; }
  std::span<const double> logits() const noexcept { return logits_; }

  /// softmax(theta[query][position]).
  std::vector<double> distribution(std::size_t query, std::size_t position) const {
    const auto row = row_span(query, position);
    const double mx = *std::max_element(row.begin(), row.end());
    std::vector<double> p(row.size());
    double z = 0.0;
    for (std::size_t v = 0; v < row.size(); ++v) {
      p[v] = std::exp(row[v] - mx);
      z += p[v];
    }
    for (double& x : p) x /= z;
    return p;
  }

  double log_prob(std::size_t query, std::size_t position, std::size_t symbol) const {
    const auto row = row_span(query, position);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double l : row) z += std::exp(l - mx);
    return row[symbol] - mx - std::log(z);
  }

  bool all_finite() const {
    return std::all_of(logits_.begin(), logits_.end(), [](double x) { return std::isfinite(x); });
  }

  bool operator==(const PolicyTable&) const = default;

 private:
  std::span<const double> row_span(std::size_t query, std::size_t position) const {
    if (query >= num_queries_ || position >= max_length_) {
      throw std::out_of_range("policy row (" + std::to_string(query) + ", " +
                              std::to_string(position) + ") out of range");
    }
    return {logits_.data() + index(query, position, 0), vocab_size_};
  }

  std::size_t num_queries_;
  std::size_t max_length_;
  std::size_t vocab_size_;
  std::vector<double> logits_;
};

/// Calls visit(tokens, probability) for every complete sequence the policy
/// can emit for `query`. There are at most vocab_size^max_length of them.
inline void enumerate_sequences(
    const PolicyTable& policy, std::size_t query,
    const std::function<void(std::span<const std::size_t>, double)>& visit) {
  std::vector<std::vector<double>> dists;
  for (std::size_t t = 0; t < policy.max_length(); ++t) dists.push_back(policy.distribution(query, t));
  std::vector<std::size_t> prefix;
  std::function<void(double)> recurse = [&](double prob) {
    const std::size_t t = prefix.size();
    for (std::size_t v = 0; v < policy.vocab_size(); ++v) {
      const double p = prob * dists[t][v];
      prefix.push_back(v);
      if (v == kStopSymbol || t + 1 == policy.max_length()) {
        visit(prefix, p);
      } else {
        recurse(p);
      }
      prefix.pop_back();
    }
  };
  recurse(1.0);
}

}  // namespace dvao
