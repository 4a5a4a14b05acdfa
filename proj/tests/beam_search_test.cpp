#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "xf2t/beam_search.hpp"

namespace xf2t {
namespace {

constexpr int32_t kEos = 2;

using Table = std::map<std::vector<int32_t>, std::vector<double>>;

/// Step function reading next-token log-probabilities from a table keyed by
/// prefix.
auto table_step(const Table& t) {
  return [&t](const std::vector<std::vector<int32_t>>& prefixes) {
    std::vector<std::vector<double>> out;
    for (const auto& p : prefixes) out.push_back(t.at(p));
    return out;
  };
}

std::vector<double> logs(std::vector<double> probs) {
  for (auto& p : probs) p = std::log(p);
  return probs;
}

/// Every sequence the search could return: EOS-terminated ones of length
/// <= max_len and unterminated ones of exactly max_len.
std::vector<Hypothesis> enumerate(const Table& t, size_t max_len, double exponent) {
  std::vector<Hypothesis> out;
  std::function<void(std::vector<int32_t>, double)> rec = [&](std::vector<int32_t> prefix, double lp) {
    if (prefix.size() == max_len) {
      out.push_back({prefix, lp, normalized_score(lp, prefix.size(), exponent), false});
      return;
    }
    const auto& row = t.at(prefix);
    for (size_t v = 0; v < row.size(); ++v) {
      auto next = prefix;
      next.push_back(static_cast<int32_t>(v));
      const double l = lp + row[v];
      if (static_cast<int32_t>(v) == kEos) {
        out.push_back({next, l, normalized_score(l, next.size(), exponent), true});
      } else {
        rec(next, l);
      }
    }
  };
  rec({}, 0.0);
  std::sort(out.begin(), out.end(), hypothesis_before);
  return out;
}

// Greedy picks token 0 (p=.5) and then lands on a flat continuation; token 1
// (p=.4) leads to an almost certain continuation with higher joint mass.
Table trap_table() {
  return {{{}, logs({0.5, 0.4, 0.1})},
          {{0}, logs({0.34, 0.33, 0.33})},
          {{1}, logs({0.05, 0.9, 0.05})}};
}

TEST(BeamSearch, ExhaustiveWidthMatchesEnumeration) {
  const Table t = trap_table();
  for (double exponent : {0.0, 1.0}) {
    const BeamOptions opts{.width = 9, .max_len = 2, .length_norm_exponent = exponent};
    const auto got = beam_search(table_step(t), kEos, opts);
    const auto want = enumerate(t, 2, exponent);
    ASSERT_EQ(got.size(), want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].tokens, want[i].tokens) << i;
      EXPECT_NEAR(got[i].log_prob, want[i].log_prob, 1e-12);
      EXPECT_NEAR(got[i].score, want[i].score, 1e-12);
      EXPECT_EQ(got[i].finished, want[i].finished);
    }
  }
}

TEST(BeamSearch, WidthTwoEscapesGreedyTrap) {
  const Table t = trap_table();
  const auto greedy = greedy_search(table_step(t), kEos, 2);
  EXPECT_EQ(greedy, (std::vector<int32_t>{0, 0}));
  const auto beam = beam_search(table_step(t), kEos, {.width = 2, .max_len = 2, .length_norm_exponent = 1.0});
  EXPECT_EQ(beam.front().tokens, (std::vector<int32_t>{1, 1}));
  EXPECT_NEAR(beam.front().log_prob, std::log(0.4 * 0.9), 1e-12);
  const auto best = enumerate(t, 2, 1.0).front();
  EXPECT_EQ(beam.front().tokens, best.tokens);
}

TEST(BeamSearch, WidthOneEqualsGreedyOnRandomTables) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Table t;
    std::function<void(std::vector<int32_t>)> fill = [&](std::vector<int32_t> p) {
      std::vector<double> probs(4);
      double s = 0;
      for (auto& x : probs) s += (x = u(rng));
      for (auto& x : probs) x /= s;
      t[p] = logs(probs);
      if (p.size() == 3) return;
      for (int32_t v = 0; v < 4; ++v) {
        if (v == kEos) continue;
        auto q = p;
        q.push_back(v);
        fill(q);
      }
    };
    fill({});
    const auto g = greedy_search(table_step(t), kEos, 4);
    const auto b = beam_search(table_step(t), kEos, {.width = 1, .max_len = 4, .length_norm_exponent = 0.0});
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b.front().tokens, g) << trial;
    // Exhaustive width finds the enumerated optimum.
    const auto full = beam_search(table_step(t), kEos, {.width = 1000, .max_len = 4, .length_norm_exponent = 1.0});
    const auto want = enumerate(t, 4, 1.0);
    EXPECT_EQ(full.front().tokens, want.front().tokens) << trial;
    EXPECT_EQ(full.size(), want.size());
  }
}

TEST(BeamSearch, MaskedTokensAreNeverChosen) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const Table t = {{{}, {ninf, 0.0, ninf}}, {{1}, {ninf, ninf, 0.0}}};
  const auto r = beam_search(table_step(t), kEos, {.width = 4, .max_len = 5, .length_norm_exponent = 1.0});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.front().tokens, (std::vector<int32_t>{1, kEos}));
  EXPECT_TRUE(r.front().finished);
}

TEST(BeamSearch, RankingTieBreaks) {
  const Hypothesis a{{1, 2}, -1.0, -0.5, true};
  const Hypothesis b{{1}, -0.5, -0.5, true};
  const Hypothesis c{{0, 2}, -1.0, -0.5, true};
  EXPECT_TRUE(hypothesis_before(b, a));
  EXPECT_TRUE(hypothesis_before(c, a));
  EXPECT_FALSE(hypothesis_before(a, a));
  EXPECT_DOUBLE_EQ(normalized_score(-6.0, 3, 1.0), -2.0);
  EXPECT_DOUBLE_EQ(normalized_score(-6.0, 3, 0.0), -6.0);
}

TEST(BeamSearch, Errors) {
  const Table t = trap_table();
  EXPECT_THROW(beam_search(table_step(t), kEos, {.width = 0}), std::invalid_argument);
  EXPECT_THROW(beam_search(table_step(t), kEos, {.width = 1, .max_len = 0}), std::invalid_argument);
  auto bad = [](const std::vector<std::vector<int32_t>>&) { return std::vector<std::vector<double>>{}; };
  EXPECT_THROW(beam_search(bad, kEos, {}), std::logic_error);
}

}  // namespace
}  // namespace xf2t
