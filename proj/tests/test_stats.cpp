#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "tcav/logistic.hpp"
#include "tcav/rng.hpp"
#include "tcav/stats.hpp"

using tcav::Error;
using tcav::Rng;
using namespace tcav::stats;

namespace {

// O(n^2) pairwise-counting oracle: correctly ordered pairs count 1, ties 0.5.
double auroc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 0) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

// Rank-enumeration oracle for average precision: for each positive, its rank
// is found by explicit pair comparisons under the "descending score, then
// input order" rule, with no sorting machinery shared with the implementation.
double auprc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
  auto ranked_before = [&](std::size_t a, std::size_t b) {
    return s[a] > s[b] || (s[a] == s[b] && a < b);
  };
  double ap = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 0) continue;
    ++n_pos;
    std::size_t rank = 1, pos_at_or_before = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i || !ranked_before(j, i)) continue;
      ++rank;
      if (y[j] != 0) ++pos_at_or_before;
    }
    ap += static_cast<double>(pos_at_or_before) / static_cast<double>(rank);
  }
  return ap / static_cast<double>(n_pos);
}

}  // namespace

TEST_CASE("auroc worked example") {
  // positives {0.35, 0.8} vs negatives {0.1, 0.4}: 3 of 4 pairs ordered
  REQUIRE(auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75).margin(1e-15));
}

TEST_CASE("auroc extremes") {
  REQUIRE(auroc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  REQUIRE(auroc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  REQUIRE_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), Error);
}

TEST_CASE("auprc worked examples") {
  REQUIRE(auprc({0.9, 0.8, 0.7}, {0, 1, 0}) == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  REQUIRE(auprc({0.3, 0.6, 0.1}, {1, 1, 1}) == 1.0);
  REQUIRE_THROWS_AS(auprc({0.1, 0.2}, {0, 0}), Error);
}

TEST_CASE("balanced accuracy") {
  REQUIRE(balanced_accuracy({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == 1.0);
  REQUIRE(balanced_accuracy({0.7, 0.7, 0.7, 0.7}, {1, 1, 0, 0}) == 0.5);
  // sens 1.0, spec 0.5
  REQUIRE(balanced_accuracy({0.9, 0.8, 0.6, 0.2}, {1, 1, 0, 0}) == 0.75);
  REQUIRE_THROWS_AS(balanced_accuracy({0.1}, {0}), Error);
}

TEST_CASE("auroc/auprc match brute-force oracles on 1000 random instances") {
  Rng rng(99);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng.uniform_int(49);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      // draw from a small grid so ties occur often
      s[i] = static_cast<double>(rng.uniform_int(8)) / 8.0;
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
      (y[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos) y[rng.uniform_int(n)] = 1;
    if (!has_neg) y[rng.uniform_int(n)] = 0;
    std::size_t np = 0;
    for (int v : y) np += static_cast<std::size_t>(v);
    if (np == 0 || np == n) continue;
    REQUIRE(std::abs(auroc(s, y) - auroc_bruteforce(s, y)) <= 1e-12);
    REQUIRE(std::abs(auprc(s, y) - auprc_bruteforce(s, y)) <= 1e-12);
  }
}

TEST_CASE("auroc invariances") {
  Rng rng(123);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 5 + rng.uniform_int(30);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    std::vector<double> s_mono(n), s_neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      s_mono[i] = std::exp(2.0 * s[i]) + 3.0;
      s_neg[i] = -s[i];
    }
    const double a = auroc(s, y);
    REQUIRE(auroc(s_mono, y) == Catch::Approx(a).margin(1e-12));
    // tie-free scores: complement identity
    REQUIRE(a + auroc(s_neg, y) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("permutation p-value") {
  std::vector<double> nulls(1000);
  for (std::size_t i = 0; i < nulls.size(); ++i) nulls[i] = static_cast<double>(i) / 1000.0;
  REQUIRE(permutation_pvalue(2.0, nulls) == Catch::Approx(1.0 / 1001.0).margin(1e-15));
  REQUIRE(permutation_pvalue(0.5, nulls) == Catch::Approx(0.5).epsilon(0.01));
  REQUIRE(permutation_pvalue(-1.0, nulls) > 0.0);
  REQUIRE_THROWS_AS(permutation_pvalue(1.0, {}), Error);
}

TEST_CASE("bootstrap with a perfect fitter") {
  std::vector<int> labels = {1, 1, 1, 0, 0, 0};
  std::vector<int> groups = {0, 1, 2, 3, 4, 5};
  Rng rng(5);
  auto perfect = [&](const std::vector<std::size_t>&, const std::vector<std::size_t>& oob) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i : oob) {
      s.push_back(labels[i] != 0 ? 0.9 : 0.1);
      y.push_back(labels[i]);
    }
    return metric_report(s, y);
  };
  auto reports = bootstrap_eval(perfect, labels, groups, 1, true, rng);
  REQUIRE(reports.size() == 1);
  REQUIRE(reports[0].balanced_accuracy == 1.0);
  REQUIRE(reports[0].auroc == 1.0);
  REQUIRE(reports[0].auprc == 1.0);
}

TEST_CASE("stratified resampling keeps both classes in every fit set") {
  std::vector<int> labels, groups;
  for (int i = 0; i < 20; ++i) {
    labels.push_back(i < 8 ? 1 : 0);
    groups.push_back(i);
  }
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    Rng r = rng.derive("draw/" + std::to_string(rep));
    auto draw = draw_bootstrap(labels, groups, true, r);
    bool fit_pos = false, fit_neg = false, oob_pos = false, oob_neg = false;
    for (std::size_t i : draw.fit_idx) (labels[i] ? fit_pos : fit_neg) = true;
    for (std::size_t i : draw.oob_idx) (labels[i] ? oob_pos : oob_neg) = true;
    REQUIRE((fit_pos && fit_neg && oob_pos && oob_neg));
  }
}

TEST_CASE("grouped resampling keeps series together") {
  // 4 groups of 3 samples each
  std::vector<int> labels = {1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  std::vector<int> groups = {7, 7, 7, 8, 8, 8, 9, 9, 9, 4, 4, 4};
  Rng rng(31);
  auto draw = draw_bootstrap(labels, groups, true, rng);
  // every drawn group appears with all three members a multiple of 3 times
  for (int g : {7, 8, 9, 4}) {
    std::size_t fit_count = 0;
    for (std::size_t i : draw.fit_idx)
      if (groups[i] == g) ++fit_count;
    REQUIRE(fit_count % 3 == 0);
    std::size_t oob_count = 0;
    for (std::size_t i : draw.oob_idx)
      if (groups[i] == g) ++oob_count;
    REQUIRE((oob_count == 0 || oob_count == 3));
    REQUIRE((fit_count == 0) == (oob_count == 3));
  }
}

TEST_CASE("bootstrap of a logistic fitter on separable blobs") {
  Rng rng(41);
  const std::size_t n_per = 30, d = 4;
  tcav::num::Tensor x({2 * n_per, d});
  std::vector<int> labels(2 * n_per), groups(2 * n_per);
  for (std::size_t i = 0; i < 2 * n_per; ++i) {
    const double mu = i < n_per ? 2.0 : -2.0;
    labels[i] = i < n_per ? 1 : 0;
    groups[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = mu + 0.3 * rng.normal();
  }
  auto fit_score = [&](const std::vector<std::size_t>& fit_idx,
                       const std::vector<std::size_t>& oob_idx) {
    tcav::num::Tensor xf({fit_idx.size(), d});
    std::vector<int> yf(fit_idx.size());
    for (std::size_t r = 0; r < fit_idx.size(); ++r) {
      yf[r] = labels[fit_idx[r]];
      for (std::size_t j = 0; j < d; ++j) xf(r, j) = x(fit_idx[r], j);
    }
    auto model = fit_logistic(xf, yf);
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i : oob_idx) {
      s.push_back(logistic_score(model, x.data() + i * d));
      y.push_back(labels[i]);
    }
    return metric_report(s, y);
  };
  Rng boot_rng(77);
  auto reports = bootstrap_eval(fit_score, labels, groups, 100, true, boot_rng);
  double mean_bal = 0.0;
  for (const auto& r : reports) mean_bal += r.balanced_accuracy;
  mean_bal /= static_cast<double>(reports.size());
  REQUIRE(mean_bal > 0.95);
}

TEST_CASE("logistic fitter converges and separates") {
  Rng rng(53);
  tcav::num::Tensor x({40, 2});
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    y[i] = i < 20 ? 1 : 0;
    x(i, 0) = (y[i] ? 1.5 : -1.5) + 0.2 * rng.normal();
    x(i, 1) = 0.2 * rng.normal();
  }
  auto m = fit_logistic(x, y);
  REQUIRE(m.converged);
  REQUIRE(m.grad_norm < 1e-8);
  for (std::size_t i = 0; i < 40; ++i) {
    const double p = logistic_score(m, x.data() + i * 2);
    REQUIRE((p >= 0.5) == (y[i] == 1));
  }
}
