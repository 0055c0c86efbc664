#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "tcav/error.hpp"
#include "tcav/rng.hpp"

namespace tcav::stats {

struct MetricReport {
  double balanced_accuracy = 0.0;
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

namespace detail {

inline void count_classes(const std::vector<int>& labels, std::size_t& n_pos, std::size_t& n_neg) {
  n_pos = n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg)++;
}

}  // namespace detail

// Mann-Whitney AUROC with midranks for ties: P(s+ > s-) + 0.5 P(s+ = s-).
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "auroc: scores/labels size mismatch");
  std::size_t n_pos, n_neg;
  detail::count_classes(labels, n_pos, n_neg);
  require(n_pos > 0 && n_neg > 0, "auroc: undefined for single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] != 0) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Average precision over the ranking by descending score; tied scores keep
// input order.
inline double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), "auprc: scores/labels size mismatch");
  std::size_t n_pos, n_neg;
  detail::count_classes(labels, n_pos, n_neg);
  require(n_pos > 0, "auprc: undefined without positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  std::size_t cum_pos = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] != 0) {
      ++cum_pos;
      ap += static_cast<double>(cum_pos) / static_cast<double>(r + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

inline double balanced_accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                                double threshold = 0.5) {
  require(scores.size() == labels.size(), "balanced_accuracy: scores/labels size mismatch");
  std::size_t n_pos, n_neg;
  detail::count_classes(labels, n_pos, n_neg);
  require(n_pos > 0 && n_neg > 0, "balanced_accuracy: undefined for single-class labels");
  std::size_t tp = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] != 0 && pred) ++tp;
    if (labels[i] == 0 && !pred) ++tn;
  }
  const double sens = static_cast<double>(tp) / static_cast<double>(n_pos);
  const double spec = static_cast<double>(tn) / static_cast<double>(n_neg);
  return 0.5 * (sens + spec);
}

inline MetricReport metric_report(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  MetricReport r;
  detail::count_classes(labels, r.n_pos, r.n_neg);
  r.balanced_accuracy = balanced_accuracy(scores, labels);
  r.auroc = auroc(scores, labels);
  r.auprc = auprc(scores, labels);
  return r;
}

// One bootstrap resample over groups (a group = the resampling unit, e.g. a
// whole series; pass distinct ids for plain per-sample resampling). Fit
// indices carry multiplicity; out-of-bag indices come from undrawn groups.
struct BootstrapDraw {
  std::vector<std::size_t> fit_idx;
  std::vector<std::size_t> oob_idx;
};

inline BootstrapDraw draw_bootstrap(const std::vector<int>& labels,
                                    const std::vector<int>& groups, bool stratified, Rng& rng,
                                    int max_retries = 100) {
  require(labels.size() == groups.size(), "draw_bootstrap: labels/groups size mismatch");
  require(!labels.empty(), "draw_bootstrap: empty sample set");

  // distinct groups, each with a single class
  std::vector<int> group_ids;
  std::vector<int> group_label;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(group_ids.begin(), group_ids.end(), groups[i]);
    std::size_t gi;
    if (it == group_ids.end()) {
      gi = group_ids.size();
      group_ids.push_back(groups[i]);
      group_label.push_back(labels[i]);
      members.emplace_back();
    } else {
      gi = static_cast<std::size_t>(it - group_ids.begin());
      require(group_label[gi] == labels[i], "draw_bootstrap: group with mixed labels");
    }
    members[gi].push_back(i);
  }

  std::vector<std::size_t> pos_groups, neg_groups;
  for (std::size_t g = 0; g < group_ids.size(); ++g)
    (group_label[g] != 0 ? pos_groups : neg_groups).push_back(g);
  if (stratified)
    require(pos_groups.size() >= 2 && neg_groups.size() >= 2,
            "draw_bootstrap: stratified resampling needs at least 2 groups per class");

  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<std::size_t> counts(group_ids.size(), 0);
    auto draw_from = [&](const std::vector<std::size_t>& pool) {
      for (std::size_t d = 0; d < pool.size(); ++d)
        counts[pool[rng.uniform_int(pool.size())]]++;
    };
    if (stratified) {
      draw_from(pos_groups);
      draw_from(neg_groups);
    } else {
      std::vector<std::size_t> all(group_ids.size());
      std::iota(all.begin(), all.end(), 0);
      draw_from(all);
    }

    BootstrapDraw out;
    bool fit_pos = false, fit_neg = false, oob_pos = false, oob_neg = false;
    for (std::size_t g = 0; g < group_ids.size(); ++g) {
      if (counts[g] > 0) {
        (group_label[g] != 0 ? fit_pos : fit_neg) = true;
        for (std::size_t rep = 0; rep < counts[g]; ++rep)
          out.fit_idx.insert(out.fit_idx.end(), members[g].begin(), members[g].end());
      } else {
        (group_label[g] != 0 ? oob_pos : oob_neg) = true;
        out.oob_idx.insert(out.oob_idx.end(), members[g].begin(), members[g].end());
      }
    }
    if (fit_pos && fit_neg && oob_pos && oob_neg) return out;
  }
  throw Error("draw_bootstrap: retry bound exceeded (cannot produce two-class fit and out-of-bag sets)");
}

using FitScoreFn =
    std::function<MetricReport(const std::vector<std::size_t>& fit_idx,
                               const std::vector<std::size_t>& oob_idx)>;

// k rounds of fit-on-resample / score-on-out-of-bag.
inline std::vector<MetricReport> bootstrap_eval(const FitScoreFn& fit_and_score,
                                                const std::vector<int>& labels,
                                                const std::vector<int>& groups, std::size_t k,
                                                bool stratified, Rng& rng) {
  std::vector<MetricReport> reports;
  reports.reserve(k);
  for (std::size_t round = 0; round < k; ++round) {
    Rng round_rng = rng.derive("boot/" + std::to_string(round));
    BootstrapDraw draw = draw_bootstrap(labels, groups, stratified, round_rng);
    reports.push_back(fit_and_score(draw.fit_idx, draw.oob_idx));
  }
  return reports;
}

// Add-one smoothed permutation p-value; never returns 0.
inline double permutation_pvalue(double observed, const std::vector<double>& nulls) {
  require(!nulls.empty(), "permutation_pvalue: empty null distribution");
  std::size_t ge = 0;
  for (double v : nulls)
    if (v >= observed) ++ge;
  return static_cast<double>(1 + ge) / static_cast<double>(1 + nulls.size());
}

struct SignificanceResult {
  MetricReport observed;                    // means over bootstrap rounds
  std::vector<MetricReport> null_samples;   // k * perms_per_boot label-permuted fits
  double p_balanced_acc = 1.0;
  double p_auroc = 1.0;
  bool significant = false;
};

}  // namespace tcav::stats
