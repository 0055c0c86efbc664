#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <vector>

#include "tcav/rng.hpp"
#include "tcav/synthgen.hpp"

using tcav::Error;
using tcav::Rng;
using namespace tcav::synth;

namespace {

DatasetConfig paper_config(std::size_t n_series = 100, std::uint64_t seed = 1) {
  DatasetConfig cfg;
  cfg.n_series = n_series;
  cfg.series_length = 100;
  cfg.n_features = 10;
  cfg.noise_std = 0.5;
  cfg.seed = seed;
  ConceptSpec c1, c2;
  c1.name = "C1";
  c2.name = "C2";
  c1.feature_likelihoods.assign(10, 0.0);
  c2.feature_likelihoods.assign(10, 0.0);
  for (int d = 0; d < 5; ++d) c1.feature_likelihoods[d] = 1.0;
  for (int d = 5; d < 10; ++d) c2.feature_likelihoods[d] = 1.0;
  cfg.concepts = {c1, c2};
  return cfg;
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
double ks_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) ++i;
    else ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  const double ne = static_cast<double>(a.size()) * b.size() / (a.size() + b.size());
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k)
    p += 2.0 * (k % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("config validation") {
  DatasetConfig cfg = paper_config();
  SECTION("bad likelihood") {
    cfg.concepts[0].feature_likelihoods[0] = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), Error);
  }
  SECTION("bad period") {
    cfg.concepts[0].pattern.period = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), Error);
  }
  SECTION("fixed changepoint out of range") {
    cfg.changepoint = {true, 99};
    REQUIRE_THROWS_AS(cfg.validate(), Error);
  }
  SECTION("too few series to split") {
    cfg.n_series = 2;
    REQUIRE_THROWS_AS(sample_dataset(cfg), Error);
  }
}

TEST_CASE("zero feature likelihood decouples features from the concept") {
  DatasetConfig cfg = paper_config(20);
  for (auto& c : cfg.concepts) c.feature_likelihoods.assign(10, 0.0);
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Rng r = rng.derive("s/" + std::to_string(rep));
    LabeledSeries s = sample_series(cfg, r);
    for (const auto& lam : s.lambda)
      for (int v : lam) REQUIRE(v == 0);
    // labels still follow delta after the change point (p(y|C)=1)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = s.t_start[c]; t < 100; ++t) REQUIRE(s.y(t, c) == s.delta[c]);
  }
}

TEST_CASE("same seed gives bit-identical series") {
  DatasetConfig cfg = paper_config(10);
  Rng a(42), b(42);
  LabeledSeries s1 = sample_series(cfg, a);
  LabeledSeries s2 = sample_series(cfg, b);
  REQUIRE(s1.delta == s2.delta);
  REQUIRE(s1.t_start == s2.t_start);
  for (std::size_t i = 0; i < s1.x.size(); ++i) REQUIRE(s1.x[i] == s2.x[i]);
  for (std::size_t i = 0; i < s1.y.size(); ++i) REQUIRE(s1.y[i] == s2.y[i]);
}

TEST_CASE("splits partition the dataset") {
  DatasetConfig cfg = paper_config(10);
  Dataset ds = sample_dataset(cfg);
  REQUIRE(ds.series.size() == 10);
  std::vector<std::size_t> all;
  all.insert(all.end(), ds.train_idx.begin(), ds.train_idx.end());
  all.insert(all.end(), ds.valid_idx.begin(), ds.valid_idx.end());
  all.insert(all.end(), ds.test_idx.begin(), ds.test_idx.end());
  REQUIRE(all.size() == 10);
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) REQUIRE(all[i] == i);
}

TEST_CASE("delta prevalence and label causality over a large sample") {
  DatasetConfig cfg = paper_config(10000, 7);
  Dataset ds = sample_dataset(cfg);
  REQUIRE(ds.train_idx.size() == 8000);
  REQUIRE(ds.valid_idx.size() == 1000);
  REQUIRE(ds.test_idx.size() == 1000);
  double mean_delta = 0.0;
  for (const auto& s : ds.series) {
    mean_delta += 0.5 * (s.delta[0] + s.delta[1]);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < s.t_start[c]; ++t) REQUIRE(s.y(t, c) == 0.0);
  }
  mean_delta /= 10000.0;
  REQUIRE(mean_delta == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("pre-changepoint linked features are indistinguishable from noise") {
  DatasetConfig cfg = paper_config(900, 11);
  Dataset ds = sample_dataset(cfg);
  std::vector<double> linked, nonlinked;
  for (const auto& s : ds.series) {
    // C1 present (feature 0 will carry its pattern later), C2 absent so
    // feature 9 is pure noise at every timestep.
    if (!s.delta[0] || s.delta[1]) continue;
    for (std::size_t t = 0; t < s.t_start[0] && linked.size() < 10000; ++t) {
      linked.push_back(s.x(t, 0));
      nonlinked.push_back(s.x(t, 9));
    }
  }
  REQUIRE(linked.size() == 10000);
  REQUIRE(ks_pvalue(linked, nonlinked) > 0.01);
}

TEST_CASE("post-changepoint power spectrum peaks at the pattern frequency") {
  DatasetConfig cfg = paper_config(30, 13);
  cfg.series_length = 120;
  cfg.changepoint = {true, 20};
  Dataset ds = sample_dataset(cfg);
  const std::size_t len = 100;  // window [20, 120)
  for (const auto& s : ds.series) {
    if (!(s.delta[0] && s.lambda[0][0])) continue;
    std::vector<double> power(len / 2 + 1, 0.0);
    for (std::size_t k = 1; k <= len / 2; ++k) {
      std::complex<double> acc(0, 0);
      for (std::size_t t = 0; t < len; ++t) {
        const double v = s.x(20 + t, 0);
        acc += v * std::exp(std::complex<double>(0, -2.0 * M_PI * k * t / len));
      }
      power[k] = std::norm(acc);
    }
    const std::size_t peak =
        std::max_element(power.begin() + 1, power.end()) - power.begin();
    REQUIRE(peak == len / 10);  // frequency 1/period with period 10
  }
}

TEST_CASE("binary features flip to the on-probability after the change point") {
  DatasetConfig cfg = paper_config(400, 17);
  cfg.feature_kinds.assign(10, FeatureKind::kNumerical);
  cfg.feature_kinds[0] = FeatureKind::kBinary;
  cfg.changepoint = {true, 50};
  Dataset ds = sample_dataset(cfg);
  double pre_on = 0.0, post_on = 0.0;
  std::size_t pre_n = 0, post_n = 0;
  for (const auto& s : ds.series) {
    if (!(s.delta[0] && s.lambda[0][0])) continue;
    for (std::size_t t = 0; t < 50; ++t, ++pre_n) pre_on += s.x(t, 0);
    for (std::size_t t = 50; t < 100; ++t, ++post_n) post_on += s.x(t, 0);
  }
  REQUIRE(pre_on / pre_n == Catch::Approx(0.5).margin(0.03));
  REQUIRE(post_on / post_n == Catch::Approx(0.95).margin(0.03));
}

TEST_CASE("joint scenarios combine presence flags") {
  DatasetConfig cfg = paper_config(200, 19);
  SECTION("AND: label on only when all concepts present, from the last change point") {
    cfg.scenario = Scenario::kJointAnd;
    Dataset ds = sample_dataset(cfg);
    for (const auto& s : ds.series) {
      REQUIRE(s.y.cols() == 1);
      const int eff = s.delta[0] && s.delta[1];
      const std::size_t onset = std::max(s.t_start[0], s.t_start[1]);
      for (std::size_t t = 0; t < 100; ++t)
        REQUIRE(s.y(t, 0) == (t >= onset ? eff : 0));
    }
  }
  SECTION("OR: first present concept triggers the label") {
    cfg.scenario = Scenario::kJointOr;
    Dataset ds = sample_dataset(cfg);
    for (const auto& s : ds.series) {
      const int eff = s.delta[0] || s.delta[1];
      if (!eff) {
        for (std::size_t t = 0; t < 100; ++t) REQUIRE(s.y(t, 0) == 0.0);
        continue;
      }
      std::size_t onset = 100;
      for (std::size_t c = 0; c < 2; ++c)
        if (s.delta[c]) onset = std::min(onset, s.t_start[c]);
      for (std::size_t t = 0; t < 100; ++t)
        REQUIRE(s.y(t, 0) == (t >= onset ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("alignment offsets") {
  DatasetConfig cfg = paper_config(3, 23);
  Dataset ds = sample_dataset(cfg);
  ds.series[0].t_start[0] = 50;
  ds.series[1].t_start[0] = 30;
  std::vector<const LabeledSeries*> set{&ds.series[0], &ds.series[1]};
  AlignedIndex idx = align_to_changepoint(set, 0, 50);
  REQUIRE(idx.offsets[0] == 0);
  REQUIRE(idx.offsets[1] == 20);
  // the first 20 aligned slots of series 1 have no source timestep
  for (long a = 0; a < 20; ++a) REQUIRE(!idx.contains(1, a, 100));
  REQUIRE(idx.contains(1, 20, 100));
  REQUIRE(idx.source_t(1, 20) == 0);
  REQUIRE_THROWS_AS(align_to_changepoint(set, 5, 50), Error);
}

TEST_CASE("aligned mean pattern onset sits at the pivot") {
  DatasetConfig cfg = paper_config(100, 29);
  Dataset ds = sample_dataset(cfg);
  std::vector<const LabeledSeries*> present;
  for (const auto& s : ds.series)
    if (s.delta[0]) present.push_back(&s);
  REQUIRE(present.size() >= 30);
  AlignedIndex idx = align_to_changepoint(present, 0, 50);
  auto aligned_mean = [&](long a) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < present.size(); ++i) {
      if (!idx.contains(i, a, 100)) continue;
      sum += present[i]->x(static_cast<std::size_t>(idx.source_t(i, a)), 0);
      ++n;
    }
    return sum / static_cast<double>(n);
  };
  for (long a = 44; a < 50; ++a) REQUIRE(std::abs(aligned_mean(a)) < 0.25);
  // two steps past the pivot the sinusoid is near its crest: sin(2*pi*2/10)
  REQUIRE(aligned_mean(52) == Catch::Approx(std::sin(2 * M_PI * 2 / 10.0)).margin(0.25));
}

TEST_CASE("dataset serialization round-trips") {
  DatasetConfig cfg = paper_config(8, 31);
  cfg.feature_kinds.assign(10, FeatureKind::kNumerical);
  cfg.feature_kinds[3] = FeatureKind::kBinary;
  Dataset ds = sample_dataset(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "tcav_test_dataset";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  Dataset back = load_dataset(dir);
  REQUIRE(back.series.size() == ds.series.size());
  REQUIRE(back.train_idx == ds.train_idx);
  REQUIRE(back.valid_idx == ds.valid_idx);
  REQUIRE(back.test_idx == ds.test_idx);
  REQUIRE(back.config.feature_kinds == ds.config.feature_kinds);
  for (std::size_t i = 0; i < ds.series.size(); ++i) {
    REQUIRE(back.series[i].delta == ds.series[i].delta);
    REQUIRE(back.series[i].t_start == ds.series[i].t_start);
    REQUIRE(back.series[i].lambda == ds.series[i].lambda);
    for (std::size_t j = 0; j < ds.series[i].x.size(); ++j)
      REQUIRE(back.series[i].x[j] == ds.series[i].x[j]);
    for (std::size_t j = 0; j < ds.series[i].y.size(); ++j)
      REQUIRE(back.series[i].y[j] == ds.series[i].y[j]);
  }
  std::filesystem::remove_all(dir);
}
