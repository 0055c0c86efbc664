#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcav/error.hpp"
#include "tcav/io.hpp"
#include "tcav/rng.hpp"
#include "tcav/tensor.hpp"

// Synthetic concept-labeled time series. Each series draws, per concept, a
// change point, a presence flag delta and per-feature manifestation flags
// lambda; a concept that is present imprints a fixed-frequency sinusoid
// (numerical features) or a raised on-probability (binary features) on its
// manifesting features from the change point on, and drives the label from
// the same change point.

namespace tcav::synth {

struct PatternSpec {
  double amplitude = 1.0;
  double period = 10.0;  // timesteps per cycle, >= 2
};

struct ConceptSpec {
  std::string name;
  std::vector<double> feature_likelihoods;  // p(d|C) per feature
  double label_likelihood = 1.0;            // p(y|C)
  PatternSpec pattern;
  double binary_on_prob = 0.95;
};

enum class FeatureKind { kNumerical, kBinary };
enum class Scenario { kIndependent, kJointAnd, kJointOr };

struct ChangepointMode {
  bool fixed = false;
  std::size_t t = 0;  // used when fixed
};

struct SplitFractions {
  double train = 0.8, valid = 0.1, test = 0.1;
};

struct DatasetConfig {
  std::size_t n_series = 10000;
  std::size_t series_length = 100;
  std::size_t n_features = 10;
  std::vector<FeatureKind> feature_kinds;  // empty = all numerical
  std::vector<ConceptSpec> concepts;
  Scenario scenario = Scenario::kIndependent;
  double noise_std = 0.5;
  double concept_prevalence = 0.5;
  ChangepointMode changepoint;
  SplitFractions split;
  std::uint64_t seed = 0;

  std::size_t n_labels() const {
    return scenario == Scenario::kIndependent ? concepts.size() : 1;
  }

  FeatureKind kind(std::size_t d) const {
    return feature_kinds.empty() ? FeatureKind::kNumerical : feature_kinds[d];
  }

  void validate() const {
    require(series_length >= 2, "DatasetConfig: series_length must be >= 2");
    require(n_features >= 1, "DatasetConfig: n_features must be >= 1");
    require(!concepts.empty(), "DatasetConfig: at least one concept required");
    require(feature_kinds.empty() || feature_kinds.size() == n_features,
            "DatasetConfig: feature_kinds size mismatch");
    require(noise_std >= 0.0, "DatasetConfig: noise_std must be >= 0");
    require(concept_prevalence >= 0.0 && concept_prevalence <= 1.0,
            "DatasetConfig: concept_prevalence must be a probability");
    for (const auto& c : concepts) {
      require(c.feature_likelihoods.size() == n_features,
              "ConceptSpec '" + c.name + "': feature_likelihoods size mismatch");
      for (double p : c.feature_likelihoods)
        require(p >= 0.0 && p <= 1.0, "ConceptSpec '" + c.name + "': likelihood outside [0,1]");
      require(c.label_likelihood >= 0.0 && c.label_likelihood <= 1.0,
              "ConceptSpec '" + c.name + "': label_likelihood outside [0,1]");
      require(c.binary_on_prob >= 0.0 && c.binary_on_prob <= 1.0,
              "ConceptSpec '" + c.name + "': binary_on_prob outside [0,1]");
      require(c.pattern.period >= 2.0, "ConceptSpec '" + c.name + "': pattern period must be >= 2");
    }
    if (changepoint.fixed)
      require(changepoint.t + 1 < series_length,
              "DatasetConfig: fixed change point must be before the last timestep");
    const double total = split.train + split.valid + split.test;
    require(std::abs(total - 1.0) < 1e-9, "DatasetConfig: split fractions must sum to 1");
  }
};

struct LabeledSeries {
  num::Tensor x;  // [T, D]
  num::Tensor y;  // [T, K], values in {0, 1}
  std::vector<int> delta;                 // per concept
  std::vector<std::size_t> t_start;       // per concept
  std::vector<std::vector<int>> lambda;   // [concept][feature]
};

inline LabeledSeries sample_series(const DatasetConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t T = cfg.series_length, D = cfg.n_features, C = cfg.concepts.size();
  LabeledSeries s;
  s.x = num::Tensor({T, D});
  s.y = num::Tensor({T, cfg.n_labels()});
  s.delta.resize(C);
  s.t_start.resize(C);
  s.lambda.assign(C, std::vector<int>(D, 0));

  // Per-concept draws, in a fixed order so the stream is reproducible.
  std::vector<int> label_keep(C);
  for (std::size_t c = 0; c < C; ++c) {
    s.t_start[c] = cfg.changepoint.fixed ? cfg.changepoint.t : rng.uniform_int(T);
    s.delta[c] = rng.bernoulli(cfg.concept_prevalence) ? 1 : 0;
    label_keep[c] = rng.bernoulli(cfg.concepts[c].label_likelihood) ? 1 : 0;
    for (std::size_t d = 0; d < D; ++d)
      s.lambda[c][d] = rng.bernoulli(cfg.concepts[c].feature_likelihoods[d]) ? 1 : 0;
  }

  // Features. The pattern manifests only when the concept is present AND
  // the feature carries it (delta and lambda both set).
  for (std::size_t d = 0; d < D; ++d) {
    if (cfg.kind(d) == FeatureKind::kNumerical) {
      for (std::size_t t = 0; t < T; ++t) s.x(t, d) = rng.normal(0.0, cfg.noise_std);
      for (std::size_t c = 0; c < C; ++c) {
        if (!(s.delta[c] && s.lambda[c][d])) continue;
        const PatternSpec& p = cfg.concepts[c].pattern;
        for (std::size_t t = s.t_start[c]; t < T; ++t)
          s.x(t, d) += p.amplitude *
                       std::sin(2.0 * M_PI * static_cast<double>(t - s.t_start[c]) / p.period);
      }
    } else {
      for (std::size_t t = 0; t < T; ++t) {
        double on_prob = 0.5;
        for (std::size_t c = 0; c < C; ++c)
          if (s.delta[c] && s.lambda[c][d] && t >= s.t_start[c])
            on_prob = cfg.concepts[c].binary_on_prob;
        s.x(t, d) = rng.bernoulli(on_prob) ? 1.0 : 0.0;
      }
    }
  }

  // Labels: zero strictly before the governing change point; from it on, the
  // (possibly flipped) presence value. The flip is drawn once per series.
  if (cfg.scenario == Scenario::kIndependent) {
    for (std::size_t c = 0; c < C; ++c) {
      const int value = label_keep[c] ? s.delta[c] : 1 - s.delta[c];
      for (std::size_t t = s.t_start[c]; t < T; ++t) s.y(t, c) = value;
    }
  } else {
    int eff = cfg.scenario == Scenario::kJointAnd ? 1 : 0;
    for (std::size_t c = 0; c < C; ++c)
      eff = cfg.scenario == Scenario::kJointAnd ? (eff && s.delta[c]) : (eff || s.delta[c]);
    // AND: the label can only turn on once every concept has manifested;
    // OR: the first present concept triggers it.
    std::size_t onset = 0;
    if (cfg.scenario == Scenario::kJointAnd) {
      for (std::size_t c = 0; c < C; ++c) onset = std::max(onset, s.t_start[c]);
    } else {
      onset = T;
      for (std::size_t c = 0; c < C; ++c)
        if (s.delta[c]) onset = std::min(onset, s.t_start[c]);
      if (onset == T) {  // nothing present: earliest change point governs the flip window
        for (std::size_t c = 0; c < C; ++c) onset = std::min(onset, s.t_start[c]);
      }
    }
    const int value = label_keep[0] ? eff : 1 - eff;
    for (std::size_t t = onset; t < T; ++t) s.y(t, 0) = value;
  }
  return s;
}

struct Dataset {
  DatasetConfig config;
  std::vector<LabeledSeries> series;
  std::vector<std::size_t> train_idx, valid_idx, test_idx;
};

inline Dataset sample_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  require(cfg.n_series >= 3, "sample_dataset: need at least 3 series to split");
  Dataset ds;
  ds.config = cfg;
  ds.series.reserve(cfg.n_series);
  const Rng root(cfg.seed);
  for (std::size_t i = 0; i < cfg.n_series; ++i) {
    Rng series_rng = root.derive("series/" + std::to_string(i));
    ds.series.push_back(sample_series(cfg, series_rng));
  }

  std::vector<std::size_t> order(cfg.n_series);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng = root.derive("splits");
  split_rng.shuffle(order);
  std::size_t n_train = static_cast<std::size_t>(cfg.split.train * static_cast<double>(cfg.n_series));
  std::size_t n_valid = static_cast<std::size_t>(cfg.split.valid * static_cast<double>(cfg.n_series));
  n_train = std::max<std::size_t>(1, std::min(n_train, cfg.n_series - 2));
  n_valid = std::max<std::size_t>(1, std::min(n_valid, cfg.n_series - n_train - 1));
  ds.train_idx.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  ds.valid_idx.assign(order.begin() + static_cast<long>(n_train),
                      order.begin() + static_cast<long>(n_train + n_valid));
  ds.test_idx.assign(order.begin() + static_cast<long>(n_train + n_valid), order.end());
  return ds;
}

// Per-series offsets mapping each series' change point for one concept onto
// a common pivot: aligned_t = t + offset. Aligned slots that fall outside
// [0, T) carry no value and are skipped by aggregation.
struct AlignedIndex {
  std::size_t pivot = 0;
  std::vector<long> offsets;

  bool contains(std::size_t series_i, long aligned_t, std::size_t series_len) const {
    const long t = aligned_t - offsets[series_i];
    return t >= 0 && t < static_cast<long>(series_len);
  }
  long source_t(std::size_t series_i, long aligned_t) const {
    return aligned_t - offsets[series_i];
  }
};

inline AlignedIndex align_to_changepoint(const std::vector<const LabeledSeries*>& set,
                                         std::size_t concept_index, std::size_t pivot) {
  AlignedIndex out;
  out.pivot = pivot;
  out.offsets.reserve(set.size());
  for (const LabeledSeries* s : set) {
    require(s != nullptr, "align_to_changepoint: null series");
    require(concept_index < s->t_start.size(),
            "align_to_changepoint: concept index out of range");
    out.offsets.push_back(static_cast<long>(pivot) - static_cast<long>(s->t_start[concept_index]));
  }
  return out;
}

// --- serialization ---------------------------------------------------------
// Directory layout: meta.json (config, splits, per-series delta/t_start/lambda)
// plus data.bin holding, per series, the T*D feature block followed by the
// T*K label block, row-major little-endian 64-bit reals.

inline io::json config_to_json(const DatasetConfig& cfg) {
  io::json concepts = io::json::array();
  for (const auto& c : cfg.concepts) {
    concepts.push_back({{"name", c.name},
                        {"feature_likelihoods", c.feature_likelihoods},
                        {"label_likelihood", c.label_likelihood},
                        {"pattern", {{"amplitude", c.pattern.amplitude}, {"period", c.pattern.period}}},
                        {"binary_on_prob", c.binary_on_prob}});
  }
  std::vector<std::string> kinds;
  for (std::size_t d = 0; d < cfg.n_features; ++d)
    kinds.push_back(cfg.kind(d) == FeatureKind::kNumerical ? "numerical" : "binary");
  return io::json{
      {"n_series", cfg.n_series},
      {"series_length", cfg.series_length},
      {"n_features", cfg.n_features},
      {"feature_kinds", kinds},
      {"concepts", concepts},
      {"scenario", cfg.scenario == Scenario::kIndependent
                       ? "independent"
                       : (cfg.scenario == Scenario::kJointAnd ? "joint_and" : "joint_or")},
      {"noise_std", cfg.noise_std},
      {"concept_prevalence", cfg.concept_prevalence},
      {"changepoint", {{"mode", cfg.changepoint.fixed ? "fixed" : "uniform"}, {"t", cfg.changepoint.t}}},
      {"split", {{"train", cfg.split.train}, {"valid", cfg.split.valid}, {"test", cfg.split.test}}},
      {"seed", cfg.seed}};
}

inline DatasetConfig config_from_json(const io::json& j) {
  DatasetConfig cfg;
  cfg.n_series = j.at("n_series").get<std::size_t>();
  cfg.series_length = j.at("series_length").get<std::size_t>();
  cfg.n_features = j.at("n_features").get<std::size_t>();
  cfg.feature_kinds.clear();
  for (const auto& k : j.at("feature_kinds"))
    cfg.feature_kinds.push_back(k.get<std::string>() == "binary" ? FeatureKind::kBinary
                                                                 : FeatureKind::kNumerical);
  for (const auto& c : j.at("concepts")) {
    ConceptSpec spec;
    spec.name = c.at("name").get<std::string>();
    spec.feature_likelihoods = c.at("feature_likelihoods").get<std::vector<double>>();
    spec.label_likelihood = c.at("label_likelihood").get<double>();
    spec.pattern.amplitude = c.at("pattern").at("amplitude").get<double>();
    spec.pattern.period = c.at("pattern").at("period").get<double>();
    spec.binary_on_prob = c.at("binary_on_prob").get<double>();
    cfg.concepts.push_back(std::move(spec));
  }
  const std::string scen = j.at("scenario").get<std::string>();
  cfg.scenario = scen == "independent" ? Scenario::kIndependent
                                       : (scen == "joint_and" ? Scenario::kJointAnd : Scenario::kJointOr);
  cfg.noise_std = j.at("noise_std").get<double>();
  cfg.concept_prevalence = j.at("concept_prevalence").get<double>();
  cfg.changepoint.fixed = j.at("changepoint").at("mode").get<std::string>() == "fixed";
  cfg.changepoint.t = j.at("changepoint").at("t").get<std::size_t>();
  cfg.split.train = j.at("split").at("train").get<double>();
  cfg.split.valid = j.at("split").at("valid").get<double>();
  cfg.split.test = j.at("split").at("test").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  io::json series_meta = io::json::array();
  std::string bin;
  bin.reserve(ds.series.size() *
              (ds.config.series_length * (ds.config.n_features + ds.config.n_labels())) *
              sizeof(double));
  for (const auto& s : ds.series) {
    series_meta.push_back({{"delta", s.delta}, {"t_start", s.t_start}, {"lambda", s.lambda}});
    io::append_doubles(bin, s.x.data(), s.x.size());
    io::append_doubles(bin, s.y.data(), s.y.size());
  }
  io::json meta{{"format", "tcav-dataset"},
                {"version", 1},
                {"config", config_to_json(ds.config)},
                {"splits",
                 {{"train", ds.train_idx}, {"valid", ds.valid_idx}, {"test", ds.test_idx}}},
                {"series", series_meta}};
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "data.bin", bin);
  io::write_json_atomic(dir / "meta.json", meta);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const io::json meta = io::read_json(dir / "meta.json");
  require(meta.at("format") == "tcav-dataset", "load_dataset: not a dataset directory");
  Dataset ds;
  ds.config = config_from_json(meta.at("config"));
  ds.train_idx = meta.at("splits").at("train").get<std::vector<std::size_t>>();
  ds.valid_idx = meta.at("splits").at("valid").get<std::vector<std::size_t>>();
  ds.test_idx = meta.at("splits").at("test").get<std::vector<std::size_t>>();
  const std::string bin = io::read_file(dir / "data.bin");
  const std::size_t T = ds.config.series_length, D = ds.config.n_features,
                    K = ds.config.n_labels();
  std::size_t off = 0;
  for (const auto& sm : meta.at("series")) {
    LabeledSeries s;
    s.delta = sm.at("delta").get<std::vector<int>>();
    s.t_start = sm.at("t_start").get<std::vector<std::size_t>>();
    s.lambda = sm.at("lambda").get<std::vector<std::vector<int>>>();
    s.x = num::Tensor({T, D});
    s.y = num::Tensor({T, K});
    io::read_doubles(bin, off, s.x.data(), s.x.size());
    off += s.x.size() * sizeof(double);
    io::read_doubles(bin, off, s.y.data(), s.y.size());
    off += s.y.size() * sizeof(double);
    ds.series.push_back(std::move(s));
  }
  require(ds.series.size() == ds.config.n_series, "load_dataset: series count mismatch");
  return ds;
}

}  // namespace tcav::synth
