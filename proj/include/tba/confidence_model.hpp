#pragma once

// Logistic confidence head over five hand-picked query features, trained
// with mini-batch SGD on binary cross-entropy against assignment labels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tba/errors.hpp"
#include "tba/rng.hpp"
#include "tba/world.hpp"

namespace tba {

inline constexpr std::size_t kNumFeatures = 5;
using FeatureVector = std::array<double, kNumFeatures>;

inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames{
    "is_track_query", "age_normalized", "dist_to_nearest_gt_normalized", "same_gt_track_query_present",
    "evidence_strength"};

struct ConfidenceModel {
  FeatureVector weights{};
  double bias = 0.0;

  friend bool operator==(const ConfidenceModel&, const ConfidenceModel&) = default;
};

struct LabeledExample {
  FeatureVector features{};
  int label = 0;  // 0 or 1
};

inline double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(const ConfidenceModel& m, std::span<const double> x) {
  if (x.size() != kNumFeatures) {
    throw DataError("confidence model: expected " + std::to_string(kNumFeatures) + " features, got " +
                    std::to_string(x.size()));
  }
  double z = m.bias;
  for (std::size_t i = 0; i < kNumFeatures; ++i) z += m.weights[i] * x[i];
  return z;
}

// Strictly inside (0, 1): saturated outputs are pulled in by 1e-15.
inline double predict_confidence(const ConfidenceModel& m, std::span<const double> x) {
  return std::clamp(sigmoid(logit(m, x)), 1e-15, 1.0 - 1e-15);
}

// Mean of pos_weight * y * softplus(-z) + (1 - y) * softplus(z).
inline double mean_bce(const ConfidenceModel& m, std::span<const LabeledExample> batch, double pos_weight = 1.0) {
  if (batch.empty()) throw DataError("mean_bce: empty batch");
  double sum = 0.0;
  for (const auto& ex : batch) {
    const double z = logit(m, ex.features);
    sum += ex.label ? pos_weight * softplus(-z) : softplus(z);
  }
  return sum / static_cast<double>(batch.size());
}

struct Gradient {
  FeatureVector weights{};
  double bias = 0.0;
};

inline Gradient bce_gradient(const ConfidenceModel& m, std::span<const LabeledExample> batch,
                             double pos_weight = 1.0) {
  if (batch.empty()) throw DataError("bce_gradient: empty batch");
  Gradient g;
  for (const auto& ex : batch) {
    const double p = sigmoid(logit(m, ex.features));
    const double dz = ex.label ? pos_weight * (p - 1.0) : p;
    for (std::size_t i = 0; i < kNumFeatures; ++i) g.weights[i] += dz * ex.features[i];
    g.bias += dz;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& w : g.weights) w *= inv;
  g.bias *= inv;
  return g;
}

struct SgdStepResult {
  ConfidenceModel model;
  double loss = 0.0;  // before the update
};

inline SgdStepResult sgd_step(const ConfidenceModel& m, std::span<const LabeledExample> batch, double lr,
                              double pos_weight = 1.0) {
  if (!(lr > 0.0)) throw ParameterError("sgd_step: lr must be > 0");
  const double loss = mean_bce(m, batch, pos_weight);
  const Gradient g = bce_gradient(m, batch, pos_weight);
  ConfidenceModel next = m;
  for (std::size_t i = 0; i < kNumFeatures; ++i) next.weights[i] -= lr * g.weights[i];
  next.bias -= lr * g.bias;
  return {next, loss};
}

struct TrainingParams {
  int epochs = 30;
  double lr = 0.1;
  int batch_size = 64;
  double pos_weight = 1.0;

  void validate() const {
    if (epochs < 1) throw ParameterError("training.epochs: must be >= 1");
    if (!(lr > 0.0)) throw ParameterError("training.lr: must be > 0");
    if (batch_size < 1) throw ParameterError("training.batch_size: must be >= 1");
    if (!(pos_weight > 0.0)) throw ParameterError("training.pos_weight: must be > 0");
  }

  friend bool operator==(const TrainingParams&, const TrainingParams&) = default;
};

struct TrainingResult {
  ConfidenceModel model;
  std::vector<double> loss_curve;  // per-epoch mean of the pre-update batch losses, size-weighted
};

// Starts from the zero model; the example order is reshuffled every epoch
// with Rng(seed).
inline TrainingResult train_confidence_model(std::span<const LabeledExample> examples, const TrainingParams& params,
                                             std::uint64_t seed) {
  params.validate();
  if (examples.empty()) throw DataError("train_confidence_model: no labeled examples");
  Rng rng(seed);
  std::vector<LabeledExample> data(examples.begin(), examples.end());
  TrainingResult out;
  const auto bs = static_cast<std::size_t>(params.batch_size);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = data.size(); i > 1; --i) {
      std::swap(data[i - 1], data[rng.uniform_int(i)]);
    }
    double weighted = 0.0;
    for (std::size_t start = 0; start < data.size(); start += bs) {
      const std::size_t len = std::min(bs, data.size() - start);
      auto step = sgd_step(out.model, std::span(data).subspan(start, len), params.lr, params.pos_weight);
      out.model = step.model;
      weighted += step.loss * static_cast<double>(len);
    }
    out.loss_curve.push_back(weighted / static_cast<double>(data.size()));
  }
  return out;
}

inline Json model_to_json(const ConfidenceModel& m) {
  Json names = Json::array();
  for (auto n : kFeatureNames) names.push_back(std::string(n));
  return Json{{"weights", m.weights}, {"bias", m.bias}, {"feature_names", std::move(names)}};
}

template <class J>
ConfidenceModel model_from_json(const J& j) {
  ConfidenceModel m;
  try {
    const auto w = j.at("weights").template get<std::vector<double>>();
    if (w.size() != kNumFeatures) throw DataError("model JSON: expected 5 weights");
    std::copy(w.begin(), w.end(), m.weights.begin());
    m.bias = j.at("bias").template get<double>();
    if (j.contains("feature_names")) {
      const auto names = j.at("feature_names").template get<std::vector<std::string>>();
      if (names.size() != kNumFeatures) throw DataError("model JSON: expected 5 feature names");
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (names[i] != kFeatureNames[i]) throw DataError("model JSON: unexpected feature " + names[i]);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model JSON: ") + e.what());
  }
  for (double w : m.weights) {
    if (!std::isfinite(w)) throw DataError("model JSON: non-finite weight");
  }
  if (!std::isfinite(m.bias)) throw DataError("model JSON: non-finite bias");
  return m;
}

inline Json training_params_to_json(const TrainingParams& t) {
  return Json{{"epochs", t.epochs}, {"lr", t.lr}, {"batch_size", t.batch_size}, {"pos_weight", t.pos_weight}};
}

template <class J>
TrainingParams training_params_from_json(const J& j) {
  TrainingParams t;
  detail::FieldReader r(j, "training");
  r.get("epochs", t.epochs);
  r.get("lr", t.lr);
  r.get("batch_size", t.batch_size);
  r.get("pos_weight", t.pos_weight);
  r.finish();
  t.validate();
  return t;
}

}  // namespace tba
