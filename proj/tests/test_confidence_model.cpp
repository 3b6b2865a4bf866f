#include <gtest/gtest.h>

#include <cmath>

#include "tba/confidence_model.hpp"
#include "tba/testing/generators.hpp"
#include "tba/testing/oracles.hpp"

using namespace tba;

TEST(Predict, Examples) {
  ConfidenceModel m;
  const FeatureVector x{0.3, 0.1, 0.9, 1.0, 0.2};
  EXPECT_EQ(predict_confidence(m, x), 0.5);
  m.bias = 30.0;
  EXPECT_GT(predict_confidence(m, x), 1.0 - 1e-9);
  EXPECT_LT(predict_confidence(m, x), 1.0);
  m = {};
  m.weights[0] = 1.0;
  const FeatureVector ones{1, 1, 1, 1, 1};
  EXPECT_NEAR(predict_confidence(m, ones), 0.7310585786, 1e-10);
  const std::vector<double> short_x{1.0, 2.0};
  EXPECT_THROW(predict_confidence(m, short_x), DataError);
}

TEST(Predict, StrictlyInsideUnitInterval) {
  ConfidenceModel m;
  m.bias = -800.0;
  const FeatureVector x{};
  EXPECT_GT(predict_confidence(m, x), 0.0);
  m.bias = 800.0;
  EXPECT_LT(predict_confidence(m, x), 1.0);
}

TEST(Sgd, ZeroGradientWhenPerfect) {
  // sigma(0) = 0.5 can never equal a 0/1 label, so use a saturated model.
  ConfidenceModel m;
  m.weights[0] = 1600.0;
  m.bias = -800.0;
  std::vector<LabeledExample> batch{{{1, 0, 0, 0, 0}, 1}, {{0, 0, 0, 0, 0}, 0}};
  const auto g = bce_gradient(m, batch);
  for (double w : g.weights) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(g.bias, 0.0);
  EXPECT_EQ(sgd_step(m, batch, 0.5).model, m);
}

TEST(Sgd, GradientMatchesFiniteDifferences) {
  Rng rng(99);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto m = tba::testing::random_model(rng);
    const auto batch = tba::testing::random_batch(rng, 32);
    const auto g = bce_gradient(m, batch);
    const auto fd = tba::testing::numeric_gradient(m, batch);
    for (std::size_t k = 0; k <= kNumFeatures; ++k) {
      const double a = k < kNumFeatures ? g.weights[k] : g.bias;
      worst = std::max(worst, std::abs(a - fd[k]) / std::max(1e-8, std::max(std::abs(a), std::abs(fd[k]))));
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Sgd, PositiveWeightGradient) {
  Rng rng(4);
  const auto m = tba::testing::random_model(rng);
  const auto batch = tba::testing::random_batch(rng, 20);
  const auto g = bce_gradient(m, batch, 3.0);
  const auto fd = tba::testing::numeric_gradient(m, batch, 1e-5, 3.0);
  for (std::size_t k = 0; k < kNumFeatures; ++k) EXPECT_NEAR(g.weights[k], fd[k], 1e-7);
  EXPECT_NEAR(g.bias, fd[kNumFeatures], 1e-7);
}

TEST(Sgd, UpdateRuleAndReturnedLoss) {
  ConfidenceModel m;
  std::vector<LabeledExample> batch{{{1, 0, 0, 0, 0}, 1}};
  const auto r = sgd_step(m, batch, 0.5);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  // d/dz = sigma(0) - 1 = -0.5 on feature 0 and on the bias.
  EXPECT_NEAR(r.model.weights[0], 0.25, 1e-15);
  EXPECT_NEAR(r.model.bias, 0.25, 1e-15);
  EXPECT_THROW(sgd_step(m, batch, 0.0), ParameterError);
  EXPECT_THROW(sgd_step(m, {}, 0.1), DataError);
}

TEST(Sgd, SeparableTwoPointConverges) {
  ConfidenceModel m;
  std::vector<LabeledExample> batch{{{1, 0, 0, 0, 0}, 1}, {{0, 0, 0, 0, 1}, 0}};
  for (int i = 0; i < 500; ++i) m = sgd_step(m, batch, 0.5).model;
  EXPECT_LT(mean_bce(m, batch), 0.05);
}

TEST(Train, AllNegativeLabels) {
  Rng rng(6);
  auto batch = tba::testing::random_batch(rng, 200);
  for (auto& ex : batch) ex.label = 0;
  const auto r = train_confidence_model(batch, {}, 1);
  for (const auto& ex : batch) EXPECT_LE(predict_confidence(r.model, ex.features), 0.5);
  EXPECT_EQ(r.loss_curve.size(), 30u);
}

TEST(Train, DeterministicAndValidated) {
  Rng rng(8);
  const auto batch = tba::testing::random_batch(rng, 100);
  const auto a = train_confidence_model(batch, {}, 5);
  const auto b = train_confidence_model(batch, {}, 5);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_NE(train_confidence_model(batch, {}, 6).model, a.model);
  EXPECT_THROW(train_confidence_model({}, {}, 0), DataError);
  TrainingParams bad;
  bad.epochs = 0;
  EXPECT_THROW(train_confidence_model(batch, bad, 0), ParameterError);
}

TEST(Model, JsonRoundTrip) {
  Rng rng(2);
  const auto m = tba::testing::random_model(rng);
  EXPECT_EQ(model_from_json(Json::parse(model_to_json(m).dump())), m);
  EXPECT_THROW(model_from_json(Json{{"weights", {1, 2}}, {"bias", 0}}), DataError);
  EXPECT_THROW(model_from_json(Json{{"bias", 0}}), DataError);
  Json j = model_to_json(m);
  j["feature_names"][0] = "x";
  EXPECT_THROW(model_from_json(j), DataError);
  TrainingParams t;
  t.batch_size = 7;
  EXPECT_EQ(training_params_from_json(training_params_to_json(t)), t);
}
