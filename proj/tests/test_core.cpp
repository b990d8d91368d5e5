#include <gtest/gtest.h>

#include <cmath>

#include "cfsm/arena.hpp"
#include "cfsm/core.hpp"
#include "cfsm/state_id.hpp"

using namespace cfsm;

namespace {

TransitionTensor tensor_3x3x4() {
  return TransitionTensor::zeros(StateSet({"nm", "rw", "fm"}), 4);
}

bool has_violation(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Vec2, ArithmeticAndNorm) {
  const Vec2 a{3.0, 4.0};
  EXPECT_DOUBLE_EQ(a.norm(), 5.0);
  EXPECT_DOUBLE_EQ(a.squared_norm(), 25.0);
  EXPECT_EQ((a + Vec2{1, 1}), (Vec2{4, 5}));
  EXPECT_EQ((a - Vec2{1, 1}), (Vec2{2, 3}));
  EXPECT_EQ(2.0 * a, (Vec2{6, 8}));
}

TEST(Vec2, RadiusIsInclusive) {
  EXPECT_TRUE(within_radius({0, 0}, {3, 4}, 5.0));
  EXPECT_FALSE(within_radius({0, 0}, {3, 4.0001}, 5.0));
}

TEST(StateSet, RejectsDuplicatesAndEmpty) {
  EXPECT_THROW(StateSet(std::vector<std::string>{}), DataError);
  EXPECT_THROW(StateSet({"a", "a"}), DataError);
  EXPECT_THROW(StateSet({"a", ""}), DataError);
  const StateSet s({"nm", "rw", "fm"});
  EXPECT_EQ(s.index_of("rw"), 1);
  EXPECT_FALSE(s.index_of("zz").has_value());
}

TEST(Trajectory, AccessByFrame) {
  Trajectory t{"a", {{5, {1, 1}}, {6, {2, 1}}, {7, {3, 1}}}};
  EXPECT_TRUE(t.alive_at(6));
  EXPECT_FALSE(t.alive_at(8));
  EXPECT_EQ(t.at(7), (Vec2{3, 1}));
}

TEST(ValidateTensor, TermiteShapeIsValid) {
  EXPECT_TRUE(validate_tensor(tensor_3x3x4(), false).empty());
  const auto t = tensor_3x3x4();
  EXPECT_EQ(t.matrices.size(), 3u);
  EXPECT_EQ(t.matrix(0).rows(), 3);
  EXPECT_EQ(t.matrix(0).cols(), 4);
}

TEST(ValidateTensor, SeventeenStateShapeIsValid) {
  const auto t = TransitionTensor::zeros(velocity_state_names(8), 18);
  EXPECT_TRUE(validate_tensor(t, false).empty());
  EXPECT_EQ(t.n_states(), 17u);
}

TEST(ValidateTensor, WrongRowCountIsReported) {
  auto t = tensor_3x3x4();
  t.matrices[1].coeffs = Eigen::MatrixXd::Zero(2, 4);
  EXPECT_TRUE(has_violation(validate_tensor(t, false), "matrix row count != |B|"));
}

TEST(ValidateTensor, StochasticRules) {
  auto t = tensor_3x3x4();
  for (std::size_t s = 0; s < 3; ++s) t.matrix(s).col(0).setConstant(1.0 / 3.0);
  t.matrix(0)(0, 0) = 1.0 / 3.0 + (1.0 - 3.0 * (1.0 / 3.0));
  EXPECT_TRUE(validate_tensor(t, true).empty());
  t.matrix(2)(0, 1) = 0.1;
  EXPECT_TRUE(has_violation(validate_tensor(t, true), "interaction column 1 does not sum to 0"));
  t.matrix(2)(1, 1) = -0.1;
  EXPECT_TRUE(validate_tensor(t, true).empty());
  t.matrix(1)(0, 0) = -0.2;
  EXPECT_FALSE(validate_tensor(t, true).empty());
}

TEST(ValidateTensor, EnvDimMustMatchStates) {
  const auto t = TransitionTensor::zeros(StateSet({"a", "b"}), 4);
  EXPECT_TRUE(has_violation(validate_tensor(t, false), "env_dim"));
}

TEST(TensorError, IdenticalIsZero) {
  const auto t = tensor_3x3x4();
  const auto e = tensor_error(t, t);
  EXPECT_EQ(e.max_abs, 0.0);
  EXPECT_EQ(e.rmse, 0.0);
}

TEST(TensorError, SingleEntry) {
  const auto truth = tensor_3x3x4();
  auto est = truth;
  est.matrix(1)(2, 3) = 0.5;
  const auto e = tensor_error(est, truth);
  EXPECT_DOUBLE_EQ(e.max_abs, 0.5);
  EXPECT_NEAR(e.rmse, std::sqrt(0.25 / 36.0), 1e-15);
  EXPECT_NEAR(e.rmse, 0.5 / 6.0, 1e-15);
}

TEST(TensorError, ShapeMismatchThrows) {
  const auto a = tensor_3x3x4();
  const auto b = TransitionTensor::zeros(StateSet({"a", "b"}), 3);
  EXPECT_THROW(tensor_error(a, b), DataError);
}

TEST(ClipRenormalize, ClipsNegatives) {
  const std::vector<double> raw{-0.1, 0.6, 0.5};
  const auto d = clip_renormalize(raw);
  EXPECT_FALSE(d.degenerate);
  EXPECT_DOUBLE_EQ(d.probs[0], 0.0);
  EXPECT_NEAR(d.probs[1], 6.0 / 11.0, 1e-15);
  EXPECT_NEAR(d.probs[2], 5.0 / 11.0, 1e-15);
}

TEST(ClipRenormalize, NoPositiveMassIsUniformAndFlagged) {
  const std::vector<double> raw{-1.0, 0.0, -0.5, 0.0};
  const auto d = clip_renormalize(raw);
  EXPECT_TRUE(d.degenerate);
  for (double p : d.probs) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(ClipRenormalize, ValidDistributionIsUnchanged) {
  const std::vector<double> raw{0.25, 0.5, 0.25};
  EXPECT_EQ(clip_renormalize(raw).probs, raw);
}

TEST(Arena, RectContainsAndReflects) {
  const auto a = Arena::rect({0, 0}, {10, 10});
  EXPECT_TRUE(a.contains({10, 0}));
  EXPECT_FALSE(a.contains({10.5, 0}));
  Vec2 p{11, 5}, v{2, 1};
  a.reflect(p, v);
  EXPECT_EQ(p, (Vec2{9, 5}));
  EXPECT_EQ(v, (Vec2{-2, 1}));
}

TEST(Arena, DiscReflectionStaysInside) {
  const auto a = Arena::disc({0, 0}, 10);
  Vec2 p{12, 0}, v{3, 0};
  a.reflect(p, v);
  EXPECT_TRUE(a.contains(p));
  EXPECT_LT(v.x, 0.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(a.contains(a.sample_uniform(rng)));
}

TEST(Arena, DegenerateIsInvalid) {
  EXPECT_FALSE(Arena::rect({0, 0}, {0, 5}).valid());
  EXPECT_FALSE(Arena::disc({0, 0}, 0.0).valid());
}
