#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "pqi/error.hpp"
#include "pqi/nn.hpp"

namespace pqi::nn {
namespace {

Mat random_mat(std::mt19937_64& rng, Index r, Index c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) {
    m.data()[i] = n(rng);
  }
  return m;
}

Tensors random_params(std::mt19937_64& rng, const ParamLayout& layout, double sd) {
  Tensors p;
  for (const auto& s : layout.specs()) {
    p.push_back(random_mat(rng, s.rows, s.cols, sd));
  }
  return p;
}

// Max relative error between an analytic gradient and a fourth-order central difference.
double max_rel_error(const std::function<double()>& loss, Mat& target, const Mat& analytic) {
  const double h = 1e-4;
  double worst = 0;
  for (Index i = 0; i < target.size(); ++i) {
    double& v = target.data()[i];
    const double saved = v;
    auto at = [&](double off) {
      v = saved + off;
      return loss();
    };
    const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    v = saved;
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4}));
  }
  return worst;
}

TEST(ParamLayoutTest, ShapesAndLookup) {
  ParamLayout layout;
  EXPECT_EQ(layout.add("a", 2, 3), 0);
  EXPECT_EQ(layout.add("b", 1, 4), 1);
  EXPECT_THROW(layout.add("a", 1, 1), InvalidArgument);
  EXPECT_EQ(layout.parameter_count(), 10u);
  EXPECT_EQ(layout.find("b"), 1);
  EXPECT_FALSE(layout.find("c").has_value());
  const Tensors z = layout.zeros();
  EXPECT_EQ(z[0].rows(), 2);
  EXPECT_TRUE(z[1].isZero());
}

TEST(ActivationTest, GeluValues) {
  Mat x(1, 3);
  x << 0.0, 1.0, -1.0;
  const Mat y = activate(x, Activation::Gelu);
  EXPECT_DOUBLE_EQ(y(0, 0), 0.0);
  EXPECT_NEAR(y(0, 1), 0.8411919906082768, 1e-12);
  EXPECT_NEAR(y(0, 2), -0.15880800939172324, 1e-12);
  EXPECT_EQ(activate(x, Activation::Identity), x);
}

TEST(ActivationTest, GeluDerivative) {
  std::mt19937_64 rng(1);
  Mat x = random_mat(rng, 3, 4, 2.0);
  const Mat w = random_mat(rng, 3, 4);
  auto loss = [&] { return (activate(x, Activation::Gelu).array() * w.array()).sum(); };
  const Mat dx = activate_backward(x, w, Activation::Gelu);
  EXPECT_LT(max_rel_error(loss, x, dx), 1e-7);
}

TEST(LinearTest, ForwardAndGradients) {
  std::mt19937_64 rng(2);
  ParamLayout layout;
  Linear lin;
  lin.declare(layout, "l", 5, 3);
  Tensors p = random_params(rng, layout, 0.5);
  Mat x = random_mat(rng, 4, 5);
  const Mat w = random_mat(rng, 4, 3);
  const Mat y = lin.forward(p, x);
  EXPECT_TRUE(y.isApprox((x * p[lin.weight].transpose()).rowwise() + p[lin.bias].row(0)));

  Tensors g = layout.zeros();
  const Mat dx = lin.backward(p, x, w, g);
  auto loss = [&] { return (lin.forward(p, x).array() * w.array()).sum(); };
  EXPECT_LT(max_rel_error(loss, x, dx), 1e-7);
  EXPECT_LT(max_rel_error(loss, p[lin.weight], g[lin.weight]), 1e-7);
  EXPECT_LT(max_rel_error(loss, p[lin.bias], g[lin.bias]), 1e-7);
}

TEST(LayerNormTest, NormalizesRowsAndGradients) {
  std::mt19937_64 rng(3);
  ParamLayout layout;
  LayerNorm ln;
  ln.declare(layout, "n", 6);
  Tensors p = random_params(rng, layout, 1.0);
  Mat x = random_mat(rng, 3, 6, 3.0);
  LayerNorm::Cache cache;
  Tensors unit = layout.zeros();
  unit[ln.gain].setOnes();
  const Mat y = ln.forward(unit, x, cache);
  for (Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(y.row(r).squaredNorm() / 6.0, 1.0, 1e-5);
  }

  const Mat w = random_mat(rng, 3, 6);
  Tensors g = layout.zeros();
  ln.forward(p, x, cache);
  const Mat dx = ln.backward(p, cache, w, g);
  auto loss = [&] {
    LayerNorm::Cache c;
    return (ln.forward(p, x, c).array() * w.array()).sum();
  };
  EXPECT_LT(max_rel_error(loss, x, dx), 1e-6);
  EXPECT_LT(max_rel_error(loss, p[ln.gain], g[ln.gain]), 1e-7);
  EXPECT_LT(max_rel_error(loss, p[ln.bias], g[ln.bias]), 1e-7);
}

class AttentionTest : public ::testing::Test {
protected:
  void SetUp() override {
    attn.declare(layout, "a", 8, 2);
    std::mt19937_64 rng(4);
    p = random_params(rng, layout, 0.4);
    x = random_mat(rng, 5, 8);
    w = random_mat(rng, 5, 8);
  }
  double loss(Mask mask) {
    Attention::Cache c;
    return (attn.forward(p, x, mask, c).array() * w.array()).sum();
  }

  ParamLayout layout;
  Attention attn;
  Tensors p;
  Mat x;
  Mat w;
};

TEST_F(AttentionTest, GradientsMatchFiniteDifferences) {
  for (const std::vector<std::uint8_t>& m : {std::vector<std::uint8_t>{}, std::vector<std::uint8_t>{1, 0, 1, 1, 0}}) {
    Attention::Cache cache;
    attn.forward(p, x, m, cache);
    Tensors g = layout.zeros();
    const Mat dx = attn.backward(p, cache, m, w, g);
    auto f = [&] { return loss(m); };
    EXPECT_LT(max_rel_error(f, x, dx), 1e-6);
    for (std::size_t t = 0; t < p.size(); ++t) {
      EXPECT_LT(max_rel_error(f, p[t], g[t]), 1e-6) << layout.spec(static_cast<int>(t)).name;
    }
  }
}

TEST_F(AttentionTest, MaskedRowsDoNotInfluenceValidRows) {
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};
  Attention::Cache c;
  const Mat before = attn.forward(p, x, mask, c);
  x.row(1).setConstant(50.0);
  x.row(4).setConstant(-7.0);
  const Mat after = attn.forward(p, x, mask, c);
  for (const Index r : {0, 2, 3}) {
    EXPECT_TRUE(after.row(r).isApprox(before.row(r), 1e-13));
  }
}

TEST_F(AttentionTest, PermutationEquivariantWithoutMask) {
  Attention::Cache c;
  const Mat y = attn.forward(p, x, {}, c);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const Mat yp = attn.forward(p, perm * x, {}, c);
  EXPECT_TRUE(yp.isApprox(perm * y, 1e-12));
}

TEST_F(AttentionTest, RejectsBadMasks) {
  Attention::Cache c;
  const std::vector<std::uint8_t> none(5, 0);
  EXPECT_THROW((void)attn.forward(p, x, none, c), InvalidArgument);
  const std::vector<std::uint8_t> short_mask(3, 1);
  EXPECT_THROW((void)attn.forward(p, x, short_mask, c), InvalidArgument);
}

TEST(BlockTest, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  ParamLayout layout;
  Block block;
  block.declare(layout, "b", 8, 12, 2);
  Tensors p = random_params(rng, layout, 0.3);
  Mat x = random_mat(rng, 4, 8);
  const Mat w = random_mat(rng, 4, 8);
  const std::vector<std::uint8_t> mask{1, 1, 0, 1};
  Block::Cache cache;
  block.forward(p, x, mask, cache);
  Tensors g = layout.zeros();
  const Mat dx = block.backward(p, cache, mask, w, g);
  auto f = [&] {
    Block::Cache c;
    return (block.forward(p, x, mask, c).array() * w.array()).sum();
  };
  EXPECT_LT(max_rel_error(f, x, dx), 1e-6);
  for (std::size_t t = 0; t < p.size(); ++t) {
    EXPECT_LT(max_rel_error(f, p[t], g[t]), 1e-6) << layout.spec(static_cast<int>(t)).name;
  }
}

TEST(PoolTest, MaskedMeanAndBackward) {
  Mat x(3, 2);
  x << 1, 2, 100, 200, 3, 4;
  const std::vector<std::uint8_t> mask{1, 0, 1};
  const RowVec m = masked_mean(x, mask);
  EXPECT_DOUBLE_EQ(m(0), 2.0);
  EXPECT_DOUBLE_EQ(m(1), 3.0);
  RowVec dy(2);
  dy << 1.0, -2.0;
  const Mat dx = masked_mean_backward(dy, 3, mask);
  EXPECT_DOUBLE_EQ(dx(0, 1), -1.0);
  EXPECT_TRUE(dx.row(1).isZero());
  EXPECT_THROW((void)masked_mean(x, std::vector<std::uint8_t>{0, 0, 0}), InvalidArgument);
}

TEST(StandardizeTest, ZeroMeanUnitVarianceAndGradient) {
  std::mt19937_64 rng(6);
  Mat x = random_mat(rng, 1, 10, 4.0);
  const auto s = standardize(x.row(0), 1e-5);
  EXPECT_NEAR(s.z.mean(), 0.0, 1e-12);
  EXPECT_NEAR(s.z.squaredNorm() / 10.0, 1.0, 1e-5);
  const Mat w = random_mat(rng, 1, 10);
  const RowVec dx = standardize_backward(s, w.row(0));
  auto f = [&] { return (standardize(x.row(0), 1e-5).z.array() * w.row(0).array()).sum(); };
  EXPECT_LT(max_rel_error(f, x, dx), 1e-6);
}

}  // namespace
}  // namespace pqi::nn
