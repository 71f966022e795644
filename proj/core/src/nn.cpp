#include "pqi/nn.hpp"

#include <cmath>
#include <limits>

#include "pqi/error.hpp"

namespace pqi::nn {
namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

bool row_valid(Mask mask, Index i) { return mask.empty() || mask[static_cast<std::size_t>(i)] != 0; }

void check_mask(Mask mask, Index rows) {
  if (!mask.empty() && static_cast<Index>(mask.size()) != rows) {
    throw InvalidArgument("mask length does not match row count");
  }
}

}  // namespace

int ParamLayout::add(std::string name, Index rows, Index cols) {
  if (find(name)) {
    throw InvalidArgument("duplicate parameter name: " + name);
  }
  specs_.push_back({std::move(name), rows, cols});
  return static_cast<int>(specs_.size()) - 1;
}

std::optional<int> ParamLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) {
      return static_cast<int>(i);
    }
  }
  return std::nullopt;
}

Tensors ParamLayout::zeros() const {
  Tensors t;
  t.reserve(specs_.size());
  for (const auto& s : specs_) {
    t.push_back(Mat::Zero(s.rows, s.cols));
  }
  return t;
}

std::size_t ParamLayout::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : specs_) {
    n += static_cast<std::size_t>(s.rows * s.cols);
  }
  return n;
}

void add_into(Tensors& dst, const Tensors& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += src[i];
  }
}

void set_zero(Tensors& t) {
  for (auto& m : t) {
    m.setZero();
  }
}

bool all_finite(const Mat& m) noexcept { return m.allFinite(); }

Mat activate(const Mat& x, Activation act) {
  if (act == Activation::Identity) {
    return x;
  }
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); });
}

Mat activate_backward(const Mat& x, const Mat& dy, Activation act) {
  if (act == Activation::Identity) {
    return dy;
  }
  const Mat deriv = x.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
  });
  return dy.cwiseProduct(deriv);
}

// ---- Linear ---------------------------------------------------------------

void Linear::declare(ParamLayout& layout, const std::string& prefix, Index in, Index out) {
  weight = layout.add(prefix + ".weight", out, in);
  bias = layout.add(prefix + ".bias", 1, out);
}

Mat Linear::forward(const Tensors& p, const Mat& x) const {
  const Mat& w = p[weight];
  if (x.cols() != w.cols()) {
    throw InvalidArgument("linear: input width mismatch");
  }
  Mat y = x * w.transpose();
  y.rowwise() += p[bias].row(0);
  return y;
}

Mat Linear::backward(const Tensors& p, const Mat& x, const Mat& dy, Tensors& g, bool need_dx) const {
  g[weight].noalias() += dy.transpose() * x;
  g[bias] += dy.colwise().sum();
  if (!need_dx) {
    return {};
  }
  return dy * p[weight];
}

// ---- LayerNorm ------------------------------------------------------------

void LayerNorm::declare(ParamLayout& layout, const std::string& prefix, Index dim) {
  gain = layout.add(prefix + ".gain", 1, dim);
  bias = layout.add(prefix + ".bias", 1, dim);
}

Mat LayerNorm::forward(const Tensors& p, const Mat& x, Cache& cache) const {
  const Index n = x.rows();
  const double d = static_cast<double>(x.cols());
  cache.xhat.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / d;
    const RowVec centered = x.row(i).array() - mu;
    const double var = centered.squaredNorm() / d;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std(i) = inv;
    cache.xhat.row(i) = centered * inv;
  }
  Mat y = cache.xhat.array().rowwise() * p[gain].row(0).array();
  y.rowwise() += p[bias].row(0);
  return y;
}

Mat LayerNorm::backward(const Tensors& p, const Cache& cache, const Mat& dy, Tensors& g) const {
  g[gain] += dy.cwiseProduct(cache.xhat).colwise().sum();
  g[bias] += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * p[gain].row(0).array();
  const double d = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / d;
    const double mean_dx = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.inv_std(i) * (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

// ---- Attention ------------------------------------------------------------

void Attention::declare(ParamLayout& layout, const std::string& prefix, Index d, int h) {
  if (h < 1 || d % h != 0) {
    throw InvalidArgument("attention: heads must divide the token width");
  }
  dim = d;
  heads = h;
  query.declare(layout, prefix + ".query", d, d);
  key.declare(layout, prefix + ".key", d, d);
  value.declare(layout, prefix + ".value", d, d);
  output.declare(layout, prefix + ".output", d, d);
}

Mat Attention::forward(const Tensors& p, const Mat& x, Mask mask, Cache& cache) const {
  const Index n = x.rows();
  check_mask(mask, n);
  cache.keys.clear();
  for (Index j = 0; j < n; ++j) {
    if (row_valid(mask, j)) {
      cache.keys.push_back(j);
    }
  }
  if (cache.keys.empty()) {
    throw InvalidArgument("attention: every key is masked");
  }

  cache.x = x;
  cache.q = query.forward(p, x);
  // Keys and values are kept only for valid rows.
  const Mat xk = x(cache.keys, Eigen::placeholders::all);
  cache.k = key.forward(p, xk);
  cache.v = value.forward(p, xk);
  cache.concat.resize(n, dim);
  cache.probs.assign(static_cast<std::size_t>(heads), Mat());

  const Index dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    // Key-major: column i is the distribution of query i over the keys.
    Mat probs = (cache.k.middleCols(h * dh, dh) * cache.q.middleCols(h * dh, dh).transpose()) * scale;
    const RowVec peak = probs.colwise().maxCoeff();
    probs = (probs.rowwise() - peak).array().exp();
    const RowVec inv = probs.colwise().sum().cwiseInverse();
    probs = probs * inv.asDiagonal();
    cache.concat.middleCols(h * dh, dh).noalias() = probs.transpose() * cache.v.middleCols(h * dh, dh);
    cache.probs[static_cast<std::size_t>(h)] = std::move(probs);
  }
  return output.forward(p, cache.concat);
}

Mat Attention::backward(const Tensors& p, const Cache& cache, Mask, const Mat& dy, Tensors& g) const {
  const Mat dconcat = output.backward(p, cache.concat, dy, g);
  const Index nk = static_cast<Index>(cache.keys.size());
  const Index dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dq(cache.x.rows(), dim);
  Mat dk(nk, dim);
  Mat dv(nk, dim);
  for (int h = 0; h < heads; ++h) {
    const Mat& probs = cache.probs[static_cast<std::size_t>(h)];
    const auto d_out = dconcat.middleCols(h * dh, dh);
    const Mat d_probs = cache.v.middleCols(h * dh, dh) * d_out.transpose();
    dv.middleCols(h * dh, dh).noalias() = probs * d_out;
    // Softmax Jacobian per query: dS = P o (dP - sum_k(dP o P)).
    const RowVec inner = d_probs.cwiseProduct(probs).colwise().sum();
    const Mat d_scores = probs.cwiseProduct(d_probs.rowwise() - inner) * scale;
    dq.middleCols(h * dh, dh).noalias() = d_scores.transpose() * cache.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = d_scores * cache.q.middleCols(h * dh, dh);
  }
  Mat dx = query.backward(p, cache.x, dq, g);
  const Mat xk = cache.x(cache.keys, Eigen::placeholders::all);
  const Mat dxk = key.backward(p, xk, dk, g) + value.backward(p, xk, dv, g);
  for (Index j = 0; j < nk; ++j) {
    dx.row(cache.keys[static_cast<std::size_t>(j)]) += dxk.row(j);
  }
  return dx;
}

// ---- Block ----------------------------------------------------------------

void Block::declare(ParamLayout& layout, const std::string& prefix, Index dim, Index ffn_dim, int heads) {
  norm1.declare(layout, prefix + ".norm1", dim);
  attention.declare(layout, prefix + ".attn", dim, heads);
  norm2.declare(layout, prefix + ".norm2", dim);
  fc1.declare(layout, prefix + ".ffn1", dim, ffn_dim);
  fc2.declare(layout, prefix + ".ffn2", ffn_dim, dim);
}

Mat Block::forward(const Tensors& p, const Mat& x, Mask mask, Cache& cache) const {
  cache.n1_out = norm1.forward(p, x, cache.n1);
  Mat h = x + attention.forward(p, cache.n1_out, mask, cache.attn);
  cache.n2_out = norm2.forward(p, h, cache.n2);
  cache.pre_act = fc1.forward(p, cache.n2_out);
  cache.post_act = activate(cache.pre_act, act);
  return h + fc2.forward(p, cache.post_act);
}

Mat Block::backward(const Tensors& p, const Cache& cache, Mask mask, const Mat& dy, Tensors& g) const {
  const Mat d_post = fc2.backward(p, cache.post_act, dy, g);
  const Mat d_pre = activate_backward(cache.pre_act, d_post, act);
  const Mat d_n2 = fc1.backward(p, cache.n2_out, d_pre, g);
  const Mat dh = dy + norm2.backward(p, cache.n2, d_n2, g);
  const Mat d_n1 = attention.backward(p, cache.attn, mask, dh, g);
  return dh + norm1.backward(p, cache.n1, d_n1, g);
}

// ---- Pooling and standardization ------------------------------------------

RowVec masked_mean(const Mat& x, Mask mask) {
  check_mask(mask, x.rows());
  RowVec acc = RowVec::Zero(x.cols());
  Index count = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    if (row_valid(mask, i)) {
      acc += x.row(i);
      ++count;
    }
  }
  if (count == 0) {
    throw InvalidArgument("mean pool over an all-invalid mask");
  }
  return acc / static_cast<double>(count);
}

Mat masked_mean_backward(const RowVec& dy, Index rows, Mask mask) {
  Index count = 0;
  for (Index i = 0; i < rows; ++i) {
    count += row_valid(mask, i) ? 1 : 0;
  }
  Mat dx = Mat::Zero(rows, dy.cols());
  const RowVec share = dy / static_cast<double>(count);
  for (Index i = 0; i < rows; ++i) {
    if (row_valid(mask, i)) {
      dx.row(i) = share;
    }
  }
  return dx;
}

Standardized standardize(const RowVec& x, double eps) {
  const double d = static_cast<double>(x.size());
  const double mu = x.sum() / d;
  const RowVec centered = x.array() - mu;
  const double inv = 1.0 / std::sqrt(centered.squaredNorm() / d + eps);
  return Standardized{centered * inv, inv};
}

RowVec standardize_backward(const Standardized& s, const RowVec& dz) {
  const double d = static_cast<double>(dz.size());
  const double mean_d = dz.sum() / d;
  const double mean_dz = dz.dot(s.z) / d;
  return s.inv_std * (dz.array() - mean_d - s.z.array() * mean_dz).matrix();
}

}  // namespace pqi::nn
