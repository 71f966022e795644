#pragma once

// Small double-precision layer library with explicit forward caches and
// hand-written backward passes. Parameters live outside the layers in a
// Tensors vector so that gradients can be accumulated into independent
// buffers and reduced in a fixed order.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pqi::nn {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;
using Tensors = std::vector<Mat>;
/// Per-row validity; empty means every row is valid.
using Mask = std::span<const std::uint8_t>;

struct TensorSpec {
  std::string name;
  Index rows = 0;
  Index cols = 0;
};

class ParamLayout {
public:
  int add(std::string name, Index rows, Index cols);
  [[nodiscard]] std::size_t size() const noexcept { return specs_.size(); }
  [[nodiscard]] const TensorSpec& spec(int id) const { return specs_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] const std::vector<TensorSpec>& specs() const noexcept { return specs_; }
  [[nodiscard]] std::optional<int> find(const std::string& name) const;
  [[nodiscard]] Tensors zeros() const;
  [[nodiscard]] std::size_t parameter_count() const noexcept;

private:
  std::vector<TensorSpec> specs_;
};

void add_into(Tensors& dst, const Tensors& src);
void set_zero(Tensors& t);
[[nodiscard]] bool all_finite(const Mat& m) noexcept;

enum class Activation { Gelu, Identity };

/// tanh-approximated GELU.
[[nodiscard]] Mat activate(const Mat& x, Activation act);
/// dL/dx given pre-activation x and dL/dy.
[[nodiscard]] Mat activate_backward(const Mat& x, const Mat& dy, Activation act);

/// y = x W^T + b with W: out x in, b: 1 x out.
struct Linear {
  int weight = -1;
  int bias = -1;

  void declare(ParamLayout& layout, const std::string& prefix, Index in, Index out);
  [[nodiscard]] Mat forward(const Tensors& p, const Mat& x) const;
  /// Accumulates dW, db into g; returns dL/dx (empty when need_dx is false).
  Mat backward(const Tensors& p, const Mat& x, const Mat& dy, Tensors& g, bool need_dx = true) const;
};

/// Per-row layer normalization with learned gain and bias.
struct LayerNorm {
  int gain = -1;
  int bias = -1;
  double eps = 1e-5;

  struct Cache {
    Mat xhat;
    Eigen::VectorXd inv_std;
  };

  void declare(ParamLayout& layout, const std::string& prefix, Index dim);
  [[nodiscard]] Mat forward(const Tensors& p, const Mat& x, Cache& cache) const;
  Mat backward(const Tensors& p, const Cache& cache, const Mat& dy, Tensors& g) const;
};

/// Multi-head scaled dot-product self-attention. Invalid rows are excluded
/// as keys; their own outputs are still computed.
struct Attention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;
  Index dim = 0;

  struct Cache {
    Mat x;
    Mat q;
    /// Rows of x used as keys and values.
    std::vector<Index> keys;
    Mat k;
    Mat v;
    /// Per head, keys x queries.
    std::vector<Mat> probs;
    Mat concat;
  };

  void declare(ParamLayout& layout, const std::string& prefix, Index dim, int heads);
  [[nodiscard]] Mat forward(const Tensors& p, const Mat& x, Mask mask, Cache& cache) const;
  Mat backward(const Tensors& p, const Cache& cache, Mask mask, const Mat& dy, Tensors& g) const;
};

/// Pre-norm transformer block: h = x + Attn(LN1(x)); y = h + FFN(LN2(h)).
struct Block {
  LayerNorm norm1;
  Attention attention;
  LayerNorm norm2;
  Linear fc1;
  Linear fc2;
  Activation act = Activation::Gelu;

  struct Cache {
    LayerNorm::Cache n1;
    Mat n1_out;
    Attention::Cache attn;
    LayerNorm::Cache n2;
    Mat n2_out;
    Mat pre_act;
    Mat post_act;
  };

  void declare(ParamLayout& layout, const std::string& prefix, Index dim, Index ffn_dim, int heads);
  [[nodiscard]] Mat forward(const Tensors& p, const Mat& x, Mask mask, Cache& cache) const;
  Mat backward(const Tensors& p, const Cache& cache, Mask mask, const Mat& dy, Tensors& g) const;
};

/// Mean over valid rows. Throws InvalidArgument when no row is valid.
[[nodiscard]] RowVec masked_mean(const Mat& x, Mask mask);
[[nodiscard]] Mat masked_mean_backward(const RowVec& dy, Index rows, Mask mask);

/// z = (x - mean(x)) / sqrt(var(x) + eps) over the entries of a row vector.
struct Standardized {
  RowVec z;
  double inv_std = 0;
};
[[nodiscard]] Standardized standardize(const RowVec& x, double eps);
[[nodiscard]] RowVec standardize_backward(const Standardized& s, const RowVec& dz);

}  // namespace pqi::nn
