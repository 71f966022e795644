#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pqi/image.hpp"
#include "pqi/nn.hpp"
#include "pqi/superpixel.hpp"

namespace pqi {

/// Geometry and widths of the dual-branch regressor. The defaults are the
/// full-size network: 512 px input split into 32 px patches (256 tokens of
/// 3x32x32), eight heads, two attention layers, 1024-wide branch outputs,
/// 500 superpixels with 6 features each and an 18-unit regression layer.
struct SpaNetConfig {
  int image_side = 512;
  int patch_side = 32;
  int heads = 8;
  int layers = 2;
  int token_dim = 256;
  int ffn_dim = 1024;
  int branch_out = 1024;
  /// 0 disables the superpixel branch (pixel-only model).
  int superpixel_k = 500;
  int superpixel_feat = kSuperpixelFeatureDim;
  int head_hidden = 18;
  /// Additive size/centroid encoding in the superpixel branch.
  bool use_pos_encoding = true;
  /// Standardize each branch output before concatenation.
  bool normalize_branches = true;
  nn::Activation activation = nn::Activation::Gelu;
  /// Weights ~ N(0, 1/fan_in) when set; otherwise N(0, init_std^2).
  bool fan_in_init = true;
  /// Also the std of the learned patch position table.
  double init_std = 0.02;
  double norm_eps = 1e-5;

  [[nodiscard]] int patches_per_side() const noexcept { return image_side / patch_side; }
  [[nodiscard]] int num_patches() const noexcept { return patches_per_side() * patches_per_side(); }
  [[nodiscard]] int patch_dim() const noexcept { return 3 * patch_side * patch_side; }
  [[nodiscard]] bool use_superpixel() const noexcept { return superpixel_k > 0; }
  [[nodiscard]] int fused_dim() const noexcept { return 2 * branch_out; }

  /// Throws InvalidArgument on inconsistent geometry.
  void validate() const;

  /// Full geometry with a narrow token width, sized for single-core training runs.
  [[nodiscard]] static SpaNetConfig desk_scale();

  [[nodiscard]] std::string serialize() const;
  [[nodiscard]] static SpaNetConfig deserialize(const std::string& text);

  friend bool operator==(const SpaNetConfig&, const SpaNetConfig&) = default;
};

/// Network input for one image: flattened patches and the padded superpixel block.
struct SpaNetInput {
  nn::Mat tokens;
  SuperpixelBlock superpixels;
};

struct SpaNetSample {
  std::string id;
  SpaNetInput input;
  double target = 0;
};

/// Splits a square image into row-major patches, each flattened channel-major
/// (C, y, x) with channels scaled to [0, 1]. Throws InvalidArgument unless the
/// image is image_side x image_side.
[[nodiscard]] nn::Mat patchify(const RgbImage& img, const SpaNetConfig& cfg);

/// Bilinear resize to image_side, patchify, and SLIC features padded to superpixel_k.
[[nodiscard]] SpaNetInput prepare_input(const RgbImage& img, const SpaNetConfig& cfg, const SlicParams& slic_params = {});

class SpaNetModel {
public:
  /// All weights zero, normalization gains one.
  explicit SpaNetModel(const SpaNetConfig& config);

  /// Gaussian weights (see fan_in_init), zero biases, unit gains.
  void initialize(std::uint64_t seed);

  [[nodiscard]] const SpaNetConfig& config() const noexcept { return config_; }
  [[nodiscard]] const nn::ParamLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] nn::Tensors& parameters() noexcept { return params_; }
  [[nodiscard]] const nn::Tensors& parameters() const noexcept { return params_; }
  [[nodiscard]] nn::Mat& parameter(const std::string& name);
  [[nodiscard]] const nn::Mat& parameter(const std::string& name) const;

  [[nodiscard]] nn::RowVec pixel_branch_forward(const nn::Mat& tokens) const;
  [[nodiscard]] nn::RowVec superpixel_branch_forward(const SuperpixelBlock& block) const;
  [[nodiscard]] double fuse_and_regress(const nn::RowVec& pixel, const nn::RowVec& superpixel) const;
  [[nodiscard]] double predict(const SpaNetInput& input) const;

  /// Squared error (prediction - target)^2 for one sample; accumulates its
  /// parameter gradient into grads (shaped like parameters()). When
  /// d_superpixel_features is non-null it receives dL/d(superpixel features).
  double squared_error_gradient(const SpaNetInput& input, double target, nn::Tensors& grads,
                                nn::Mat* d_superpixel_features = nullptr) const;

private:
  struct PixelBranch {
    nn::Linear patch_proj;
    int position = -1;
    std::vector<nn::Block> blocks;
    nn::Linear out;
  };
  struct SuperpixelBranch {
    nn::Linear feature_proj;
    nn::Linear encoding_proj;
    std::vector<nn::Block> blocks;
    nn::Linear out;
  };
  struct Head {
    nn::Linear hidden;
    nn::Linear output;
  };
  struct BranchCache {
    std::vector<nn::Block::Cache> blocks;
    nn::RowVec pooled;
    nn::RowVec out;
  };
  struct ForwardCache {
    BranchCache pixel;
    BranchCache superpixel;
    nn::Standardized pixel_std;
    nn::Standardized superpixel_std;
    nn::RowVec fused;
    nn::RowVec pre_act;
    nn::RowVec post_act;
    double prediction = 0;
  };

  [[nodiscard]] nn::RowVec run_pixel(const nn::Mat& tokens, BranchCache& cache) const;
  [[nodiscard]] nn::RowVec run_superpixel(const SuperpixelBlock& block, BranchCache& cache) const;
  [[nodiscard]] double run_head(const nn::RowVec& pixel, const nn::RowVec& superpixel, ForwardCache& cache) const;
  void check_finite(const nn::Mat& m, const char* where) const;

  SpaNetConfig config_;
  nn::ParamLayout layout_;
  nn::Tensors params_;
  PixelBranch pixel_;
  SuperpixelBranch superpixel_;
  Head head_;
};

// ---- training -------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  /// NaN when no validation set is given.
  double val_loss = 0;
};

struct TrainConfig {
  int epochs = 50;
  double lr_max = 2e-5;
  double lr_min = 1e-6;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  unsigned threads = 1;
  /// Called after every epoch; returning true ends training early. The
  /// learning-rate schedule still spans `epochs`.
  std::function<bool(const EpochRecord&, const SpaNetModel&)> stop_when;

  void validate() const;
};

/// Half-cosine decay: lr_max at epoch 0, lr_min at the final epoch.
[[nodiscard]] double learning_rate(const TrainConfig& cfg, int epoch);

struct TrainResult {
  std::vector<EpochRecord> history;
};

/// Mean squared error over a sample set.
[[nodiscard]] double mean_squared_error(const SpaNetModel& model, const std::vector<SpaNetSample>& samples,
                                        unsigned threads = 1);
[[nodiscard]] std::vector<double> predict_all(const SpaNetModel& model, const std::vector<SpaNetSample>& samples,
                                              unsigned threads = 1);

/// Adam on mean squared error with shuffled mini-batches. Per-sample
/// gradients are reduced in sample order, so results do not depend on the
/// thread count. Throws NumericalError if the loss becomes non-finite.
TrainResult train(SpaNetModel& model, const std::vector<SpaNetSample>& train_set,
                  const std::vector<SpaNetSample>& val_set, const TrainConfig& cfg);

void write_loss_history(const std::filesystem::path& path, const TrainResult& result);

// ---- verification ---------------------------------------------------------

struct GradientCheckOptions {
  std::size_t samples = 200;
  double step = 1e-3;
  std::uint64_t seed = 1234;
  /// Relative error is |a - n| / max(|a|, |n|, floor * max|g|), where max|g| is
  /// the largest analytic gradient entry over the whole model.
  double floor = 1e-6;
};

struct GradientCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  /// Worst relative error per parameter tensor (every tensor is sampled).
  std::vector<std::pair<std::string, double>> per_tensor;
};

/// Compares the analytic gradient of the squared error against fourth-order
/// central differences on randomly chosen parameter entries.
[[nodiscard]] GradientCheckResult gradient_check(const SpaNetModel& model, const SpaNetSample& sample,
                                                 const GradientCheckOptions& options = {});

// ---- ablations ------------------------------------------------------------

struct AblationVariant {
  std::string name;
  /// -1 keeps the base configuration's superpixel count.
  int superpixel_k = -1;
  bool use_pos_encoding = true;

  /// Accepts "full", "no_superpixel", "no_pos_encoding" or "k=<n>".
  [[nodiscard]] static AblationVariant parse(const std::string& text);
};

struct LabeledImages {
  std::vector<std::string> ids;
  std::vector<RgbImage> images;
  std::vector<double> targets;
};

struct AblationRecord {
  std::string variant;
  double r2 = 0;
  double plcc = 0;
  double srcc = 0;
  std::size_t n = 0;
  double final_train_loss = 0;
};

/// Trains the variant on train_set and reports metrics on eval_set.
[[nodiscard]] AblationRecord ablation_run(const AblationVariant& variant, const SpaNetConfig& base,
                                          const LabeledImages& train_set, const LabeledImages& eval_set,
                                          const TrainConfig& train_cfg, const SlicParams& slic_params = {});

[[nodiscard]] std::vector<SpaNetSample> prepare_samples(const LabeledImages& data, const SpaNetConfig& cfg,
                                                        const SlicParams& slic_params = {}, unsigned threads = 1);

// ---- checkpoints ----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "SPANET01", u32 version, config text, u32 tensor count, then per tensor:
/// name, u32 rows, u32 cols, row-major little-endian float32 values.
void save_checkpoint(const std::filesystem::path& path, const SpaNetModel& model);
[[nodiscard]] SpaNetModel load_checkpoint(const std::filesystem::path& path);

}  // namespace pqi
