#include "pqi/spanet.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <string_view>

#include "pqi/error.hpp"

namespace pqi {

using nn::Mat;
using nn::RowVec;

// ---- config ---------------------------------------------------------------

void SpaNetConfig::validate() const {
  if (patch_side < 1 || image_side < patch_side || image_side % patch_side != 0) {
    throw InvalidArgument("spanet: image_side must be a positive multiple of patch_side");
  }
  if (heads < 1 || token_dim < 1 || token_dim % heads != 0) {
    throw InvalidArgument("spanet: heads must divide token_dim");
  }
  if (layers < 0 || ffn_dim < 1) {
    throw InvalidArgument("spanet: layers must be >= 0 and ffn_dim >= 1");
  }
  if (branch_out != 1024) {
    throw InvalidArgument("spanet: branch output width is fixed at 1024");
  }
  if (head_hidden != 18) {
    throw InvalidArgument("spanet: regression hidden width is fixed at 18");
  }
  if (superpixel_k < 0) {
    throw InvalidArgument("spanet: superpixel_k must be >= 0");
  }
  if (superpixel_feat != kSuperpixelFeatureDim) {
    throw InvalidArgument("spanet: superpixel features are mean RGB + std RGB (6)");
  }
  if (!(init_std >= 0.0) || !(norm_eps > 0.0)) {
    throw InvalidArgument("spanet: init_std must be >= 0 and norm_eps > 0");
  }
}

SpaNetConfig SpaNetConfig::desk_scale() {
  SpaNetConfig cfg;
  cfg.token_dim = 32;
  cfg.ffn_dim = 64;
  return cfg;
}

std::string SpaNetConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "image_side=" << image_side << '\n'
      << "patch_side=" << patch_side << '\n'
      << "heads=" << heads << '\n'
      << "layers=" << layers << '\n'
      << "token_dim=" << token_dim << '\n'
      << "ffn_dim=" << ffn_dim << '\n'
      << "branch_out=" << branch_out << '\n'
      << "superpixel_k=" << superpixel_k << '\n'
      << "superpixel_feat=" << superpixel_feat << '\n'
      << "head_hidden=" << head_hidden << '\n'
      << "use_pos_encoding=" << (use_pos_encoding ? 1 : 0) << '\n'
      << "normalize_branches=" << (normalize_branches ? 1 : 0) << '\n'
      << "activation=" << (activation == nn::Activation::Gelu ? "gelu" : "identity") << '\n'
      << "fan_in_init=" << (fan_in_init ? 1 : 0) << '\n'
      << "init_std=" << init_std << '\n'
      << "norm_eps=" << norm_eps << '\n';
  return out.str();
}

SpaNetConfig SpaNetConfig::deserialize(const std::string& text) {
  SpaNetConfig cfg;
  std::istringstream in(text);
  std::string line;
  auto as_int = [](const std::string& v) {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) {
      throw std::invalid_argument(v);
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("spanet config: malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "image_side") {
        cfg.image_side = as_int(val);
      } else if (key == "patch_side") {
        cfg.patch_side = as_int(val);
      } else if (key == "heads") {
        cfg.heads = as_int(val);
      } else if (key == "layers") {
        cfg.layers = as_int(val);
      } else if (key == "token_dim") {
        cfg.token_dim = as_int(val);
      } else if (key == "ffn_dim") {
        cfg.ffn_dim = as_int(val);
      } else if (key == "branch_out") {
        cfg.branch_out = as_int(val);
      } else if (key == "superpixel_k") {
        cfg.superpixel_k = as_int(val);
      } else if (key == "superpixel_feat") {
        cfg.superpixel_feat = as_int(val);
      } else if (key == "head_hidden") {
        cfg.head_hidden = as_int(val);
      } else if (key == "use_pos_encoding") {
        cfg.use_pos_encoding = as_int(val) != 0;
      } else if (key == "normalize_branches") {
        cfg.normalize_branches = as_int(val) != 0;
      } else if (key == "activation") {
        if (val != "gelu" && val != "identity") {
          throw std::invalid_argument(val);
        }
        cfg.activation = val == "gelu" ? nn::Activation::Gelu : nn::Activation::Identity;
      } else if (key == "fan_in_init") {
        cfg.fan_in_init = as_int(val) != 0;
      } else if (key == "init_std") {
        cfg.init_std = std::stod(val);
      } else if (key == "norm_eps") {
        cfg.norm_eps = std::stod(val);
      } else {
        throw DataError("spanet config: unknown key '" + key + "'");
      }
    } catch (const std::invalid_argument&) {
      throw DataError("spanet config: bad value for '" + key + "'");
    } catch (const std::out_of_range&) {
      throw DataError("spanet config: value out of range for '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

// ---- input preparation ----------------------------------------------------

Mat patchify(const RgbImage& img, const SpaNetConfig& cfg) {
  if (img.width() != cfg.image_side || img.height() != cfg.image_side) {
    throw InvalidArgument("patchify: expected a " + std::to_string(cfg.image_side) + "x" +
                          std::to_string(cfg.image_side) + " image");
  }
  const int p = cfg.patch_side;
  const int per_side = cfg.patches_per_side();
  Mat tokens(cfg.num_patches(), cfg.patch_dim());
  for (int py = 0; py < per_side; ++py) {
    for (int px = 0; px < per_side; ++px) {
      const int t = py * per_side + px;
      for (int dy = 0; dy < p; ++dy) {
        for (int dx = 0; dx < p; ++dx) {
          const auto pixel = img.at(px * p + dx, py * p + dy);
          for (int c = 0; c < 3; ++c) {
            tokens(t, c * p * p + dy * p + dx) = pixel[c] / 255.0;
          }
        }
      }
    }
  }
  return tokens;
}

SpaNetInput prepare_input(const RgbImage& img, const SpaNetConfig& cfg, const SlicParams& slic_params) {
  cfg.validate();
  const RgbImage resized = resize_bilinear(img, cfg.image_side, cfg.image_side);
  SpaNetInput input;
  input.tokens = patchify(resized, cfg);
  if (cfg.use_superpixel()) {
    SlicParams sp = slic_params;
    sp.k_target = cfg.superpixel_k;
    const auto seg = slic(resized, sp);
    input.superpixels = pad_or_truncate(extract_features(resized, seg), cfg.superpixel_k);
  }
  return input;
}

// ---- model ----------------------------------------------------------------

SpaNetModel::SpaNetModel(const SpaNetConfig& config) : config_(config) {
  config_.validate();
  const int d = config_.token_dim;

  pixel_.patch_proj.declare(layout_, "pixel.patch_proj", config_.patch_dim(), d);
  pixel_.position = layout_.add("pixel.position", config_.num_patches(), d);
  for (int l = 0; l < config_.layers; ++l) {
    nn::Block b;
    b.act = config_.activation;
    b.declare(layout_, "pixel.block" + std::to_string(l), d, config_.ffn_dim, config_.heads);
    b.norm1.eps = b.norm2.eps = config_.norm_eps;
    pixel_.blocks.push_back(b);
  }
  pixel_.out.declare(layout_, "pixel.out", d, config_.branch_out);

  if (config_.use_superpixel()) {
    superpixel_.feature_proj.declare(layout_, "superpixel.feature_proj", config_.superpixel_feat, d);
    if (config_.use_pos_encoding) {
      superpixel_.encoding_proj.declare(layout_, "superpixel.encoding_proj", kSuperpixelEncodingDim, d);
    }
    for (int l = 0; l < config_.layers; ++l) {
      nn::Block b;
      b.act = config_.activation;
      b.declare(layout_, "superpixel.block" + std::to_string(l), d, config_.ffn_dim, config_.heads);
      b.norm1.eps = b.norm2.eps = config_.norm_eps;
      superpixel_.blocks.push_back(b);
    }
    superpixel_.out.declare(layout_, "superpixel.out", d, config_.branch_out);
  }

  head_.hidden.declare(layout_, "head.hidden", config_.fused_dim(), config_.head_hidden);
  head_.output.declare(layout_, "head.output", config_.head_hidden, 1);

  params_ = layout_.zeros();
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const std::string_view name = layout_.specs()[i].name;
    if (name.ends_with(".gain")) {
      params_[i].setOnes();
    }
  }
}

void SpaNetModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const std::string_view name = layout_.specs()[i].name;
    Mat& t = params_[i];
    if (name.ends_with(".gain")) {
      t.setOnes();
    } else if (name.ends_with(".weight") || name == "pixel.position") {
      // weights are (out, in)
      const double scale = config_.fan_in_init && name != "pixel.position"
                               ? 1.0 / std::sqrt(static_cast<double>(t.cols()))
                               : config_.init_std;
      for (nn::Index r = 0; r < t.rows(); ++r) {
        for (nn::Index c = 0; c < t.cols(); ++c) {
          t(r, c) = scale * normal(rng);
        }
      }
    } else {
      t.setZero();
    }
  }
}

Mat& SpaNetModel::parameter(const std::string& name) {
  const auto id = layout_.find(name);
  if (!id) {
    throw InvalidArgument("no parameter named " + name);
  }
  return params_[static_cast<std::size_t>(*id)];
}

const Mat& SpaNetModel::parameter(const std::string& name) const {
  return const_cast<SpaNetModel*>(this)->parameter(name);
}

void SpaNetModel::check_finite(const Mat& m, const char* where) const {
  if (!m.allFinite()) {
    throw NumericalError(std::string("non-finite activation in ") + where);
  }
}

RowVec SpaNetModel::run_pixel(const Mat& tokens, BranchCache& cache) const {
  if (tokens.rows() != config_.num_patches() || tokens.cols() != config_.patch_dim()) {
    throw InvalidArgument("pixel branch: expected " + std::to_string(config_.num_patches()) + " tokens of width " +
                          std::to_string(config_.patch_dim()));
  }
  Mat x = pixel_.patch_proj.forward(params_, tokens) + params_[pixel_.position];
  cache.blocks.resize(pixel_.blocks.size());
  for (std::size_t l = 0; l < pixel_.blocks.size(); ++l) {
    x = pixel_.blocks[l].forward(params_, x, {}, cache.blocks[l]);
  }
  check_finite(x, "pixel branch");
  cache.pooled = nn::masked_mean(x, {});
  cache.out = pixel_.out.forward(params_, cache.pooled).row(0);
  if (cache.out.size() != config_.branch_out) {
    throw InvalidArgument("pixel branch: output width mismatch");
  }
  check_finite(cache.out, "pixel branch output");
  return cache.out;
}

RowVec SpaNetModel::run_superpixel(const SuperpixelBlock& block, BranchCache& cache) const {
  if (!config_.use_superpixel()) {
    return RowVec::Zero(config_.branch_out);
  }
  if (block.rows() != config_.superpixel_k || block.features.rows() != config_.superpixel_k ||
      block.features.cols() != config_.superpixel_feat || block.encodings.rows() != config_.superpixel_k ||
      block.encodings.cols() != kSuperpixelEncodingDim) {
    throw InvalidArgument("superpixel branch: expected a " + std::to_string(config_.superpixel_feat) + "x" +
                          std::to_string(config_.superpixel_k) + " feature block");
  }
  if (block.valid_count() == 0) {
    throw InvalidArgument("superpixel branch: every superpixel is masked");
  }
  const nn::Mask mask(block.mask);
  Mat x = superpixel_.feature_proj.forward(params_, block.features);
  if (config_.use_pos_encoding) {
    x += superpixel_.encoding_proj.forward(params_, block.encodings);
  }
  for (int i = 0; i < block.rows(); ++i) {
    if (block.mask[static_cast<std::size_t>(i)] == 0) {
      x.row(i).setZero();
    }
  }
  cache.blocks.resize(superpixel_.blocks.size());
  for (std::size_t l = 0; l < superpixel_.blocks.size(); ++l) {
    x = superpixel_.blocks[l].forward(params_, x, mask, cache.blocks[l]);
  }
  cache.pooled = nn::masked_mean(x, mask);
  cache.out = superpixel_.out.forward(params_, cache.pooled).row(0);
  if (cache.out.size() != config_.branch_out) {
    throw InvalidArgument("superpixel branch: output width mismatch");
  }
  check_finite(cache.out, "superpixel branch output");
  return cache.out;
}

double SpaNetModel::run_head(const RowVec& pixel, const RowVec& superpixel, ForwardCache& cache) const {
  if (pixel.size() != config_.branch_out || superpixel.size() != config_.branch_out) {
    throw InvalidArgument("fusion: branch features must be " + std::to_string(config_.branch_out) + "-wide");
  }
  if (!pixel.allFinite() || !superpixel.allFinite()) {
    throw NumericalError("fusion: non-finite branch features");
  }
  if (config_.normalize_branches) {
    cache.pixel_std = nn::standardize(pixel, config_.norm_eps);
    cache.superpixel_std = nn::standardize(superpixel, config_.norm_eps);
  } else {
    cache.pixel_std = {pixel, 1.0};
    cache.superpixel_std = {superpixel, 1.0};
  }
  cache.fused.resize(config_.fused_dim());
  cache.fused << cache.pixel_std.z, cache.superpixel_std.z;
  cache.pre_act = head_.hidden.forward(params_, cache.fused).row(0);
  if (cache.pre_act.size() != config_.head_hidden) {
    throw InvalidArgument("fusion: hidden width mismatch");
  }
  cache.post_act = nn::activate(cache.pre_act, config_.activation).row(0);
  const Mat y = head_.output.forward(params_, cache.post_act);
  if (y.size() != 1) {
    throw InvalidArgument("fusion: output must be scalar");
  }
  cache.prediction = y(0, 0);
  if (!std::isfinite(cache.prediction)) {
    throw NumericalError("non-finite prediction");
  }
  return cache.prediction;
}

RowVec SpaNetModel::pixel_branch_forward(const Mat& tokens) const {
  BranchCache cache;
  return run_pixel(tokens, cache);
}

RowVec SpaNetModel::superpixel_branch_forward(const SuperpixelBlock& block) const {
  BranchCache cache;
  return run_superpixel(block, cache);
}

double SpaNetModel::fuse_and_regress(const RowVec& pixel, const RowVec& superpixel) const {
  ForwardCache cache;
  return run_head(pixel, superpixel, cache);
}

double SpaNetModel::predict(const SpaNetInput& input) const {
  ForwardCache cache;
  const RowVec p = run_pixel(input.tokens, cache.pixel);
  const RowVec s = run_superpixel(input.superpixels, cache.superpixel);
  return run_head(p, s, cache);
}

double SpaNetModel::squared_error_gradient(const SpaNetInput& input, double target, nn::Tensors& g,
                                           Mat* d_superpixel_features) const {
  if (g.size() != params_.size()) {
    throw InvalidArgument("gradient buffer does not match the parameter layout");
  }
  ForwardCache cache;
  const RowVec p = run_pixel(input.tokens, cache.pixel);
  const RowVec s = run_superpixel(input.superpixels, cache.superpixel);
  const double pred = run_head(p, s, cache);
  const double err = pred - target;

  // Head.
  const Mat d_y = Mat::Constant(1, 1, 2.0 * err);
  const Mat d_post = head_.output.backward(params_, cache.post_act, d_y, g);
  const Mat d_pre = nn::activate_backward(cache.pre_act, d_post, config_.activation);
  const Mat d_fused = head_.hidden.backward(params_, cache.fused, d_pre, g);
  const int b = config_.branch_out;
  RowVec d_p = d_fused.row(0).head(b);
  RowVec d_s = d_fused.row(0).tail(b);
  if (config_.normalize_branches) {
    d_p = nn::standardize_backward(cache.pixel_std, d_p);
    d_s = nn::standardize_backward(cache.superpixel_std, d_s);
  }

  // Pixel branch.
  {
    const Mat d_pooled = pixel_.out.backward(params_, cache.pixel.pooled, d_p, g);
    Mat dx = nn::masked_mean_backward(d_pooled.row(0), config_.num_patches(), {});
    for (std::size_t l = pixel_.blocks.size(); l-- > 0;) {
      dx = pixel_.blocks[l].backward(params_, cache.pixel.blocks[l], {}, dx, g);
    }
    g[pixel_.position] += dx;
    pixel_.patch_proj.backward(params_, input.tokens, dx, g, false);
  }

  // Superpixel branch.
  if (config_.use_superpixel()) {
    const auto& block = input.superpixels;
    const nn::Mask mask(block.mask);
    const Mat d_pooled = superpixel_.out.backward(params_, cache.superpixel.pooled, d_s, g);
    Mat dx = nn::masked_mean_backward(d_pooled.row(0), block.rows(), mask);
    for (std::size_t l = superpixel_.blocks.size(); l-- > 0;) {
      dx = superpixel_.blocks[l].backward(params_, cache.superpixel.blocks[l], mask, dx, g);
    }
    for (int i = 0; i < block.rows(); ++i) {
      if (block.mask[static_cast<std::size_t>(i)] == 0) {
        dx.row(i).setZero();
      }
    }
    const Mat d_features =
        superpixel_.feature_proj.backward(params_, block.features, dx, g, d_superpixel_features != nullptr);
    if (d_superpixel_features != nullptr) {
      *d_superpixel_features = d_features;
    }
    if (config_.use_pos_encoding) {
      superpixel_.encoding_proj.backward(params_, block.encodings, dx, g, false);
    }
  } else if (d_superpixel_features != nullptr) {
    d_superpixel_features->resize(0, 0);
  }

  return err * err;
}

}  // namespace pqi
