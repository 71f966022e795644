#include "pqi/spanet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "pqi/csv.hpp"
#include "pqi/error.hpp"
#include "pqi/metrics.hpp"
#include "pqi/parallel.hpp"

namespace pqi {

using nn::Mat;

void TrainConfig::validate() const {
  if (epochs < 1) {
    throw InvalidArgument("train: epochs must be >= 1");
  }
  if (!(lr_min > 0.0) || !(lr_min < lr_max)) {
    throw InvalidArgument("train: need 0 < lr_min < lr_max");
  }
  if (batch_size < 1) {
    throw InvalidArgument("train: batch_size must be >= 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw InvalidArgument("train: invalid Adam hyper-parameters");
  }
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (cfg.epochs <= 1) {
    return cfg.lr_max;
  }
  const double t = static_cast<double>(std::clamp(epoch, 0, cfg.epochs - 1)) / (cfg.epochs - 1);
  return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::vector<double> predict_all(const SpaNetModel& model, const std::vector<SpaNetSample>& samples, unsigned threads) {
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) { out[i] = model.predict(samples[i].input); });
  return out;
}

double mean_squared_error(const SpaNetModel& model, const std::vector<SpaNetSample>& samples, unsigned threads) {
  if (samples.empty()) {
    throw InvalidArgument("mean_squared_error: no samples");
  }
  const auto preds = predict_all(model, samples, threads);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    acc += (preds[i] - samples[i].target) * (preds[i] - samples[i].target);
  }
  return acc / static_cast<double>(samples.size());
}

TrainResult train(SpaNetModel& model, const std::vector<SpaNetSample>& train_set,
                  const std::vector<SpaNetSample>& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) {
    throw InvalidArgument("train: empty training set");
  }
  for (const auto& s : train_set) {
    if (!std::isfinite(s.target)) {
      throw InvalidArgument("train: non-finite target for sample " + s.id);
    }
  }

  const nn::ParamLayout& layout = model.layout();
  nn::Tensors& params = model.parameters();
  nn::Tensors m = layout.zeros();
  nn::Tensors v = layout.zeros();
  nn::Tensors batch_grad = layout.zeros();
  const unsigned slots = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(cfg.batch_size)));
  std::vector<nn::Tensors> slot_grad(slots, layout.zeros());
  std::vector<double> slot_loss(slots, 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  long long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      nn::set_zero(batch_grad);
      double batch_loss = 0.0;
      // Waves of `slots` samples; each sample writes its own buffer and the
      // buffers are added in sample order.
      for (std::size_t wave = start; wave < end; wave += slots) {
        const std::size_t count = std::min<std::size_t>(slots, end - wave);
        parallel_for(count, slots, [&](std::size_t i) {
          nn::set_zero(slot_grad[i]);
          const auto& sample = train_set[order[wave + i]];
          slot_loss[i] = model.squared_error_gradient(sample.input, sample.target, slot_grad[i]);
        });
        for (std::size_t i = 0; i < count; ++i) {
          nn::add_into(batch_grad, slot_grad[i]);
          batch_loss += slot_loss[i];
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(start / static_cast<std::size_t>(cfg.batch_size)));
      }
      epoch_loss += batch_loss;

      const double inv_b = 1.0 / static_cast<double>(end - start);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < params.size(); ++t) {
        const Mat grad = batch_grad[t] * inv_b;
        m[t] = cfg.beta1 * m[t] + (1.0 - cfg.beta1) * grad;
        v[t] = cfg.beta2 * v[t] + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
        params[t].array() -= lr * (m[t].array() / bc1) / ((v[t].array() / bc2).sqrt() + cfg.adam_eps);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    rec.val_loss = val_set.empty() ? std::nan("") : mean_squared_error(model, val_set, cfg.threads);
    result.history.push_back(rec);
    if (cfg.stop_when && cfg.stop_when(rec, model)) {
      break;
    }
  }
  return result;
}

void write_loss_history(const std::filesystem::path& path, const TrainResult& result) {
  CsvTable table;
  table.header = {"epoch", "lr", "train_loss", "val_loss"};
  for (const auto& r : result.history) {
    table.rows.push_back({std::to_string(r.epoch), format_number(r.lr), format_number(r.train_loss),
                          format_number(r.val_loss)});
  }
  write_csv(path, table);
}

GradientCheckResult gradient_check(const SpaNetModel& model, const SpaNetSample& sample,
                                   const GradientCheckOptions& options) {
  SpaNetModel probe = model;
  const nn::ParamLayout& layout = probe.layout();
  nn::Tensors analytic = layout.zeros();
  probe.squared_error_gradient(sample.input, sample.target, analytic);

  double g_max = 0;
  for (const auto& g : analytic) {
    g_max = std::max(g_max, g.cwiseAbs().maxCoeff());
  }
  const double floor = std::max(options.floor * g_max, std::numeric_limits<double>::min());

  std::mt19937_64 rng(options.seed);
  std::vector<std::pair<std::size_t, nn::Index>> picks;
  for (std::size_t t = 0; t < layout.size(); ++t) {
    const auto n = layout.specs()[t].rows * layout.specs()[t].cols;
    picks.emplace_back(t, static_cast<nn::Index>(rng() % static_cast<std::uint64_t>(n)));
  }
  const auto total = static_cast<std::uint64_t>(layout.parameter_count());
  while (picks.size() < options.samples) {
    std::uint64_t flat = rng() % total;
    std::size_t t = 0;
    while (flat >= static_cast<std::uint64_t>(layout.specs()[t].rows * layout.specs()[t].cols)) {
      flat -= static_cast<std::uint64_t>(layout.specs()[t].rows * layout.specs()[t].cols);
      ++t;
    }
    picks.emplace_back(t, static_cast<nn::Index>(flat));
  }

  auto loss = [&] {
    const double e = probe.predict(sample.input) - sample.target;
    return e * e;
  };

  GradientCheckResult result;
  std::vector<double> worst(layout.size(), 0.0);
  for (const auto& [t, idx] : picks) {
    double& theta = probe.parameters()[t].data()[idx];
    const double saved = theta;
    auto at = [&](double offset) {
      theta = saved + offset;
      return loss();
    };
    const double h = options.step;
    // Fourth-order central difference.
    const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
    theta = saved;
    const double exact = analytic[t].data()[idx];
    const double denom = std::max({std::abs(exact), std::abs(numeric), floor});
    const double rel = std::abs(exact - numeric) / denom;
    worst[t] = std::max(worst[t], rel);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  for (std::size_t t = 0; t < layout.size(); ++t) {
    result.per_tensor.emplace_back(layout.specs()[t].name, worst[t]);
  }
  return result;
}

AblationVariant AblationVariant::parse(const std::string& text) {
  AblationVariant v;
  v.name = text;
  if (text == "full") {
    return v;
  }
  if (text == "no_superpixel") {
    v.superpixel_k = 0;
    return v;
  }
  if (text == "no_pos_encoding") {
    v.use_pos_encoding = false;
    return v;
  }
  if (text.rfind("k=", 0) == 0) {
    try {
      std::size_t used = 0;
      v.superpixel_k = std::stoi(text.substr(2), &used);
      if (used == text.size() - 2 && v.superpixel_k >= 0) {
        return v;
      }
    } catch (const std::exception&) {
    }
  }
  throw InvalidArgument("unknown ablation variant '" + text + "'");
}

std::vector<SpaNetSample> prepare_samples(const LabeledImages& data, const SpaNetConfig& cfg,
                                          const SlicParams& slic_params, unsigned threads) {
  if (data.images.size() != data.targets.size() || data.ids.size() != data.images.size()) {
    throw InvalidArgument("prepare_samples: ids, images and targets must align");
  }
  std::vector<SpaNetSample> out(data.images.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    out[i] = SpaNetSample{data.ids[i], prepare_input(data.images[i], cfg, slic_params), data.targets[i]};
  });
  return out;
}

AblationRecord ablation_run(const AblationVariant& variant, const SpaNetConfig& base, const LabeledImages& train_set,
                            const LabeledImages& eval_set, const TrainConfig& train_cfg,
                            const SlicParams& slic_params) {
  SpaNetConfig cfg = base;
  if (variant.superpixel_k >= 0) {
    cfg.superpixel_k = variant.superpixel_k;
  }
  cfg.use_pos_encoding = base.use_pos_encoding && variant.use_pos_encoding;
  cfg.validate();

  const auto train_samples = prepare_samples(train_set, cfg, slic_params, train_cfg.threads);
  const auto eval_samples = prepare_samples(eval_set, cfg, slic_params, train_cfg.threads);
  SpaNetModel model(cfg);
  model.initialize(train_cfg.seed);
  const TrainResult history = train(model, train_samples, {}, train_cfg);

  PairedScores scores;
  scores.predicted = predict_all(model, eval_samples, train_cfg.threads);
  for (const auto& s : eval_samples) {
    scores.target.push_back(s.target);
  }
  const MetricsReport report = evaluate(scores);
  return AblationRecord{variant.name, report.r2, report.plcc, report.srcc, report.n,
                        history.history.back().train_loss};
}

}  // namespace pqi
