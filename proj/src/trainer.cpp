#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "parallel.hpp"
#include "rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace udehaze {

namespace {

// JSON has no literal for infinities; the report schema uses the string "inf".
json json_number(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

struct SampleCache {
  TensorPtr input;      // 1x3xHxW
  TensorPtr reference;  // 1x3xHxW
  std::array<double, 3> a_cl;
  std::array<double, 3> i_mean;
};

SampleCache make_cache(const PairedSample& s, const PriorConfig& prior_cfg) {
  SampleCache c;
  c.input = image_to_tensor(s.input);
  c.reference = image_to_tensor(s.reference);
  c.a_cl = fuse_classical(s.input, prior_cfg).a_cl;
  for (int ch = 0; ch < 3; ++ch) {
    double acc = 0.0;
    for (size_t i = 0; i < s.input.pixel_count(); ++i) acc += s.input.values[i * 3 + ch];
    c.i_mean[ch] = acc / static_cast<double>(s.input.pixel_count());
  }
  return c;
}

// Assemble Nx3xHxW batches plus the per-image constants.
struct Batch {
  TensorPtr input, reference, a_cl, i_mean;
};

Batch make_batch(const std::vector<SampleCache>& cache, const std::vector<size_t>& idx) {
  const int64_t n = static_cast<int64_t>(idx.size());
  const auto& shape = cache[idx[0]].input->shape;
  const int64_t chw = shape[1] * shape[2] * shape[3];
  Batch b;
  std::vector<double> in(static_cast<size_t>(n * chw));
  std::vector<double> ref(static_cast<size_t>(n * chw));
  std::vector<double> acl(static_cast<size_t>(n * 3));
  std::vector<double> imean(static_cast<size_t>(n * 3));
  for (int64_t i = 0; i < n; ++i) {
    const SampleCache& s = cache[idx[static_cast<size_t>(i)]];
    std::copy(s.input->data.begin(), s.input->data.end(), in.begin() + i * chw);
    std::copy(s.reference->data.begin(), s.reference->data.end(), ref.begin() + i * chw);
    for (int c = 0; c < 3; ++c) {
      acl[static_cast<size_t>(i * 3 + c)] = s.a_cl[c];
      imean[static_cast<size_t>(i * 3 + c)] = s.i_mean[c];
    }
  }
  b.input = Tensor::create({n, shape[1], shape[2], shape[3]}, std::move(in));
  b.reference = Tensor::create({n, shape[1], shape[2], shape[3]}, std::move(ref));
  b.a_cl = Tensor::create({n, 3}, std::move(acl));
  b.i_mean = Tensor::create({n, 3}, std::move(imean));
  return b;
}

LossBreakdown compute_losses(const ModelOutputs& out, const Batch& batch,
                             const LossConfig& cfg, const TensorPtr& beta) {
  auto l1 = loss_l1(out.j, batch.reference);
  auto dct = loss_dct(out.j, batch.reference, cfg);
  auto fwd = loss_fwd(batch.input, out.j, out.t, out.a);
  auto a_reg = loss_a_reg(out.a, out.a_cl, batch.i_mean, cfg);
  auto beta_reg = loss_beta_reg(beta, cfg);
  return loss_total(l1, dct, fwd, a_reg, beta_reg, cfg);
}

void check_finite(const LossBreakdown& b, int epoch, int step) {
  const std::pair<const char*, double> terms[] = {
      {"l1", b.l1->item()},         {"dct", b.dct->item()},
      {"fwd", b.fwd->item()},       {"a_reg", b.a_reg->item()},
      {"beta_reg", b.beta_reg->item()}, {"total", b.total->item()}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw std::runtime_error("training aborted: loss term '" + std::string(name) +
                               "' is non-finite at epoch " + std::to_string(epoch) +
                               ", step " + std::to_string(step));
    }
  }
}

struct ValMetrics {
  double psnr_db = 0, ssim_value = 0;
};

ValMetrics validate(ModelParams& params, const std::vector<PairedSample>& samples,
                    const std::vector<SampleCache>& cache,
                    const std::vector<size_t>& val_idx) {
  params.set_requires_grad(false);
  double p = 0.0, s = 0.0;
  for (size_t i : val_idx) {
    auto out = model_forward_batch(
        params, cache[i].input,
        Tensor::create({1, 3}, {cache[i].a_cl[0], cache[i].a_cl[1], cache[i].a_cl[2]}));
    ImageRGB enhanced = tensor_to_image(*out.j);
    p += psnr(enhanced, samples[i].reference);
    s += ssim(enhanced, samples[i].reference);
  }
  params.set_requires_grad(true);
  const double n = static_cast<double>(val_idx.size());
  return {p / n, s / n};
}

json epoch_log_json(const EpochLog& e) {
  return json{{"epoch", e.epoch},
              {"l1", json_number(e.l1)},
              {"dct", json_number(e.dct)},
              {"fwd", json_number(e.fwd)},
              {"a_reg", json_number(e.a_reg)},
              {"beta_reg", json_number(e.beta_reg)},
              {"total", json_number(e.total)},
              {"val_psnr", json_number(e.val_psnr)},
              {"val_ssim", json_number(e.val_ssim)},
              {"wall_time", e.wall_time}};
}

std::string sidecar_json(const TrainConfig& cfg, const ModelParams& params, int epoch,
                         double val_psnr, double val_ssim) {
  json doc{{"config", json::parse(cfg.to_json())},
           {"epoch", epoch},
           {"val_psnr", json_number(val_psnr)},
           {"val_ssim", json_number(val_ssim)},
           {"param_count", params.parameter_count()}};
  return doc.dump(2);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction <= 0.5)) {
    throw std::invalid_argument("TrainConfig: val_fraction must lie in (0, 0.5]");
  }
  if (lr <= 0 || weight_decay < 0) {
    throw std::invalid_argument("TrainConfig: lr must be > 0 and weight_decay >= 0");
  }
  if (resize != 0 && (resize % 32 != 0)) {
    throw std::invalid_argument(
        "TrainConfig: resize must be divisible by 32 (DCT patch tiling)");
  }
  if (max_steps < 0) throw std::invalid_argument("TrainConfig: max_steps must be >= 0");
  if (base_channels < 1) {
    throw std::invalid_argument("TrainConfig: base_channels must be >= 1");
  }
}

std::string TrainConfig::to_json() const {
  json doc{{"epochs", epochs},
           {"batch_size", batch_size},
           {"lr", lr},
           {"weight_decay", weight_decay},
           {"resize", resize},
           {"seed", seed},
           {"val_fraction", val_fraction},
           {"base_channels", base_channels},
           {"max_steps", max_steps},
           {"input_dir", input_dir},
           {"reference_dir", reference_dir},
           {"out_dir", out_dir},
           {"drop_term", drop_term},
           {"quiet", quiet},
           {"lambda", loss.lambda}};
  return doc.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json doc = json::parse(text);
  TrainConfig cfg;
  cfg.epochs = doc.value("epochs", cfg.epochs);
  cfg.batch_size = doc.value("batch_size", cfg.batch_size);
  cfg.lr = doc.value("lr", cfg.lr);
  cfg.weight_decay = doc.value("weight_decay", cfg.weight_decay);
  cfg.resize = doc.value("resize", cfg.resize);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.val_fraction = doc.value("val_fraction", cfg.val_fraction);
  cfg.base_channels = doc.value("base_channels", cfg.base_channels);
  cfg.max_steps = doc.value("max_steps", cfg.max_steps);
  cfg.input_dir = doc.value("input_dir", cfg.input_dir);
  cfg.reference_dir = doc.value("reference_dir", cfg.reference_dir);
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.drop_term = doc.value("drop_term", cfg.drop_term);
  cfg.quiet = doc.value("quiet", cfg.quiet);
  if (doc.contains("lambda")) {
    auto l = doc.at("lambda");
    if (!l.is_array() || l.size() != 5) {
      throw std::invalid_argument("config: lambda must be an array of 5 weights");
    }
    for (size_t i = 0; i < 5; ++i) cfg.loss.lambda[i] = l[i].get<double>();
  }
  return cfg;
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  auto samples = load_paired_dataset(config.input_dir, config.reference_dir, config.resize);
  if (samples.empty()) {
    throw std::runtime_error("train: no paired samples found in " + config.input_dir);
  }
  if (samples.size() < 2) {
    throw std::runtime_error("train: need at least 2 samples to hold out validation");
  }

  // Last fraction of the filename-sorted set is the validation split.
  const size_t n = samples.size();
  const size_t val_count = std::max<size_t>(
      1, static_cast<size_t>(std::floor(config.val_fraction * static_cast<double>(n))));
  const size_t train_count = n - val_count;

  std::vector<SampleCache> cache(n);
  parallel_for(static_cast<int64_t>(n), [&](int64_t i) {
    cache[static_cast<size_t>(i)] = make_cache(samples[static_cast<size_t>(i)],
                                               config.prior);
  });

  std::vector<size_t> train_idx(train_count), val_idx(val_count);
  std::iota(train_idx.begin(), train_idx.end(), size_t{0});
  std::iota(val_idx.begin(), val_idx.end(), train_count);

  ModelParams params = ModelParams::init(config.base_channels, config.seed);
  AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW optimizer(params.parameters(), params.parameter_names(), opt_cfg);
  Rng shuffle_rng = Rng::derive(config.seed, 0x7368756666ULL);

  TrainResult result;
  result.best = params.clone();
  result.best_epoch = 0;
  {
    const ValMetrics v0 = validate(params, samples, cache, val_idx);
    result.best_val_psnr = v0.psnr_db;
    result.best_val_ssim = v0.ssim_value;
  }

  std::ofstream log_stream;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    log_stream.open((fs::path(config.out_dir) / "train_log.jsonl").string(),
                    std::ios::trunc);
    if (!log_stream) {
      throw std::runtime_error("train: cannot write log in " + config.out_dir);
    }
  }

  const size_t steps_per_epoch = train_count / static_cast<size_t>(config.batch_size);
  int steps = 0;
  bool stop = false;
  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(train_idx);

    EpochLog entry;
    entry.epoch = epoch;
    size_t batches = 0;
    for (size_t b = 0; b < steps_per_epoch && !stop; ++b) {
      std::vector<size_t> idx(train_idx.begin() + b * config.batch_size,
                              train_idx.begin() + (b + 1) * config.batch_size);
      Batch batch = make_batch(cache, idx);
      auto out = model_forward_batch(params, batch.input, batch.a_cl);
      LossBreakdown losses = compute_losses(out, batch, config.loss, params.beta);
      check_finite(losses, epoch, steps + 1);

      optimizer.zero_grad();
      backward(losses.total);
      optimizer.step();
      ++steps;
      ++batches;

      entry.l1 += losses.l1->item();
      entry.dct += losses.dct->item();
      entry.fwd += losses.fwd->item();
      entry.a_reg += losses.a_reg->item();
      entry.beta_reg += losses.beta_reg->item();
      entry.total += losses.total->item();
      if (config.max_steps > 0 && steps >= config.max_steps) stop = true;
    }
    if (batches == 0) {
      throw std::runtime_error("train: batch_size " + std::to_string(config.batch_size) +
                               " exceeds the training split (" +
                               std::to_string(train_count) + " samples)");
    }
    const double inv = 1.0 / static_cast<double>(batches);
    entry.l1 *= inv;
    entry.dct *= inv;
    entry.fwd *= inv;
    entry.a_reg *= inv;
    entry.beta_reg *= inv;
    entry.total *= inv;

    const ValMetrics vm = validate(params, samples, cache, val_idx);
    entry.val_psnr = vm.psnr_db;
    entry.val_ssim = vm.ssim_value;
    entry.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(entry);

    if (log_stream) {
      log_stream << epoch_log_json(entry).dump() << "\n";
      log_stream.flush();
    }
    if (!config.quiet) {
      std::cerr << "epoch " << epoch << "/" << config.epochs << "  total "
                << entry.total << "  val_psnr " << entry.val_psnr << "\n";
    }

    if (entry.val_psnr > result.best_val_psnr) {
      result.best = params.clone();
      result.best_epoch = epoch;
      result.best_val_psnr = entry.val_psnr;
      result.best_val_ssim = entry.val_ssim;
      if (!config.out_dir.empty()) {
        result.best_checkpoint_path = (fs::path(config.out_dir) / "best.udhz").string();
        save_checkpoint(result.best, result.best_checkpoint_path,
                        sidecar_json(config, result.best, epoch, entry.val_psnr,
                                     entry.val_ssim));
      }
    }
  }

  result.last = params.clone();
  result.steps_run = steps;
  if (!config.out_dir.empty()) {
    result.last_checkpoint_path = (fs::path(config.out_dir) / "last.udhz").string();
    const EpochLog* last_log = result.log.empty() ? nullptr : &result.log.back();
    save_checkpoint(result.last, result.last_checkpoint_path,
                    sidecar_json(config, result.last,
                                 last_log ? last_log->epoch : 0,
                                 last_log ? last_log->val_psnr : result.best_val_psnr,
                                 last_log ? last_log->val_ssim : result.best_val_ssim));
    if (result.best_checkpoint_path.empty()) {
      // no epoch improved on the initialized model (or epochs == 0)
      result.best_checkpoint_path = (fs::path(config.out_dir) / "best.udhz").string();
      save_checkpoint(result.best, result.best_checkpoint_path,
                      sidecar_json(config, result.best, result.best_epoch,
                                   result.best_val_psnr, result.best_val_ssim));
    }
  }
  return result;
}

TrainResult ablate(TrainConfig config, const std::string& drop_term) {
  const std::array<std::pair<const char*, size_t>, 5> terms{
      {{"l1", 0}, {"dct", 1}, {"fwd", 2}, {"a_reg", 3}, {"beta_reg", 4}}};
  bool found = false;
  for (const auto& [name, idx] : terms) {
    if (drop_term == name) {
      config.loss.lambda[idx] = 0.0;
      found = true;
      break;
    }
  }
  if (!found) {
    throw std::invalid_argument(
        "ablate: unknown term '" + drop_term +
        "' (expected one of l1, dct, fwd, a_reg, beta_reg)");
  }
  config.drop_term = drop_term;
  return train(config);
}

MetricsReport evaluate(const ModelParams& params,
                       const std::vector<PairedSample>& samples,
                       const PriorConfig& prior_cfg) {
  ModelParams frozen = params.clone();
  frozen.set_requires_grad(false);
  MetricsReport report;
  std::vector<std::pair<double, double>> metrics(samples.size());
  parallel_for(static_cast<int64_t>(samples.size()), [&](int64_t i) {
    const PairedSample& s = samples[static_cast<size_t>(i)];
    auto out = model_forward(frozen, s.input, prior_cfg);
    ImageRGB enhanced = tensor_to_image(*out.j);
    metrics[static_cast<size_t>(i)] = {psnr(enhanced, s.reference),
                                       ssim(enhanced, s.reference)};
  });
  for (size_t i = 0; i < samples.size(); ++i) {
    report.add(samples[i].id, metrics[i].first, metrics[i].second);
  }
  report.finalize();
  return report;
}

MetricsReport evaluate_dirs(const ModelParams& params, const std::string& input_dir,
                            const std::string& reference_dir, int resize,
                            const PriorConfig& prior_cfg) {
  auto samples = load_paired_dataset(input_dir, reference_dir, resize);
  if (samples.empty()) {
    throw std::runtime_error("evaluate: no paired samples found in " + input_dir);
  }
  return evaluate(params, samples, prior_cfg);
}

std::vector<double> gradient_probe(ModelParams& params,
                                   const std::vector<PairedSample>& samples,
                                   const TrainConfig& config) {
  if (samples.empty()) throw std::invalid_argument("gradient_probe: empty batch");
  std::vector<SampleCache> cache(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) cache[i] = make_cache(samples[i], config.prior);
  std::vector<size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  Batch batch = make_batch(cache, idx);

  for (auto& p : params.parameters()) p->zero_grad();
  auto out = model_forward_batch(params, batch.input, batch.a_cl);
  LossBreakdown losses = compute_losses(out, batch, config.loss, params.beta);
  backward(losses.total);

  std::vector<double> norms;
  for (const auto& p : params.parameters()) {
    double acc = 0.0;
    if (p->grad.size() == p->data.size()) {
      for (double g : p->grad) acc += std::fabs(g);
    }
    norms.push_back(acc);
  }
  return norms;
}

std::string TrainResult::report_json() const {
  json doc{{"best_epoch", best_epoch},
           {"best_val_psnr", json_number(best_val_psnr)},
           {"best_val_ssim", json_number(best_val_ssim)},
           {"steps_run", steps_run},
           {"epochs_run", log.size()},
           {"param_count", best.parameter_count()},
           {"beta", last.beta->data}};
  if (!best_checkpoint_path.empty()) doc["best_checkpoint"] = best_checkpoint_path;
  if (!last_checkpoint_path.empty()) doc["last_checkpoint"] = last_checkpoint_path;
  json epochs = json::array();
  for (const auto& e : log) epochs.push_back(epoch_log_json(e));
  doc["epochs"] = epochs;
  return doc.dump(2);
}

std::string metrics_report_json(const MetricsReport& report) {
  json images = json::array();
  for (size_t i = 0; i < report.ids.size(); ++i) {
    images.push_back({{"id", report.ids[i]},
                      {"psnr", json_number(report.psnr_values[i])},
                      {"ssim", json_number(report.ssim_values[i])}});
  }
  json doc{{"mean_psnr", json_number(report.mean_psnr)},
           {"mean_ssim", json_number(report.mean_ssim)},
           {"images", images}};
  return doc.dump(2);
}

}  // namespace udehaze
