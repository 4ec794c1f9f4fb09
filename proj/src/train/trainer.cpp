#include "train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "synthvid/image_io.hpp"
#include "train/optim.hpp"

namespace semlens::train {

using num::Tensor;

Model::Model(const RunConfig& cfg_)
    : cfg(cfg_),
      dims(ModelDims::from_config(cfg_)),
      rng(static_cast<uint64_t>(cfg_.get_int("train.seed"))),
      learned_extractor([&] {
        const std::string& mode = cfg_.get_str("train.extractor_mode");
        if (mode != "oracle" && mode != "learned")
          throw ValidationError("train.extractor_mode must be 'oracle' or 'learned'");
        return mode == "learned";
      }()),
      extractor(ps, dims, rng),
      enhancer(ps, dims, rng) {}

sem::SemanticBundle Model::bundle_for(const vid::VideoClip& clip,
                                      sem::SemanticBundle* full) const {
  sem::SemanticBundle b =
      learned_extractor ? extractor.learned_bundle(clip.lr_frames) : extractor.oracle_bundle(clip);
  if (full) *full = b;
  return extractor.compress(b);
}

Tensor Model::infer(const vid::VideoClip& clip, int t_ref) const {
  return enhancer.forward_full(clip.lr_frames, bundle_for(clip), t_ref);
}

vid::DatasetParams dataset_params(const RunConfig& cfg) {
  vid::DatasetParams p;
  p.n_clips = static_cast<int>(cfg.get_int("data.n_clips"));
  p.lr_h = cfg.get_int("data.lr_h");
  p.lr_w = cfg.get_int("data.lr_w");
  p.frames = static_cast<int>(cfg.get_int("data.frames"));
  p.scale = static_cast<int>(cfg.get_int("data.scale"));
  p.num_instances = static_cast<int>(cfg.get_int("data.num_instances"));
  p.val_every = static_cast<int>(cfg.get_int("data.val_every"));
  p.degradation.mode = vid::parse_degradation(cfg.get_str("degradation.mode"));
  p.degradation.sigma = cfg.get_double("degradation.sigma");
  p.degradation.scale = p.scale;
  return p;
}

std::vector<vid::VideoClip> load_split(const std::string& dataset_dir, const RunConfig& cfg,
                                       const std::string& split, std::vector<std::string>* ids) {
  const vid::Degradation tag = vid::parse_degradation(cfg.get_str("degradation.mode"));
  std::vector<vid::VideoClip> clips;
  for (const auto& entry : vid::read_manifest(dataset_dir)) {
    if (entry.split != split) continue;
    clips.push_back(vid::load_clip(dataset_dir, entry, tag));
    if (ids) ids->push_back(entry.clip_id);
  }
  return clips;
}

TrainResult train_run(const RunConfig& cfg, const std::string& dataset_dir,
                      const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  Model model(cfg);

  std::vector<std::string> train_ids, val_ids;
  std::vector<vid::VideoClip> train_clips = load_split(dataset_dir, cfg, "train", &train_ids);
  std::vector<vid::VideoClip> val_clips = load_split(dataset_dir, cfg, "val", &val_ids);
  if (train_clips.empty()) throw ValidationError("train: dataset has no train clips");
  if (val_clips.empty()) {
    val_clips = train_clips;
    val_ids = train_ids;
  }

  const int64_t steps = cfg.get_int("train.steps");
  const int64_t patch = cfg.get_int("train.patch");
  const double eps = cfg.get_double("train.eps");
  const double lambda_mask = cfg.get_double("train.lambda_mask");
  const int64_t eval_every = cfg.get_int("train.eval_every");
  const int64_t ckpt_every = cfg.get_int("train.checkpoint_every");
  AdamWConfig adam;
  adam.lr = cfg.get_double("train.lr");
  adam.beta1 = cfg.get_double("train.beta1");
  adam.beta2 = cfg.get_double("train.beta2");
  adam.weight_decay = cfg.get_double("train.weight_decay");
  const double lr0 = adam.lr, lr_min = cfg.get_double("train.lr_min");

  OptimMoments opt;
  TrainResult result;
  std::ostringstream log;
  log.setf(std::ios::fixed);
  log.precision(9);

  for (int64_t step = 0; step < steps; ++step) {
    adam.lr = cosine_lr(static_cast<uint64_t>(step), static_cast<uint64_t>(steps), lr0, lr_min);
    const vid::VideoClip& src =
        train_clips[static_cast<size_t>(model.rng.uniform_int(0, static_cast<int64_t>(train_clips.size()) - 1))];
    vid::VideoClip clip = src;
    if (src.lr_h > patch || src.lr_w > patch) {
      const int64_t y0 = model.rng.uniform_int(0, std::max<int64_t>(0, src.lr_h - patch));
      const int64_t x0 = model.rng.uniform_int(0, std::max<int64_t>(0, src.lr_w - patch));
      clip = src.crop(y0, x0, std::min(patch, src.lr_h), std::min(patch, src.lr_w));
    }
    const int t_ref = clip.frames() / 2;

    try {
      sem::SemanticBundle full;
      sem::SemanticBundle compressed = model.bundle_for(clip, &full);
      Tensor sr = model.enhancer.forward_full(clip.lr_frames, compressed, t_ref);
      Tensor loss =
          charbonnier(sr, clip.hr_frames[static_cast<size_t>(t_ref)], eps);
      if (model.learned_extractor && lambda_mask > 0.0)
        loss = num::add(loss, num::scale(model.extractor.mask_bce_loss(full.mask_logits,
                                                                       clip.label_maps),
                                         lambda_mask));
      if (!std::isfinite(loss.item())) throw RuntimeFailure("train: non-finite loss");
      model.ps.zero_grads();
      num::backward(loss);
      adamw_step(model.ps, opt, adam);
      result.losses.push_back(loss.item());
      log << step << ",loss=" << loss.item() << ",lr=" << adam.lr << '\n';
    } catch (const RuntimeFailure& e) {
      std::ostringstream dump;
      dump << "training aborted at step " << step << "\n"
           << "error: " << e.what() << "\n"
           << "lr: " << adam.lr << "\n";
      if (!result.losses.empty()) dump << "last finite loss: " << result.losses.back() << "\n";
      vid::write_file_atomic(out_dir + "/abort_dump.txt", dump.str());
      throw;
    }

    if (eval_every > 0 && (step + 1) % eval_every == 0) {
      double mean_psnr = 0.0;
      for (const auto& r : evaluate_clips(model, val_clips, val_ids)) mean_psnr += r.psnr_db;
      mean_psnr /= static_cast<double>(val_clips.size());
      log << step << ",val_psnr=" << mean_psnr << '\n';
    }
    if (ckpt_every > 0 && (step + 1) % ckpt_every == 0 && step + 1 < steps)
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(step + 1) + ".ckpt", model.ps, opt,
                      model.rng, cfg.sha256_hex());
  }

  result.checkpoint_path = out_dir + "/model.ckpt";
  save_checkpoint(result.checkpoint_path, model.ps, opt, model.rng, cfg.sha256_hex());
  result.metrics_path = out_dir + "/metrics.csv";
  vid::write_file_atomic(result.metrics_path,
                         metrics_csv(evaluate_clips(model, val_clips, val_ids)));
  vid::write_file_atomic(out_dir + "/train_log.txt", log.str());
  return result;
}

std::vector<MetricsRecord> evaluate_clips(const Model& model,
                                          const std::vector<vid::VideoClip>& clips,
                                          const std::vector<std::string>& ids) {
  if (clips.size() != ids.size()) throw ValidationError("evaluate: id list mismatch");
  const double eps = model.cfg.get_double("train.eps");
  std::vector<MetricsRecord> out;
  for (size_t i = 0; i < clips.size(); ++i) {
    const int t_ref = clips[i].frames() / 2;
    Tensor sr = model.infer(clips[i], t_ref);
    const Tensor& hr = clips[i].hr_frames[static_cast<size_t>(t_ref)];
    Tensor sr_c = clamp01(sr);
    MetricsRecord r;
    r.clip_id = ids[i];
    r.psnr_db = psnr(sr_c, hr);
    r.ssim_val = ssim(sr_c, hr);
    r.loss = charbonnier(sr, hr, eps).item();
    out.push_back(r);
  }
  return out;
}

std::vector<Tensor> attribute(const Model& model, const vid::VideoClip& clip, int t_ref,
                              int64_t y0, int64_t x0, int64_t ph, int64_t pw) {
  vid::VideoClip traced = clip;
  for (auto& f : traced.lr_frames) f = Tensor::param(f.shape(), f.data());
  sem::SemanticBundle compressed = model.bundle_for(traced);
  Tensor sr = model.enhancer.forward_full(traced.lr_frames, compressed, t_ref);
  if (ph <= 0 || pw <= 0 || y0 < 0 || x0 < 0 || y0 + ph > sr.dim(1) || x0 + pw > sr.dim(2))
    throw ValidationError("attribute: target patch out of bounds");

  std::vector<double> ind(static_cast<size_t>(sr.numel()), 0.0);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = y0; y < y0 + ph; ++y)
      for (int64_t x = x0; x < x0 + pw; ++x)
        ind[static_cast<size_t>((c * sr.dim(1) + y) * sr.dim(2) + x)] = 1.0;
  Tensor target = num::sum(num::mul(sr, Tensor::from_data(sr.shape(), std::move(ind))));
  num::backward(target);

  std::vector<Tensor> maps;
  double peak = 0.0;
  for (auto& f : traced.lr_frames) {
    const int64_t h = f.dim(1), w = f.dim(2);
    std::vector<double> m(static_cast<size_t>(h * w), 0.0);
    if (f.has_grad()) {
      const auto& g = f.grad();
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t p = 0; p < h * w; ++p)
          m[static_cast<size_t>(p)] += std::abs(g[static_cast<size_t>(c * h * w + p)]);
    }
    for (double v : m) peak = std::max(peak, v);
    maps.push_back(Tensor::from_data({h, w}, std::move(m)));
  }
  if (peak > 0.0)
    for (auto& m : maps)
      for (auto& v : m.mutable_data()) v /= peak;
  return maps;
}

}  // namespace semlens::train
