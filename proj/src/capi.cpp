#include "semlens/semlens.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

#include "synthvid/generator.hpp"
#include "synthvid/image_io.hpp"
#include "train/selftest.hpp"
#include "train/trainer.hpp"

using namespace semlens;

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

// Runs fn, mapping the exception taxonomy onto the stable exit-code contract.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SLZ_OK;
  } catch (const ValidationError& e) {
    return fail(SLZ_ERR_VALIDATION, e.what());
  } catch (const RuntimeFailure& e) {
    return fail(SLZ_ERR_RUNTIME, e.what());
  } catch (const std::exception& e) {
    return fail(SLZ_ERR_RUNTIME, e.what());
  }
}

RunConfig load_config(const char* config_path, int64_t seed) {
  RunConfig cfg = config_path ? RunConfig::from_file(config_path) : RunConfig();
  if (seed >= 0) cfg.set("train.seed", std::to_string(seed));
  return cfg;
}

void require(const void* p, const char* what) {
  if (!p) throw ValidationError(std::string(what) + " must not be NULL");
}

}  // namespace

struct slz_model {
  train::Model impl;
  explicit slz_model(const RunConfig& cfg) : impl(cfg) {}
};

namespace {

slz_model* open_model(const RunConfig& cfg, const char* checkpoint_path, int force) {
  auto model = std::make_unique<slz_model>(cfg);
  if (checkpoint_path) {
    CheckpointData ckpt = load_checkpoint(checkpoint_path);
    if (!force && ckpt.config_sha_hex != cfg.sha256_hex())
      throw ValidationError("checkpoint was written for a different config (hash " +
                            ckpt.config_sha_hex + " vs " + cfg.sha256_hex() +
                            "); pass force to load anyway");
    apply_checkpoint(ckpt, model->impl.ps);
  }
  return model.release();
}

vid::VideoClip find_clip(const std::string& dataset_dir, const RunConfig& cfg,
                         const std::string& clip_id) {
  const vid::Degradation tag = vid::parse_degradation(cfg.get_str("degradation.mode"));
  for (const auto& entry : vid::read_manifest(dataset_dir))
    if (entry.clip_id == clip_id) return vid::load_clip(dataset_dir, entry, tag);
  throw ValidationError("clip '" + clip_id + "' not found in " + dataset_dir +
                        "/manifest.tsv");
}

int resolve_t_ref(const vid::VideoClip& clip, int t_ref) {
  if (t_ref < 0) return clip.frames() / 2;
  if (t_ref >= clip.frames())
    throw ValidationError("t_ref " + std::to_string(t_ref) + " out of range for a " +
                          std::to_string(clip.frames()) + "-frame clip");
  return t_ref;
}

void infer_one(const train::Model& model, const vid::VideoClip& clip,
               const std::string& clip_id, int t_ref, const std::string& out_dir) {
  const int t = resolve_t_ref(clip, t_ref);
  num::Tensor sr = model.infer(clip, t);
  num::Tensor bic = vid::bicubic_resize(clip.lr_frames[static_cast<size_t>(t)],
                                        clip.lr_h * clip.scale, clip.lr_w * clip.scale);
  vid::write_ppm(sr, out_dir + "/" + clip_id + "_sr.ppm");
  vid::write_ppm(bic, out_dir + "/" + clip_id + "_bicubic.ppm");
}

void attribute_one(const train::Model& model, const vid::VideoClip& clip, int t_ref,
                   int64_t y0, int64_t x0, int64_t ph, int64_t pw,
                   const std::string& out_dir) {
  const int t = resolve_t_ref(clip, t_ref);
  const int64_t sh = clip.lr_h * clip.scale, sw = clip.lr_w * clip.scale;
  if (ph < 0) ph = sh / 2;
  if (pw < 0) pw = sw / 2;
  if (y0 < 0) y0 = (sh - ph) / 2;
  if (x0 < 0) x0 = (sw - pw) / 2;
  auto maps = train::attribute(model, clip, t, y0, x0, ph, pw);
  for (size_t i = 0; i < maps.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "/attribution_%02zu.pgm", i);
    vid::write_pgm(maps[i], out_dir + name);
  }
}

}  // namespace

extern "C" {

const char* slz_last_error(void) { return g_last_error.c_str(); }

int slz_gen_data(const char* config_path, int64_t seed, const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    RunConfig cfg = load_config(config_path, seed);
    vid::make_dataset(train::dataset_params(cfg),
                      static_cast<uint64_t>(cfg.get_int("train.seed")), out_dir);
  });
}

int slz_train(const char* config_path, int64_t seed, const char* dataset_dir,
              const char* out_dir) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir");
    require(out_dir, "out_dir");
    train::train_run(load_config(config_path, seed), dataset_dir, out_dir);
  });
}

int slz_eval(const char* config_path, int64_t seed, const char* checkpoint_path,
             int force, const char* dataset_dir, const char* out_csv) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir");
    require(out_csv, "out_csv");
    RunConfig cfg = load_config(config_path, seed);
    std::unique_ptr<slz_model> model(open_model(cfg, checkpoint_path, force));
    std::vector<std::string> ids;
    auto clips = train::load_split(dataset_dir, cfg, "val", &ids);
    if (clips.empty()) clips = train::load_split(dataset_dir, cfg, "train", &ids);
    if (clips.empty()) throw ValidationError("dataset has no clips: " + std::string(dataset_dir));
    vid::write_file_atomic(out_csv,
                           train::metrics_csv(train::evaluate_clips(model->impl, clips, ids)));
  });
}

int slz_infer(const char* config_path, int64_t seed, const char* checkpoint_path,
              int force, const char* dataset_dir, const char* clip_id, int t_ref,
              const char* out_dir) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir");
    require(out_dir, "out_dir");
    RunConfig cfg = load_config(config_path, seed);
    std::unique_ptr<slz_model> model(open_model(cfg, checkpoint_path, force));
    std::filesystem::create_directories(out_dir);
    if (clip_id) {
      infer_one(model->impl, find_clip(dataset_dir, cfg, clip_id), clip_id, t_ref, out_dir);
      return;
    }
    const vid::Degradation tag = vid::parse_degradation(cfg.get_str("degradation.mode"));
    bool any = false;
    for (const auto& entry : vid::read_manifest(dataset_dir)) {
      if (entry.split != "val") continue;
      infer_one(model->impl, vid::load_clip(dataset_dir, entry, tag), entry.clip_id, t_ref,
                out_dir);
      any = true;
    }
    if (!any) throw ValidationError("dataset has no val clips; pass a clip id");
  });
}

int slz_attribute(const char* config_path, int64_t seed, const char* checkpoint_path,
                  int force, const char* dataset_dir, const char* clip_id, int t_ref,
                  int64_t y0, int64_t x0, int64_t ph, int64_t pw, const char* out_dir) {
  return guarded([&] {
    require(dataset_dir, "dataset_dir");
    require(out_dir, "out_dir");
    RunConfig cfg = load_config(config_path, seed);
    std::unique_ptr<slz_model> model(open_model(cfg, checkpoint_path, force));
    std::filesystem::create_directories(out_dir);
    std::string id;
    if (clip_id) {
      id = clip_id;
    } else {
      for (const auto& entry : vid::read_manifest(dataset_dir))
        if (entry.split == "val") {
          id = entry.clip_id;
          break;
        }
      if (id.empty()) throw ValidationError("dataset has no val clips; pass a clip id");
    }
    attribute_one(model->impl, find_clip(dataset_dir, cfg, id), t_ref, y0, x0, ph, pw,
                  out_dir);
  });
}

int slz_selftest(int corrupt_softmax, char* report, size_t report_len) {
  std::ostringstream os;
  train::SelftestOptions opt;
  opt.corrupt_softmax = corrupt_softmax != 0;
  bool ok = false;
  int code = guarded([&] { ok = train::run_selftest(os, opt); });
  if (report && report_len > 0) {
    const std::string text = os.str();
    const size_t n = std::min(report_len - 1, text.size());
    std::memcpy(report, text.data(), n);
    report[n] = '\0';
  }
  if (code != SLZ_OK) return code;
  if (!ok) return fail(SLZ_ERR_RUNTIME, "selftest reported failures");
  return SLZ_OK;
}

slz_model* slz_model_open(const char* config_path, int64_t seed,
                          const char* checkpoint_path, int force) {
  slz_model* out = nullptr;
  guarded([&] { out = open_model(load_config(config_path, seed), checkpoint_path, force); });
  return out;
}

int slz_model_infer_clip(slz_model* model, const char* dataset_dir, const char* clip_id,
                         int t_ref, const char* out_dir) {
  return guarded([&] {
    require(model, "model");
    require(dataset_dir, "dataset_dir");
    require(clip_id, "clip_id");
    require(out_dir, "out_dir");
    std::filesystem::create_directories(out_dir);
    infer_one(model->impl, find_clip(dataset_dir, model->impl.cfg, clip_id), clip_id, t_ref,
              out_dir);
  });
}

int slz_model_attribute(slz_model* model, const char* dataset_dir, const char* clip_id,
                        int t_ref, int64_t y0, int64_t x0, int64_t ph, int64_t pw,
                        const char* out_dir) {
  return guarded([&] {
    require(model, "model");
    require(dataset_dir, "dataset_dir");
    require(clip_id, "clip_id");
    require(out_dir, "out_dir");
    std::filesystem::create_directories(out_dir);
    attribute_one(model->impl, find_clip(dataset_dir, model->impl.cfg, clip_id), t_ref, y0,
                  x0, ph, pw, out_dir);
  });
}

int64_t slz_model_param_count(const slz_model* model) {
  return model ? model->impl.ps.total_count() : 0;
}

void slz_model_close(slz_model* model) { delete model; }

}  // extern "C"
