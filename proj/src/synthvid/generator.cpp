#include "synthvid/generator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "synthvid/image_io.hpp"

namespace fs = std::filesystem;

namespace semlens::vid {

using num::Rng;
using num::Tensor;

SpriteShape parse_sprite_shape(const std::string& s) {
  if (s == "rect") return SpriteShape::Rect;
  if (s == "disc") return SpriteShape::Disc;
  if (s == "ring") return SpriteShape::Ring;
  throw ValidationError("unknown sprite shape: " + s);
}

TextureKind parse_texture(const std::string& s) {
  if (s == "stripes") return TextureKind::Stripes;
  if (s == "checker") return TextureKind::Checker;
  if (s == "noise") return TextureKind::Noise;
  throw ValidationError("unknown texture: " + s);
}

void SceneSpec::validate() const {
  if (hr_h <= 0 || hr_w <= 0 || frames <= 0) throw ValidationError("SceneSpec: bad canvas/frames");
  if (hr_h % scale != 0 || hr_w % scale != 0)
    throw ValidationError("SceneSpec: canvas not divisible by scale");
  if (sprites.empty()) throw ValidationError("SceneSpec: at least one sprite required");
  for (const auto& sp : sprites) {
    if (sp.size <= 0 || sp.size >= static_cast<double>(std::min(hr_h, hr_w)))
      throw ValidationError("SceneSpec: sprite size must fit the canvas");
    // >= 50% of the sprite's bounding box must stay on-canvas in every frame
    for (int t = 0; t < frames; ++t) {
      const double cx = sp.x0 + sp.vx * t, cy = sp.y0 + sp.vy * t;
      const double half = sp.size / 2.0;
      const double ox = std::max(0.0, std::min(cx + half, static_cast<double>(hr_w)) -
                                          std::max(cx - half, 0.0));
      const double oy = std::max(0.0, std::min(cy + half, static_cast<double>(hr_h)) -
                                          std::max(cy - half, 0.0));
      if (ox * oy < 0.5 * sp.size * sp.size)
        throw ValidationError("SceneSpec: sprite leaves canvas (>50%) at frame " +
                              std::to_string(t));
    }
  }
}

namespace {

// Order-free hash noise so texture lookups do not depend on evaluation order.
double hash_noise(uint64_t seed, int64_t a, int64_t b, int64_t c) {
  uint64_t h = seed;
  h ^= static_cast<uint64_t>(a) * 0x9E3779B97F4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h ^= static_cast<uint64_t>(b) * 0xC2B2AE3D27D4EB4FULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  h ^= static_cast<uint64_t>(c) * 0x165667B19E3779F9ULL;
  h ^= h >> 31;
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

struct SpriteStyle {
  double base[3];
  double stripe_period;
  double stripe_angle;
  double phase;
  double checker_cell;
  uint64_t noise_seed;
};

double texture_value(TextureKind kind, const SpriteStyle& st, double lx, double ly, int ch) {
  switch (kind) {
    case TextureKind::Stripes: {
      const double u = std::cos(st.stripe_angle) * lx + std::sin(st.stripe_angle) * ly;
      const double v = 0.5 + 0.5 * std::sin(6.283185307179586 * u / st.stripe_period + st.phase);
      return st.base[ch] * (0.35 + 0.65 * v);
    }
    case TextureKind::Checker: {
      const int64_t cx = static_cast<int64_t>(std::floor(lx / st.checker_cell));
      const int64_t cy = static_cast<int64_t>(std::floor(ly / st.checker_cell));
      return ((cx + cy) & 1) ? st.base[ch] : st.base[ch] * 0.35;
    }
    case TextureKind::Noise: {
      const int64_t cx = static_cast<int64_t>(std::floor(lx / 2.0));
      const int64_t cy = static_cast<int64_t>(std::floor(ly / 2.0));
      return st.base[ch] * (0.3 + 0.7 * hash_noise(st.noise_seed, cx, cy, ch));
    }
  }
  return 0.0;
}

bool inside_sprite(const SpriteSpec& sp, double dx, double dy) {
  const double half = sp.size / 2.0;
  switch (sp.shape) {
    case SpriteShape::Rect:
      return std::abs(dx) <= half && std::abs(dy) <= half;
    case SpriteShape::Disc:
      return dx * dx + dy * dy <= half * half;
    case SpriteShape::Ring: {
      const double r2 = dx * dx + dy * dy;
      const double inner = half / 2.0;
      return r2 <= half * half && r2 >= inner * inner;
    }
  }
  return false;
}

double snap8(double v) {
  v = std::min(1.0, std::max(0.0, v));
  return std::floor(v * 255.0 + 0.5) / 255.0;
}

SpriteStyle draw_style(Rng& rng) {
  SpriteStyle st;
  for (int c = 0; c < 3; ++c) st.base[c] = rng.uniform(0.35, 1.0);
  st.stripe_period = rng.uniform(6.0, 14.0);
  st.stripe_angle = rng.uniform(0.0, 3.141592653589793);
  st.phase = rng.uniform(0.0, 6.283185307179586);
  st.checker_cell = rng.uniform(4.0, 9.0);
  st.noise_seed = rng.next_u64();
  return st;
}

}  // namespace

VideoClip GenerateClipImpl(const SceneSpec& spec, const DegradationConfig& cfg, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  SpriteStyle bg_style = draw_style(rng);
  std::vector<SpriteStyle> styles;
  styles.reserve(spec.sprites.size());
  for (size_t i = 0; i < spec.sprites.size(); ++i) styles.push_back(draw_style(rng));

  VideoClip clip;
  clip.tag = cfg.mode;
  clip.scale = spec.scale;
  clip.lr_h = spec.hr_h / spec.scale;
  clip.lr_w = spec.hr_w / spec.scale;
  clip.num_instances = static_cast<int>(spec.sprites.size());

  const int64_t sh = spec.hr_h, sw = spec.hr_w, s = spec.scale;
  for (int t = 0; t < spec.frames; ++t) {
    std::vector<double> img(static_cast<size_t>(3 * sh * sw));
    std::vector<uint16_t> hr_labels(static_cast<size_t>(sh * sw), 0);
    for (int64_t y = 0; y < sh; ++y)
      for (int64_t x = 0; x < sw; ++x) {
        double px[3];
        for (int c = 0; c < 3; ++c)
          px[c] = texture_value(spec.background, bg_style,
                                static_cast<double>(x), static_cast<double>(y), c);
        for (size_t i = 0; i < spec.sprites.size(); ++i) {
          const SpriteSpec& sp = spec.sprites[i];
          const double cx = sp.x0 + sp.vx * t, cy = sp.y0 + sp.vy * t;
          const double dx = static_cast<double>(x) + 0.5 - cx;
          const double dy = static_cast<double>(y) + 0.5 - cy;
          if (!inside_sprite(sp, dx, dy)) continue;
          const double gain =
              1.0 + sp.light_amp * std::sin(6.283185307179586 * t / spec.frames + styles[i].phase);
          for (int c = 0; c < 3; ++c)
            px[c] = gain * texture_value(sp.texture, styles[i], dx, dy, c);
          hr_labels[static_cast<size_t>(y * sw + x)] = static_cast<uint16_t>(i + 1);
        }
        for (int c = 0; c < 3; ++c)
          img[static_cast<size_t>((c * sh + y) * sw + x)] = snap8(px[c]);
      }
    Tensor hr = Tensor::from_data({3, sh, sw}, std::move(img));
    clip.hr_frames.push_back(hr);
    clip.lr_frames.push_back(degrade(hr, cfg));
    // majority vote per s x s cell; ties toward higher id
    std::vector<uint16_t> lr_labels(static_cast<size_t>(clip.lr_h * clip.lr_w), 0);
    for (int64_t y = 0; y < clip.lr_h; ++y)
      for (int64_t x = 0; x < clip.lr_w; ++x) {
        std::map<uint16_t, int> counts;
        for (int64_t dy = 0; dy < s; ++dy)
          for (int64_t dx = 0; dx < s; ++dx)
            counts[hr_labels[static_cast<size_t>((y * s + dy) * sw + x * s + dx)]]++;
        uint16_t best = 0;
        int best_count = -1;
        for (const auto& [id, n] : counts)
          if (n > best_count || (n == best_count && id > best)) {
            best = id;
            best_count = n;
          }
        lr_labels[static_cast<size_t>(y * clip.lr_w + x)] = best;
      }
    clip.label_maps.push_back(std::move(lr_labels));
  }
  return clip;
}

VideoClip generate_clip(const SceneSpec& spec, const DegradationConfig& cfg, uint64_t seed) {
  return GenerateClipImpl(spec, cfg, seed);
}

VideoClip VideoClip::crop(int64_t y0, int64_t x0, int64_t h, int64_t w) const {
  if (y0 < 0 || x0 < 0 || y0 + h > lr_h || x0 + w > lr_w)
    throw ValidationError("VideoClip::crop out of bounds");
  VideoClip out;
  out.tag = tag;
  out.scale = scale;
  out.lr_h = h;
  out.lr_w = w;
  out.num_instances = num_instances;
  const int64_t s = scale;
  for (int t = 0; t < frames(); ++t) {
    std::vector<double> lr(static_cast<size_t>(3 * h * w));
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
          lr[static_cast<size_t>((c * h + y) * w + x)] =
              lr_frames[static_cast<size_t>(t)].data()[(c * lr_h + y0 + y) * lr_w + x0 + x];
    out.lr_frames.push_back(Tensor::from_data({3, h, w}, std::move(lr)));
    std::vector<double> hr(static_cast<size_t>(3 * h * s * w * s));
    const int64_t hh = lr_h * s, hw = lr_w * s;
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < h * s; ++y)
        for (int64_t x = 0; x < w * s; ++x)
          hr[static_cast<size_t>((c * h * s + y) * w * s + x)] =
              hr_frames[static_cast<size_t>(t)].data()[(c * hh + y0 * s + y) * hw + x0 * s + x];
    out.hr_frames.push_back(Tensor::from_data({3, h * s, w * s}, std::move(hr)));
    std::vector<uint16_t> lab(static_cast<size_t>(h * w));
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        lab[static_cast<size_t>(y * w + x)] =
            label_maps[static_cast<size_t>(t)][static_cast<size_t>((y0 + y) * lr_w + x0 + x)];
    out.label_maps.push_back(std::move(lab));
  }
  return out;
}

SceneSpec random_scene(Rng& rng, const DatasetParams& params) {
  SceneSpec spec;
  spec.hr_h = params.lr_h * params.scale;
  spec.hr_w = params.lr_w * params.scale;
  spec.frames = params.frames;
  spec.scale = params.scale;
  spec.background = static_cast<TextureKind>(rng.uniform_int(0, 2));
  for (int i = 0; i < params.num_instances; ++i) {
    SpriteSpec sp;
    sp.shape = static_cast<SpriteShape>(rng.uniform_int(0, 2));
    sp.texture = static_cast<TextureKind>(rng.uniform_int(0, 2));
    const double min_ext = static_cast<double>(std::min(spec.hr_h, spec.hr_w));
    sp.size = rng.uniform(0.25 * min_ext, 0.45 * min_ext);
    // keep the center well inside the canvas across all frames
    const double vmax = 0.5 * min_ext / std::max(1, spec.frames - 1) * 0.4;
    sp.vx = rng.uniform(-vmax, vmax);
    sp.vy = rng.uniform(-vmax, vmax);
    const double margin = sp.size * 0.25;
    const double tx = sp.vx * (spec.frames - 1), ty = sp.vy * (spec.frames - 1);
    sp.x0 = rng.uniform(margin + std::max(0.0, -tx), spec.hr_w - margin - std::max(0.0, tx));
    sp.y0 = rng.uniform(margin + std::max(0.0, -ty), spec.hr_h - margin - std::max(0.0, ty));
    sp.light_amp = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.05, 0.15);
    spec.sprites.push_back(sp);
  }
  return spec;
}

std::vector<ManifestEntry> make_dataset(const DatasetParams& params, uint64_t seed,
                                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  std::string manifest;
  for (int i = 0; i < params.n_clips; ++i) {
    Rng rng(seed * 1000003ULL + static_cast<uint64_t>(i));
    SceneSpec spec = random_scene(rng, params);
    VideoClip clip = generate_clip(spec, params.degradation, rng.next_u64());
    char buf[32];
    std::snprintf(buf, sizeof buf, "clip_%03d", i);
    const std::string clip_id = buf;
    const std::string clip_dir = out_dir + "/" + clip_id;
    fs::create_directories(clip_dir);
    for (int t = 0; t < clip.frames(); ++t) {
      std::snprintf(buf, sizeof buf, "%02d", t);
      const std::string idx = buf;
      write_ppm(clip.hr_frames[static_cast<size_t>(t)], clip_dir + "/hr_" + idx + ".ppm");
      write_ppm(clip.lr_frames[static_cast<size_t>(t)], clip_dir + "/lr_" + idx + ".ppm");
      write_label_map(clip.label_maps[static_cast<size_t>(t)], clip.lr_h, clip.lr_w,
                      clip_dir + "/labels_" + idx + ".sllm");
    }
    ManifestEntry e;
    e.clip_id = clip_id;
    e.split = ((i + 1) % params.val_every == 0) ? "val" : "train";
    e.path = clip_id;
    entries.push_back(e);
    manifest += e.clip_id + "\t" + e.split + "\t" + e.path + "\n";
  }
  write_file_atomic(out_dir + "/manifest.tsv", manifest);
  return entries;
}

std::vector<ManifestEntry> read_manifest(const std::string& dataset_dir) {
  std::ifstream in(dataset_dir + "/manifest.tsv");
  if (!in) throw RuntimeFailure("cannot open manifest: " + dataset_dir + "/manifest.tsv");
  std::vector<ManifestEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!std::getline(ls, e.clip_id, '\t') || !std::getline(ls, e.split, '\t') ||
        !std::getline(ls, e.path, '\t'))
      throw ValidationError("malformed manifest line: " + line);
    entries.push_back(e);
  }
  return entries;
}

VideoClip load_clip(const std::string& dataset_dir, const ManifestEntry& entry,
                    Degradation tag) {
  const std::string dir = dataset_dir + "/" + entry.path;
  VideoClip clip;
  clip.tag = tag;
  int max_id = 0;
  for (int t = 0;; ++t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", t);
    const std::string idx = buf;
    const std::string hr_path = dir + "/hr_" + idx + ".ppm";
    if (!fs::exists(hr_path)) break;
    clip.hr_frames.push_back(read_ppm(hr_path));
    clip.lr_frames.push_back(read_ppm(dir + "/lr_" + idx + ".ppm"));
    int64_t h = 0, w = 0;
    clip.label_maps.push_back(read_label_map(dir + "/labels_" + idx + ".sllm", &h, &w));
    clip.lr_h = h;
    clip.lr_w = w;
    for (uint16_t id : clip.label_maps.back()) max_id = std::max(max_id, static_cast<int>(id));
  }
  if (clip.hr_frames.empty()) throw RuntimeFailure("no frames found in clip dir: " + dir);
  clip.scale = static_cast<int>(clip.hr_frames[0].dim(1) / clip.lr_h);
  clip.num_instances = max_id;
  return clip;
}

}  // namespace semlens::vid
