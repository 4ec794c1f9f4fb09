#ifndef SEMLENS_SYNTHVID_GENERATOR_HPP
#define SEMLENS_SYNTHVID_GENERATOR_HPP

#include <string>
#include <vector>

#include "numcore/tensor.hpp"
#include "synthvid/resample.hpp"

namespace semlens::vid {

enum class SpriteShape { Rect, Disc, Ring };
enum class TextureKind { Stripes, Checker, Noise };

SpriteShape parse_sprite_shape(const std::string& s);
TextureKind parse_texture(const std::string& s);

// One moving sprite. Positions/velocities are in HR pixels; instance ids are
// assigned by position in SceneSpec::sprites (1-based), later sprites occlude
// earlier ones.
struct SpriteSpec {
  SpriteShape shape = SpriteShape::Disc;
  TextureKind texture = TextureKind::Stripes;
  double size = 32.0;     // bounding extent in HR px
  double x0 = 0.0, y0 = 0.0;  // initial center
  double vx = 0.0, vy = 0.0;  // HR px per frame
  double light_amp = 0.0;     // sinusoidal lighting gain amplitude
};

struct SceneSpec {
  int64_t hr_h = 128, hr_w = 128;
  int frames = 5;
  int scale = 4;
  TextureKind background = TextureKind::Noise;
  std::vector<SpriteSpec> sprites;  // ids 1..n in order

  void validate() const;
};

struct VideoClip {
  std::vector<num::Tensor> hr_frames;            // T x [3,sH,sW], 8-bit-snapped values
  std::vector<num::Tensor> lr_frames;            // T x [3,H,W]
  std::vector<std::vector<uint16_t>> label_maps; // T x H*W instance ids at LR
  Degradation tag = Degradation::BI;
  int scale = 4;
  int64_t lr_h = 0, lr_w = 0;
  int num_instances = 0;

  int frames() const { return static_cast<int>(hr_frames.size()); }
  // Crop an LR-aligned patch (LR coords); HR frames cropped at scale times.
  VideoClip crop(int64_t y0, int64_t x0, int64_t h, int64_t w) const;
};

// Deterministic in (spec, cfg, seed). Sprites render back-to-front, topmost
// id wins the label; LR labels by per-cell majority vote, ties to higher id.
VideoClip generate_clip(const SceneSpec& spec, const DegradationConfig& cfg, uint64_t seed);

struct DatasetParams {
  int n_clips = 4;
  int64_t lr_h = 32, lr_w = 32;
  int frames = 5;
  int scale = 4;
  int num_instances = 2;
  DegradationConfig degradation;
  int val_every = 4;  // every k-th clip goes to the val split
};

struct ManifestEntry {
  std::string clip_id;
  std::string split;  // "train" | "val"
  std::string path;   // clip directory relative to dataset root
};

// Writes clip_XXX/ directories (hr_NN.ppm, lr_NN.ppm, labels_NN.sllm) and a
// manifest.tsv. Byte-identical for identical (params, seed).
std::vector<ManifestEntry> make_dataset(const DatasetParams& params, uint64_t seed,
                                        const std::string& out_dir);

std::vector<ManifestEntry> read_manifest(const std::string& dataset_dir);
VideoClip load_clip(const std::string& dataset_dir, const ManifestEntry& entry,
                    Degradation tag);

// Draws a randomized SceneSpec within desk-scale ranges.
SceneSpec random_scene(num::Rng& rng, const DatasetParams& params);

}  // namespace semlens::vid

#endif
