#include "train/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "enhancer/enhancer.hpp"
#include "image_align/image_align.hpp"
#include "model/checkpoint.hpp"
#include "model/config.hpp"
#include "train/metrics.hpp"

namespace semlens::train {

using num::Rng;
using num::Tensor;

namespace {

Tensor random_t(Rng& rng, const num::Shape& s) {
  std::vector<double> v(static_cast<size_t>(num::shape_numel(s)));
  for (auto& x : v) x = rng.normal();
  return Tensor::from_data(s, v);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace

bool run_selftest(std::ostream& os, const SelftestOptions& opt) {
  bool all = true;
  auto check = [&](const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string note;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    os << (ok ? "PASS " : "FAIL ") << name << note << "\n";
    all = all && ok;
  };

  check("softmax rows sum to 1", [&] {
    Rng rng(101);
    Tensor a = num::softmax_lastdim(random_t(rng, {6, 5}));
    std::vector<double> rows = a.data();
    if (opt.corrupt_softmax) rows[3] += 1e-3;
    for (int64_t r = 0; r < 6; ++r) {
      double s = 0.0;
      for (int64_t c = 0; c < 5; ++c) s += rows[static_cast<size_t>(r * 5 + c)];
      if (std::abs(s - 1.0) > 1e-9) return false;
    }
    return true;
  });

  check("matmul gradient vs finite differences", [&] {
    Rng rng(102);
    Tensor a = Tensor::param({3, 4}, random_t(rng, {3, 4}).data());
    Tensor b = random_t(rng, {4, 2});
    Tensor loss = num::mean(num::mul(num::matmul(a, b), num::matmul(a, b)));
    num::backward(loss);
    double err = num::finite_diff_check(
        [&](const std::vector<double>& v) {
          Tensor t = Tensor::from_data({3, 4}, v);
          return num::mean(num::mul(num::matmul(t, b), num::matmul(t, b))).item();
        },
        a, a.grad());
    return err <= 1e-6;
  });

  check("conv2d gradient vs finite differences", [&] {
    Rng rng(103);
    Tensor x = Tensor::param({2, 4, 4}, random_t(rng, {2, 4, 4}).data());
    Tensor w = random_t(rng, {3, 2, 3, 3});
    Tensor b = random_t(rng, {3});
    Tensor loss = num::mean(num::mul(num::conv2d(x, w, b), num::conv2d(x, w, b)));
    num::backward(loss);
    double err = num::finite_diff_check(
        [&](const std::vector<double>& v) {
          Tensor t = Tensor::from_data({2, 4, 4}, v);
          return num::mean(num::mul(num::conv2d(t, w, b), num::conv2d(t, w, b))).item();
        },
        x, x.grad());
    return err <= 1e-6;
  });

  check("masked attention puts zero weight on -inf entries", [&] {
    Rng rng(104);
    std::vector<uint16_t> lref(16, 1), lsup(16, 2);
    lsup[5] = 1;
    align::WindowSpec spec{.radius = 1};
    Tensor mask = align::build_attention_mask(lref, lsup, 4, 4, spec);
    Tensor attn;
    align::masked_local_attention(random_t(rng, {2, 4, 4}), random_t(rng, {2, 4, 4}), mask,
                                  spec, align::AlignWeights::identity(2), &attn);
    const double ninf = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < attn.data().size(); ++i)
      if (mask.data()[i] == ninf && attn.data()[i] != 0.0) return false;
    return true;
  });

  check("gps modulation is the identity at zero init", [&] {
    ParamStore ps;
    Rng rng(105);
    space::GpsWeights w(ps, "g", 3, rng);
    Tensor f = random_t(rng, {3, 5, 5});
    Tensor out = space::gps_modulate(f, space::gps_extend(Tensor::full({3}, 0.3), f), w);
    return max_abs_diff(out, f) == 0.0;
  });

  check("mfsab block is the identity at init", [&] {
    ParamStore ps;
    Rng rng(106);
    ModelDims d;
    d.C = 4;
    d.win = 2;
    enh::MfsabBlock blk(ps, "m", d, true, rng);
    Tensor f = random_t(rng, {4, 5, 5});
    auto out = blk.forward({f});
    return max_abs_diff(out[0], f) == 0.0;
  });

  check("forward_full equals bicubic x4 at init", [&] {
    ParamStore ps;
    Rng rng(107);
    ModelDims d;
    d.C = 4;
    d.win = 4;
    d.heads = 2;
    d.blocks = 1;
    d.radius = 1;
    d.N_v = 2;
    enh::Enhancer model(ps, d, rng);
    sem::SemanticBundle b;
    b.width = d.C;
    b.h = 8;
    b.w = 8;
    std::vector<Tensor> lr;
    for (int t = 0; t < 2; ++t) {
      std::vector<double> v(static_cast<size_t>(3 * 64));
      for (auto& x : v) x = rng.uniform();
      lr.push_back(Tensor::from_data({3, 8, 8}, v));
      b.global_tokens.push_back(random_t(rng, {d.C}));
      b.label_maps.emplace_back(64, 0);
    }
    b.video_tokens = random_t(rng, {d.N_v, d.C});
    b.background_token = random_t(rng, {d.C});
    Tensor sr = model.forward_full(lr, b, 0);
    return max_abs_diff(sr, vid::bicubic_resize(lr[0], 32, 32)) == 0.0;
  });

  check("checkpoint round trip is bit exact", [&] {
    ParamStore ps;
    Rng rng(108);
    ps.uniform_fan_in("a.w", {3, 4}, 4, rng);
    ps.zeros("b.bias", {5});
    OptimMoments opt1;
    opt1.m["a.w"] = {1.0, 2.5, -0.125, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    opt1.v["a.w"] = std::vector<double>(12, 0.25);
    opt1.step = 7;
    const std::string path =
        (std::filesystem::temp_directory_path() / "semlens_selftest.ckpt").string();
    save_checkpoint(path, ps, opt1, rng, RunConfig().sha256_hex());
    CheckpointData back = load_checkpoint(path);
    std::remove(path.c_str());
    if (back.opt.step != 7 || back.opt.m["a.w"] != opt1.m["a.w"]) return false;
    return back.tensors.at("a.w").second == ps.get("a.w").data();
  });

  check("charbonnier(x,x) equals epsilon exactly", [&] {
    Rng rng(109);
    Tensor x = random_t(rng, {3, 4, 4});
    // a power-of-two epsilon keeps every partial sum and the final
    // division exact, so bit equality is the right assertion
    const double eps = 0.0009765625;  // 2^-10
    return charbonnier(x, x, eps).item() == eps;
  });

  check("psnr closed form and cap", [&] {
    Tensor a = Tensor::zeros({1, 4, 4});
    Tensor b = Tensor::full({1, 4, 4}, 0.1);
    return psnr(a, a) == 99.0 && std::abs(psnr(a, b) - 20.0) <= 1e-9;
  });

  check("ssim of identical images is 1", [&] {
    Rng rng(110);
    std::vector<double> v(static_cast<size_t>(16 * 16));
    for (auto& x : v) x = rng.uniform();
    Tensor a = Tensor::from_data({1, 16, 16}, v);
    return std::abs(ssim(a, a) - 1.0) <= 1e-12;
  });

  check("config rejects unknown keys and echoes canonically", [&] {
    RunConfig cfg = RunConfig::from_string("model.C=8\n# comment\ntrain.steps=5\n");
    if (cfg.get_int("model.C") != 8 || cfg.get_int("train.steps") != 5) return false;
    try {
      RunConfig::from_string("no.such.key=1\n");
      return false;
    } catch (const ValidationError&) {
    }
    return cfg.canonical() == RunConfig::from_string(cfg.canonical()).canonical();
  });

  return all;
}

}  // namespace semlens::train
