#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "synthvid/generator.hpp"
#include "train/optim.hpp"
#include "train/selftest.hpp"
#include "train/trainer.hpp"

using namespace semlens;
using num::Rng;
using num::Tensor;

namespace {

std::string tmp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("semlens_test_" + tag);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunConfig tiny_cfg(int steps, const std::string& mode = "oracle") {
  RunConfig cfg;
  cfg.set("data.lr_h", "16");
  cfg.set("data.lr_w", "16");
  cfg.set("data.frames", "3");
  cfg.set("data.n_clips", "2");
  cfg.set("data.val_every", "2");
  cfg.set("model.C", "8");
  cfg.set("model.C_s", "16");
  cfg.set("model.N_f", "2");
  cfg.set("model.N_v", "2");
  cfg.set("model.N_c", "2");
  cfg.set("model.blocks", "1");
  cfg.set("model.heads", "2");
  cfg.set("model.win", "4");
  cfg.set("model.r", "2");
  cfg.set("train.steps", std::to_string(steps));
  cfg.set("train.patch", "16");
  cfg.set("train.eval_every", "1000");
  cfg.set("train.checkpoint_every", "1000");
  cfg.set("train.extractor_mode", mode);
  return cfg;
}

Tensor random_img(Rng& rng, int64_t h, int64_t w) {
  std::vector<double> v(static_cast<size_t>(3 * h * w));
  for (auto& x : v) x = rng.uniform();
  return Tensor::from_data({3, h, w}, v);
}

}  // namespace

TEST_CASE("charbonnier values and smooth gradient") {
  Rng rng(80);
  Tensor x = random_img(rng, 5, 5);
  CHECK(std::abs(train::charbonnier(x, x, 1e-3).item() - 1e-3) <= 1e-15);
  // with a power-of-two epsilon the mean is exact, bit for bit
  CHECK(train::charbonnier(x, x, 0.0009765625).item() == 0.0009765625);

  Tensor a = Tensor::from_data({1, 1, 1}, {3.0});
  Tensor z = Tensor::zeros({1, 1, 1});
  CHECK(std::abs(train::charbonnier(a, z, 1e-9).item() - 3.0) <= 1e-8);

  // gradient at d = 0 is exactly 0 (smooth at the kink of plain L1)
  Tensor p = Tensor::param({1, 1, 1}, {0.7});
  Tensor same = Tensor::from_data({1, 1, 1}, {0.7});
  Tensor loss = train::charbonnier(p, same, 1e-3);
  num::backward(loss);
  CHECK(p.grad()[0] == 0.0);

  Tensor q = Tensor::param({2, 2, 2}, {0.1, -0.3, 0.8, 0.2, 0.9, -0.5, 0.0, 0.4});
  Tensor target = random_img(rng, 2, 2).data().size() == 12 ? Tensor::zeros({2, 2, 2})
                                                            : Tensor::zeros({2, 2, 2});
  Tensor l2 = train::charbonnier(q, target, 1e-3);
  CHECK(l2.item() >= 1e-3);
  num::backward(l2);
  double err = num::finite_diff_check(
      [&](const std::vector<double>& v) {
        return train::charbonnier(Tensor::from_data({2, 2, 2}, v), target, 1e-3).item();
      },
      q, q.grad());
  CHECK(err <= 1e-6);

  CHECK_THROWS_AS(train::charbonnier(x, a, 1e-3), ValidationError);
  CHECK_THROWS_AS(train::charbonnier(x, x, 0.0), ValidationError);
}

TEST_CASE("psnr closed forms and oracle") {
  Rng rng(81);
  Tensor a = random_img(rng, 6, 6);
  CHECK(train::psnr(a, a) == 99.0);

  Tensor b = Tensor::zeros({1, 4, 4});
  Tensor c = Tensor::full({1, 4, 4}, 0.1);
  CHECK(std::abs(train::psnr(b, c) - 20.0) <= 1e-12);

  Tensor d = random_img(rng, 6, 6);
  double mse = 0.0;
  for (size_t i = 0; i < a.data().size(); ++i) {
    const double diff = a.data()[i] - d.data()[i];
    mse += diff * diff;
  }
  mse /= static_cast<double>(a.data().size());
  CHECK(std::abs(train::psnr(a, d) - 10.0 * std::log10(1.0 / mse)) <= 1e-9);
}

TEST_CASE("ssim fixture against an independent direct-formula oracle") {
  Rng rng(82);
  std::vector<double> av(256), bv(256);
  for (auto& v : av) v = rng.uniform();
  for (size_t i = 0; i < bv.size(); ++i) bv[i] = 0.8 * av[i] + 0.1 * rng.uniform();
  Tensor a = Tensor::from_data({1, 16, 16}, av);
  Tensor b = Tensor::from_data({1, 16, 16}, bv);

  CHECK(std::abs(train::ssim(a, a) - 1.0) <= 1e-12);

  // direct 2-D windowed evaluation, no separable shortcut
  std::vector<double> win(121);
  double ws = 0.0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const double dy = y - 5.0, dx = x - 5.0;
      win[static_cast<size_t>(y * 11 + x)] = std::exp(-(dy * dy + dx * dx) / 4.5);
      ws += win[static_cast<size_t>(y * 11 + x)];
    }
  for (auto& v : win) v /= ws;
  double acc = 0.0;
  int n = 0;
  for (int y0 = 0; y0 <= 5; ++y0)
    for (int x0 = 0; x0 <= 5; ++x0) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) {
          const double wv = win[static_cast<size_t>(y * 11 + x)];
          const double xa = av[static_cast<size_t>((y0 + y) * 16 + x0 + x)];
          const double xb = bv[static_cast<size_t>((y0 + y) * 16 + x0 + x)];
          mx += wv * xa;
          my += wv * xb;
          mxx += wv * xa * xa;
          myy += wv * xb * xb;
          mxy += wv * xa * xb;
        }
      const double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
      const double c1 = 1e-4, c2 = 9e-4;
      acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
             ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++n;
    }
  CHECK(std::abs(train::ssim(a, b) - acc / n) <= 1e-9);

  // structural distinctness
  std::vector<double> inv(256);
  for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - av[i];
  CHECK(train::ssim(a, Tensor::from_data({1, 16, 16}, inv)) < 1.0);
  CHECK_THROWS_AS(train::ssim(random_img(rng, 8, 8), random_img(rng, 8, 8)), ValidationError);
}

TEST_CASE("adamw identity, first-step closed form, convergence") {
  {
    ParamStore ps;
    Rng rng(83);
    Tensor p = ps.uniform_fan_in("p", {2, 2}, 2, rng);
    const std::vector<double> before = p.data();
    OptimMoments opt;
    train::AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    p.grad();  // allocate zero gradients
    train::adamw_step(ps, opt, cfg);
    CHECK(p.data() == before);
    CHECK(opt.step == 1);
  }
  {
    ParamStore ps;
    Tensor p = ps.add("p", {1}, {1.0});
    p.grad()[0] = 1.0;
    OptimMoments opt;
    train::AdamWConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.0;
    train::adamw_step(ps, opt, cfg);
    CHECK(std::abs(p.data()[0] - (1.0 - 0.01 * (1.0 / (1.0 + cfg.eps)))) <= 1e-15);
  }
  {
    ParamStore ps;
    Tensor p = ps.add("p", {1}, {0.0});
    OptimMoments opt;
    train::AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    for (int i = 0; i < 300; ++i) {
      p.zero_grad();
      p.grad()[0] = 2.0 * (p.data()[0] - 3.0);
      train::adamw_step(ps, opt, cfg);
    }
    CHECK(std::abs(p.data()[0] - 3.0) < 1e-2);
  }
}

TEST_CASE("cosine schedule endpoints and monotone decay") {
  CHECK(train::cosine_lr(0, 100, 2e-4, 1e-6) == 2e-4);
  CHECK(std::abs(train::cosine_lr(99, 100, 2e-4, 1e-6) - 1e-6) <= 1e-18);
  double prev = 1.0;
  for (uint64_t s = 0; s < 50; ++s) {
    const double lr = train::cosine_lr(s, 50, 2e-4, 1e-6);
    CHECK(lr < prev);
    prev = lr;
  }
}

TEST_CASE("train run is deterministic and step 0 keeps the initialization") {
  RunConfig cfg = tiny_cfg(3);
  const std::string data_dir = tmp_dir("data_det");
  vid::make_dataset(train::dataset_params(cfg), 5, data_dir);

  const std::string out_a = tmp_dir("run_a"), out_b = tmp_dir("run_b");
  train::TrainResult ra = train::train_run(cfg, data_dir, out_a);
  train::TrainResult rb = train::train_run(cfg, data_dir, out_b);
  CHECK(slurp(ra.checkpoint_path) == slurp(rb.checkpoint_path));
  CHECK(slurp(ra.metrics_path) == slurp(rb.metrics_path));
  REQUIRE(ra.losses.size() == 3);

  RunConfig cfg0 = tiny_cfg(0);
  const std::string out_c = tmp_dir("run_c");
  train::TrainResult rc = train::train_run(cfg0, data_dir, out_c);
  CheckpointData ck = load_checkpoint(rc.checkpoint_path);
  train::Model fresh(cfg0);
  for (const auto& [name, t] : fresh.ps.all()) {
    REQUIRE(ck.tensors.count(name) == 1);
    CHECK(ck.tensors.at(name).second == t.data());
  }
  CHECK(ck.opt.step == 0);
}

TEST_CASE("learned extractor mode trains without error") {
  RunConfig cfg = tiny_cfg(2, "learned");
  const std::string data_dir = tmp_dir("data_learned");
  vid::make_dataset(train::dataset_params(cfg), 9, data_dir);
  const std::string out = tmp_dir("run_learned");
  train::TrainResult r = train::train_run(cfg, data_dir, out);
  CHECK(r.losses.size() == 2);
  for (double l : r.losses) CHECK(std::isfinite(l));
}

TEST_CASE("zero-init model evaluation reproduces bicubic metrics") {
  RunConfig cfg = tiny_cfg(0);
  const std::string data_dir = tmp_dir("data_eval");
  vid::make_dataset(train::dataset_params(cfg), 11, data_dir);
  train::Model model(cfg);
  std::vector<std::string> ids;
  auto clips = train::load_split(data_dir, cfg, "train", &ids);
  REQUIRE(!clips.empty());
  auto records = train::evaluate_clips(model, clips, ids);
  REQUIRE(records.size() == clips.size());
  for (size_t i = 0; i < clips.size(); ++i) {
    const int t_ref = clips[i].frames() / 2;
    Tensor bic = vid::bicubic_resize(clips[i].lr_frames[static_cast<size_t>(t_ref)],
                                     clips[i].lr_h * 4, clips[i].lr_w * 4);
    const double want =
        train::psnr(train::clamp01(bic), clips[i].hr_frames[static_cast<size_t>(t_ref)]);
    CHECK(std::abs(records[i].psnr_db - want) <= 1e-9);
  }

  std::string csv1 = train::metrics_csv(records);
  std::string csv2 = train::metrics_csv(train::evaluate_clips(model, clips, ids));
  CHECK(csv1 == csv2);
  // header + one row per clip + aggregate
  CHECK(std::count(csv1.begin(), csv1.end(), '\n') == static_cast<int64_t>(clips.size()) + 2);
  CHECK(csv1.rfind("clip_id,psnr_db,ssim,loss\n", 0) == 0);
}

TEST_CASE("attribution of the zero model concentrates on the reference frame") {
  RunConfig cfg = tiny_cfg(0);
  const std::string data_dir = tmp_dir("data_attr");
  vid::make_dataset(train::dataset_params(cfg), 13, data_dir);
  train::Model model(cfg);
  auto clips = train::load_split(data_dir, cfg, "train", nullptr);
  REQUIRE(!clips.empty());
  const int t_ref = clips[0].frames() / 2;
  auto maps = train::attribute(model, clips[0], t_ref, 8, 8, 16, 16);
  REQUIRE(maps.size() == static_cast<size_t>(clips[0].frames()));
  double ref_max = 0.0;
  for (size_t t = 0; t < maps.size(); ++t) {
    double mx = 0.0;
    for (double v : maps[t].data()) mx = std::max(mx, v);
    if (static_cast<int>(t) == t_ref)
      ref_max = mx;
    else
      CHECK(mx == 0.0);  // supporting frames have no path through the residual
  }
  CHECK(ref_max == 1.0);  // normalized

  CHECK_THROWS_AS(train::attribute(model, clips[0], t_ref, 60, 60, 16, 16), ValidationError);
}

TEST_CASE("selftest passes clean and fails the corrupted negative control") {
  std::ostringstream clean, corrupted;
  CHECK(train::run_selftest(clean));
  CHECK(clean.str().find("FAIL") == std::string::npos);
  train::SelftestOptions opt;
  opt.corrupt_softmax = true;
  CHECK_FALSE(train::run_selftest(corrupted, opt));
  CHECK(corrupted.str().find("FAIL softmax rows sum to 1") != std::string::npos);
}
