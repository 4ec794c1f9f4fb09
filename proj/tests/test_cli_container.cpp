#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "model/checkpoint.hpp"
#include "model/config.hpp"

using namespace semlens;
using num::Rng;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("config parsing: comments, whitespace, overrides") {
  RunConfig cfg = RunConfig::from_string(
      "# full-line comment\n"
      "model.C = 24   # trailing comment\n"
      "\t train.steps=7\t\n"
      "\n"
      "model.C=12\n");  // later line wins
  CHECK(cfg.get_int("model.C") == 12);
  CHECK(cfg.get_int("train.steps") == 7);
  // untouched keys keep their defaults
  CHECK(cfg.get_int("model.win") == RunConfig().get_int("model.win"));
}

TEST_CASE("config rejects unknown keys and malformed lines with line info") {
  CHECK_THROWS_WITH_AS(RunConfig().set("nope", "1"), "unknown config key: nope",
                       ValidationError);
  try {
    RunConfig::from_string("model.C=8\nthis line has no equals\n");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::from_string("model.C=eight\n").get_int("model.C"),
                  ValidationError);
  CHECK_THROWS_AS(RunConfig::from_string("train.lr=fast\n").get_double("train.lr"),
                  ValidationError);
  CHECK_THROWS_AS(RunConfig::from_string("model.enable_gps=maybe\n").get_bool("model.enable_gps"),
                  ValidationError);
}

TEST_CASE("canonical echo is sorted, idempotent, and hash-stable") {
  RunConfig a = RunConfig::from_string("train.steps=9\nmodel.C=8\n");
  RunConfig b = RunConfig::from_string("model.C=8\ntrain.steps=9\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.sha256_hex() == b.sha256_hex());
  CHECK(a.sha256_hex().size() == 64);
  // round trip through the canonical form is the identity
  CHECK(RunConfig::from_string(a.canonical()).canonical() == a.canonical());
  // any value change changes the hash
  RunConfig c = a;
  c.set("model.C", "9");
  CHECK(c.sha256_hex() != a.sha256_hex());
  // the hash is the SHA-256 of the canonical text
  CHECK(a.sha256_hex() == sha256_hex_of(a.canonical()));
}

TEST_CASE("sha256 known-answer vectors") {
  CHECK(sha256_hex_of("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex_of("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("checkpoint round trip is bit exact including optimizer and RNG") {
  ParamStore ps;
  Rng rng(42);
  ps.uniform_fan_in("enc.w", {4, 6}, 6, rng);
  ps.zeros("enc.b", {4});
  ps.add("scalar", {1}, {-0.5});
  rng.normal();  // exercise the Box-Muller cache path

  OptimMoments opt;
  opt.m["enc.w"] = std::vector<double>(24, 0.125);
  opt.v["enc.w"] = std::vector<double>(24, 1e-8);
  opt.m["enc.b"] = {1, 2, 3, 4};
  opt.v["enc.b"] = {4, 3, 2, 1};
  opt.step = 1234567;

  const std::string sha = RunConfig().sha256_hex();
  const std::string p1 = tmp_path("slz_ckpt_a.bin"), p2 = tmp_path("slz_ckpt_b.bin");
  save_checkpoint(p1, ps, opt, rng, sha);
  save_checkpoint(p2, ps, opt, rng, sha);
  CHECK(slurp(p1) == slurp(p2));  // deterministic bytes

  CheckpointData back = load_checkpoint(p1);
  CHECK(back.tensors.size() == 3);
  CHECK(back.tensors.at("enc.w").first == num::Shape{4, 6});
  CHECK(back.tensors.at("enc.w").second == ps.get("enc.w").data());
  CHECK(back.tensors.at("scalar").second == std::vector<double>{-0.5});
  CHECK(back.opt.m == opt.m);
  CHECK(back.opt.v == opt.v);
  CHECK(back.opt.step == opt.step);
  CHECK(back.rng_state == rng.state());
  CHECK(back.rng_has_cache == rng.has_cached_normal());
  CHECK(back.rng_cache == rng.cached_normal());
  CHECK(back.config_sha_hex == sha);

  // applying onto a same-shaped store reproduces the values
  ParamStore ps2;
  Rng rng2(7);
  ps2.uniform_fan_in("enc.w", {4, 6}, 6, rng2);
  ps2.zeros("enc.b", {4});
  ps2.add("scalar", {1}, {0.0});
  apply_checkpoint(back, ps2);
  CHECK(ps2.get("enc.w").data() == ps.get("enc.w").data());
  CHECK(ps2.get("scalar").data()[0] == -0.5);

  // save(load(save(x))) is bit-identical
  Rng rng3(0);
  rng3.set_state(back.rng_state, back.rng_has_cache, back.rng_cache);
  const std::string p3 = tmp_path("slz_ckpt_c.bin");
  save_checkpoint(p3, ps2, back.opt, rng3, back.config_sha_hex);
  CHECK(slurp(p3) == slurp(p1));

  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  std::filesystem::remove(p3);
}

TEST_CASE("checkpoint corruption is rejected with a reason") {
  ParamStore ps;
  Rng rng(1);
  ps.uniform_fan_in("w", {2, 2}, 2, rng);
  OptimMoments opt;
  const std::string path = tmp_path("slz_ckpt_corrupt.bin");
  save_checkpoint(path, ps, opt, rng, RunConfig().sha256_hex());
  const std::string good = slurp(path);

  // bad magic
  std::string bad = good;
  bad[0] = 'X';
  spit(path, bad);
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);

  // truncation anywhere in the payload names what was being read
  spit(path, good.substr(0, good.size() - 5));
  try {
    load_checkpoint(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  spit(path, good.substr(0, 10));
  CHECK_THROWS_AS(load_checkpoint(path), ValidationError);

  // trailing bytes are an error, not silently ignored
  spit(path, good + "junk");
  try {
    load_checkpoint(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("trailing") != std::string::npos);
  }

  // missing file is a runtime failure
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), RuntimeFailure);
}

TEST_CASE("apply_checkpoint validates names and shapes") {
  ParamStore ps;
  Rng rng(2);
  ps.uniform_fan_in("w", {2, 3}, 3, rng);
  OptimMoments opt;
  const std::string path = tmp_path("slz_ckpt_apply.bin");
  save_checkpoint(path, ps, opt, rng, RunConfig().sha256_hex());
  CheckpointData ckpt = load_checkpoint(path);
  std::filesystem::remove(path);

  ParamStore missing;
  missing.zeros("w", {2, 3});
  missing.zeros("extra", {1});
  CHECK_THROWS_AS(apply_checkpoint(ckpt, missing), ValidationError);

  ParamStore wrong_shape;
  wrong_shape.zeros("w", {3, 2});
  CHECK_THROWS_AS(apply_checkpoint(ckpt, wrong_shape), ValidationError);

  ParamStore unknown;  // checkpoint has "w", store does not
  unknown.zeros("other", {2, 3});
  CHECK_THROWS_AS(apply_checkpoint(ckpt, unknown), ValidationError);
}
