// semlens — command-line front end over the shared-library C interface.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semlens/semlens.h"

namespace {

int report(int code) {
  if (code != SLZ_OK) std::fprintf(stderr, "error: %s\n", slz_last_error());
  return code;
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semlens — semantics-guided video super-resolution"};
  app.require_subcommand(1);

  std::string config, out, data, checkpoint, clip;
  int64_t seed = -1;
  bool force = false;
  int t_ref = -1;
  int64_t y0 = -1, x0 = -1, ph = -1, pw = -1;
  bool corrupt_softmax = false;

  auto add_common = [&](CLI::App* cmd, bool with_ckpt) {
    cmd->add_option("--config", config, "config file (key=value lines; defaults if omitted)");
    cmd->add_option("--seed", seed, "override train.seed");
    if (with_ckpt) {
      cmd->add_option("--checkpoint", checkpoint, "checkpoint to load");
      cmd->add_flag("--force", force, "skip the checkpoint/config hash check");
    }
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_common(gen, false);
  gen->add_option("--out", out, "output dataset directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train, false);
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--out", out, "run output directory")->required();

  CLI::App* eval = app.add_subcommand("eval", "evaluate on the val split");
  add_common(eval, true);
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--out", out, "output metrics CSV path")->required();

  CLI::App* infer = app.add_subcommand("infer", "super-resolve clips to PPM");
  add_common(infer, true);
  infer->add_option("--data", data, "dataset directory")->required();
  infer->add_option("--out", out, "output directory")->required();
  infer->add_option("--clip", clip, "clip id (default: every val clip)");
  infer->add_option("--frame", t_ref, "reference frame index (default: middle)");

  CLI::App* attr = app.add_subcommand("attribute", "gradient attribution heat maps");
  add_common(attr, true);
  attr->add_option("--data", data, "dataset directory")->required();
  attr->add_option("--out", out, "output directory")->required();
  attr->add_option("--clip", clip, "clip id (default: first val clip)");
  attr->add_option("--frame", t_ref, "reference frame index (default: middle)");
  attr->add_option("--y0", y0, "target patch top (HR px; default centered)");
  attr->add_option("--x0", x0, "target patch left (HR px; default centered)");
  attr->add_option("--ph", ph, "target patch height (HR px; default half frame)");
  attr->add_option("--pw", pw, "target patch width (HR px; default half frame)");

  CLI::App* self = app.add_subcommand("selftest", "run the built-in invariant suite");
  self->add_flag("--corrupt-softmax", corrupt_softmax,
                 "fault-inject the softmax check (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0 via CLI11; genuine parse errors are validation
    const int code = app.exit(e);
    return code == 0 ? 0 : SLZ_ERR_VALIDATION;
  }

  if (gen->parsed())
    return report(slz_gen_data(opt(config), seed, out.c_str()));
  if (train->parsed())
    return report(slz_train(opt(config), seed, data.c_str(), out.c_str()));
  if (eval->parsed())
    return report(slz_eval(opt(config), seed, opt(checkpoint), force, data.c_str(),
                           out.c_str()));
  if (infer->parsed())
    return report(slz_infer(opt(config), seed, opt(checkpoint), force, data.c_str(),
                            opt(clip), t_ref, out.c_str()));
  if (attr->parsed())
    return report(slz_attribute(opt(config), seed, opt(checkpoint), force, data.c_str(),
                                opt(clip), t_ref, y0, x0, ph, pw, out.c_str()));
  if (self->parsed()) {
    std::vector<char> buf(1 << 16);
    const int code = slz_selftest(corrupt_softmax ? 1 : 0, buf.data(), buf.size());
    std::fputs(buf.data(), stdout);
    return report(code);
  }
  return SLZ_ERR_VALIDATION;
}
