#include "model/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

#include "numcore/tensor.hpp"

namespace semlens {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"data.lr_h", "32"},
      {"data.lr_w", "32"},
      {"data.frames", "5"},
      {"data.n_clips", "4"},
      {"data.num_instances", "2"},
      {"data.scale", "4"},
      {"data.val_every", "4"},
      {"degradation.mode", "BI"},
      {"degradation.sigma", "1.6"},
      {"model.C", "16"},
      {"model.C_s", "32"},
      {"model.N_f", "4"},
      {"model.N_v", "4"},
      {"model.N_c", "4"},
      {"model.blocks", "2"},
      {"model.heads", "2"},
      {"model.win", "8"},
      {"model.r", "3"},
      {"model.w", "2"},
      {"model.shift", "1"},
      {"model.space_every_block", "true"},
      {"model.isee_scaling", "true"},
      {"model.enable_gps", "true"},
      {"model.enable_isee", "true"},
      {"model.enable_image", "true"},
      {"train.lr", "2e-4"},
      {"train.lr_min", "1e-6"},
      {"train.steps", "300"},
      {"train.seed", "0"},
      {"train.eps", "1e-3"},
      {"train.lambda_mask", "0.1"},
      {"train.extractor_mode", "oracle"},
      {"train.weight_decay", "1e-4"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.99"},
      {"train.patch", "32"},
      {"train.eval_every", "100"},
      {"train.checkpoint_every", "100"},
  };
  return defaults;
}

}  // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return from_string(os.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments and whitespace
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    size_t v0 = value.find_first_not_of(" \t");
    value = v0 == std::string::npos ? "" : value.substr(v0);
    cfg.set(key, value);
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ValidationError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown config key: " + key);
  return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(get_str(key), &pos);
    if (pos != get_str(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("config key " + key + ": expected integer, got '" + get_str(key) + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  try {
    size_t pos = 0;
    double v = std::stod(get_str(key), &pos);
    if (pos != get_str(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("config key " + key + ": expected number, got '" + get_str(key) + "'");
  }
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get_str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key " + key + ": expected bool, got '" + v + "'");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

std::string RunConfig::sha256_hex() const { return sha256_hex_of(canonical()); }

std::string sha256_hex_of(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

}  // namespace semlens
