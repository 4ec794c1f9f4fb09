#ifndef SEMLENS_MODEL_CONFIG_HPP
#define SEMLENS_MODEL_CONFIG_HPP

#include <map>
#include <string>

namespace semlens {

// Flat key=value run configuration. Every key has a default; unknown keys are
// rejected. canonical() renders all keys sorted, one per line, suitable for
// hashing and diffing.
class RunConfig {
 public:
  RunConfig();  // defaults only
  static RunConfig from_file(const std::string& path);
  static RunConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);  // rejects unknown keys

  const std::string& get_str(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  std::string canonical() const;
  std::string sha256_hex() const;  // of canonical()

 private:
  std::map<std::string, std::string> values_;
};

std::string sha256_hex_of(const std::string& bytes);

}  // namespace semlens

#endif
