#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tpp {

// Flat key = value settings with dotted keys. Later layers override earlier
// ones: defaults, then a file, then command-line overrides.
class Config {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Lines are `key = value`; '#' starts a comment. Throws ParseError.
  void merge_stream(std::istream& is);
  void merge_file(const std::string& path);
  // "key=value"
  void merge_assignment(const std::string& kv);

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string str(const std::string& key) const;  // throws if missing
  double num(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key) const;  // comma separated

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tpp
