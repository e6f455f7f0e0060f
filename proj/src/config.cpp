#include "tpp/config.hpp"

#include <fstream>
#include <sstream>

#include "tpp/errors.hpp"

namespace tpp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::merge_stream(std::istream& is) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(no, "config: expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(no, "config: empty key");
    values_[key] = trim(line.substr(eq + 1));
  }
}

void Config::merge_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read config '" + path + "'");
  merge_stream(is);
}

void Config::merge_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || trim(kv.substr(0, eq)).empty()) {
    throw ValidationError("override '" + kv + "' is not key=value");
  }
  values_[trim(kv.substr(0, eq))] = trim(kv.substr(eq + 1));
}

std::string Config::str(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("missing setting '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("setting '" + key + "' is not a number: " + it->second);
  }
}

long long Config::integer(const std::string& key, long long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("setting '" + key + "' is not an integer: " + it->second);
  }
}

bool Config::flag(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ValidationError("setting '" + key + "' is not a boolean: " + v);
}

std::vector<double> Config::list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("setting '" + key + "' has a non-numeric entry: " + item);
    }
  }
  return out;
}

}  // namespace tpp
