#include "tcnn/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tcnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str(), path.string());
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    values_[key] = trim(line.substr(eq + 1));
  }
}

std::string Config::env_name(const std::string& key) {
  std::string out = "TCNN_";
  for (char c : key)
    out += (c == '.' || c == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void Config::merge_env() {
  for (auto& [key, value] : values_)
    if (const char* v = std::getenv(env_name(key).c_str())) value = v;
}

void Config::merge_overrides(const std::vector<std::string>& pairs) {
  for (const std::string& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::runtime_error("override '" + p + "' is not key=value");
    values_[trim(p.substr(0, eq))] = trim(p.substr(eq + 1));
  }
}

const std::string& Config::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::runtime_error("config key '" + key + "' is not set");
  return it->second;
}

long Config::integer(const std::string& key) const {
  const std::string& v = str(key);
  std::size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw std::runtime_error("config key '" + key + "': '" + v + "' is not an integer");
  return out;
}

double Config::real(const std::string& key) const {
  const std::string& v = str(key);
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw std::runtime_error("config key '" + key + "': '" + v + "' is not a number");
  return out;
}

bool Config::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::runtime_error("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  std::string v = str(key);
  for (char& c : v)
    if (c == ',') c = ' ';
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) {
    std::size_t pos = 0;
    int x = 0;
    try {
      x = std::stoi(tok, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != tok.size())
      throw std::runtime_error("config key '" + key + "': '" + tok + "' is not an integer");
    out.push_back(x);
  }
  return out;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [k, _] : values_) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == k;
    if (!ok) throw std::runtime_error("unknown config key '" + k + "'");
  }
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace tcnn
