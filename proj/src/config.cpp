#include "otfwi/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "otfwi/error.hpp"

namespace otfwi {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

bool parse_real(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && std::isfinite(out);
}

}  // namespace

ConfigDoc ConfigDoc::parse(const std::string& text, const std::string& origin) {
  ConfigDoc doc;
  std::vector<std::string> problems;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(n);
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!valid_key(key)) {
      problems.push_back(where + ": invalid key '" + key + "'");
      continue;
    }
    if (doc.values_.count(key)) problems.push_back(where + ": duplicate key '" + key + "'");
    doc.values_[key] = value;
  }
  if (!problems.empty()) throw ConfigError(problems);
  return doc;
}

ConfigDoc ConfigDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream s;
  s << in.rdbuf();
  return parse(s.str(), path.string());
}

void ConfigDoc::set_override(const std::string& a) {
  const auto eq = a.find('=');
  if (eq == std::string::npos) throw ConfigError({"override '" + a + "' is not key=value"});
  const std::string key = trim(a.substr(0, eq));
  if (!valid_key(key)) throw ConfigError({"override has an invalid key '" + key + "'"});
  values_[key] = trim(a.substr(eq + 1));
}

std::optional<std::string> ConfigDoc::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string ConfigDoc::to_string() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::optional<std::string> ConfigReader::take(const std::string& key) {
  seen_.push_back(key);
  return doc_.get(key);
}

double ConfigReader::real(const std::string& key, double fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  double out = 0.0;
  if (!parse_real(*v, out)) {
    problem(key + ": expected a number, got '" + *v + "'");
    return fallback;
  }
  return out;
}

int ConfigReader::integer(const std::string& key, int fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  int out = 0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
    problem(key + ": expected an integer, got '" + *v + "'");
    return fallback;
  }
  return out;
}

std::uint64_t ConfigReader::u64(const std::string& key, std::uint64_t fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc() || r.ptr != v->data() + v->size()) {
    problem(key + ": expected a non-negative integer, got '" + *v + "'");
    return fallback;
  }
  return out;
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  problem(key + ": expected true or false, got '" + *v + "'");
  return fallback;
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  const auto v = take(key);
  return v ? *v : fallback;
}

std::vector<double> ConfigReader::reals(const std::string& key, const std::vector<double>& fallback) {
  const auto v = take(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::stringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    double x = 0.0;
    if (!parse_real(trim(item), x)) {
      problem(key + ": expected a comma-separated list of numbers, got '" + *v + "'");
      return fallback;
    }
    out.push_back(x);
  }
  if (out.empty()) problem(key + ": empty list");
  return out.empty() ? fallback : out;
}

std::string ConfigReader::choice(const std::string& key, const std::string& fallback,
                                 const std::vector<std::string>& choices) {
  const std::string v = text(key, fallback);
  if (std::find(choices.begin(), choices.end(), v) != choices.end()) return v;
  std::string list;
  for (const auto& c : choices) list += (list.empty() ? "" : "|") + c;
  problem(key + ": expected one of " + list + ", got '" + v + "'");
  return fallback;
}

void ConfigReader::check_unknown() {
  for (const auto& [k, v] : doc_.values())
    if (std::find(seen_.begin(), seen_.end(), k) == seen_.end()) problem(k + ": unknown key");
}

void ConfigReader::finish() {
  if (!problems_.empty()) throw ConfigError(problems_);
}

}  // namespace otfwi
