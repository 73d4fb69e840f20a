#include "seaclear/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "seaclear/error.hpp"

namespace seaclear {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return "";
  return s.substr(a, s.find_last_not_of(ws) - a + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& where) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ParameterError(where + ": cannot parse '" + value + "'");
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"learning_rate", [](TrainConfig& c, const std::string& v, const std::string& w) { c.learning_rate = parse_number<double>(v, w); }},
      {"batch_size", [](TrainConfig& c, const std::string& v, const std::string& w) { c.batch_size = parse_number<int>(v, w); }},
      {"epochs", [](TrainConfig& c, const std::string& v, const std::string& w) { c.epochs = parse_number<int>(v, w); }},
      {"dropout_rate", [](TrainConfig& c, const std::string& v, const std::string& w) { c.dropout_rate = parse_number<double>(v, w); }},
      {"lambda_dcp", [](TrainConfig& c, const std::string& v, const std::string& w) { c.lambda_dcp = parse_number<double>(v, w); }},
      {"patch", [](TrainConfig& c, const std::string& v, const std::string& w) { c.patch = parse_number<int>(v, w); }},
      {"seed", [](TrainConfig& c, const std::string& v, const std::string& w) { c.seed = parse_number<std::uint64_t>(v, w); }},
      {"image_size", [](TrainConfig& c, const std::string& v, const std::string& w) { c.image_size = parse_number<int>(v, w); }},
      {"num_images", [](TrainConfig& c, const std::string& v, const std::string& w) { c.num_images = parse_number<int>(v, w); }},
  };
  return table;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = "config line " + std::to_string(number);
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError(where + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ParameterError(where + ": repeated key '" + key + "'");
    if (key == "profile") {
      if (seen.size() != 1) throw ParameterError(where + ": profile must be the first key");
      if (value == "desk") {
        config = TrainConfig::desk();
      } else if (value == "full") {
        config = TrainConfig::full();
      } else {
        throw ParameterError(where + ": unknown profile '" + value + "' (expected desk or full)");
      }
      continue;
    }
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParameterError(where + ": unknown key '" + key + "'");
    it->second(config, value, where + " (" + key + ")");
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(path + ": cannot open config");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "learning_rate=" << format_double(c.learning_rate) << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "epochs=" << c.epochs << '\n'
     << "dropout_rate=" << format_double(c.dropout_rate) << '\n'
     << "lambda_dcp=" << format_double(c.lambda_dcp) << '\n'
     << "patch=" << c.patch << '\n'
     << "seed=" << c.seed << '\n'
     << "image_size=" << c.image_size << '\n'
     << "num_images=" << c.num_images << '\n';
  return os.str();
}

}  // namespace seaclear
