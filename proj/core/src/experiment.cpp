#include "mdt/experiment.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mdt/errors.hpp"

namespace mdt {
namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t n = 0;
    const double d = std::stod(v, &n);
    if (n != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a boolean");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  gen.num_domains = 3;
  sync();
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  explicit_keys.insert(key);
  if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "out") out_dir = value;
  else if (key == "dataset") dataset = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "resume") resume = value;
  else if (key == "image_size") gen.image_size = static_cast<int>(parse_int(key, value));
  else if (key == "domains") gen.num_domains = static_cast<int>(parse_int(key, value));
  else if (key == "in_channels") gen.in_channels = static_cast<int>(parse_int(key, value));
  else if (key == "base_channels") gen.base_channels = static_cast<int>(parse_int(key, value));
  else if (key == "num_downsample") gen.num_downsample = static_cast<int>(parse_int(key, value));
  else if (key == "num_res_blocks") gen.num_res_blocks = static_cast<int>(parse_int(key, value));
  else if (key == "lrelu_slope") gen.lrelu_slope = parse_double(key, value);
  else if (key == "disc.base_channels") disc.base_channels = static_cast<int>(parse_int(key, value));
  else if (key == "disc.num_scales") disc.num_scales = static_cast<int>(parse_int(key, value));
  else if (key == "train.epochs") train.epochs = static_cast<int>(parse_int(key, value));
  else if (key == "train.lr0") train.lr0 = parse_double(key, value);
  else if (key == "train.beta1") train.beta1 = parse_double(key, value);
  else if (key == "train.beta2") train.beta2 = parse_double(key, value);
  else if (key == "train.batch_size") train.batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "train.lambda_rec") train.weights.lambda_rec = parse_double(key, value);
  else if (key == "train.lambda_idt") train.weights.lambda_idt = parse_double(key, value);
  else if (key == "train.iters") train.iterations_per_epoch = static_cast<int>(parse_int(key, value));
  else if (key == "train.adv_identity_path") train.adv_identity_path = parse_bool(key, value);
  else if (key == "synth.train_per_domain") synth.train_per_domain = static_cast<int>(parse_int(key, value));
  else if (key == "synth.test_per_domain") synth.test_per_domain = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.kid_block_size") metrics.kid_block_size = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.kid_blocks") metrics.kid_blocks = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.clf_base_channels") metrics.clf_base_channels = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.clf_epochs") metrics.clf_epochs = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.clf_batch_size") metrics.clf_batch_size = static_cast<int>(parse_int(key, value));
  else if (key == "metrics.clf_lr") metrics.clf_lr = parse_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
  sync();
}

void ExperimentConfig::sync() {
  train.seed = seed;
  synth.seed = seed;
  synth.num_domains = gen.num_domains;
  synth.image_size = gen.image_size;
  disc.in_channels = gen.in_channels;
  disc.lrelu_slope = gen.lrelu_slope;
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["out"] = out_dir;
  kv["dataset"] = dataset;
  kv["checkpoint"] = checkpoint;
  kv["image_size"] = std::to_string(gen.image_size);
  kv["domains"] = std::to_string(gen.num_domains);
  kv["in_channels"] = std::to_string(gen.in_channels);
  kv["base_channels"] = std::to_string(gen.base_channels);
  kv["num_downsample"] = std::to_string(gen.num_downsample);
  kv["num_res_blocks"] = std::to_string(gen.num_res_blocks);
  kv["lrelu_slope"] = fmt_double(gen.lrelu_slope);
  kv["disc.base_channels"] = std::to_string(disc.base_channels);
  kv["disc.num_scales"] = std::to_string(disc.num_scales);
  kv["train.epochs"] = std::to_string(train.epochs);
  kv["train.lr0"] = fmt_double(train.lr0);
  kv["train.beta1"] = fmt_double(train.beta1);
  kv["train.beta2"] = fmt_double(train.beta2);
  kv["train.batch_size"] = std::to_string(train.batch_size);
  kv["train.lambda_rec"] = fmt_double(train.weights.lambda_rec);
  kv["train.lambda_idt"] = fmt_double(train.weights.lambda_idt);
  kv["train.iters"] = std::to_string(train.iterations_per_epoch);
  kv["train.adv_identity_path"] = train.adv_identity_path ? "1" : "0";
  kv["synth.train_per_domain"] = std::to_string(synth.train_per_domain);
  kv["synth.test_per_domain"] = std::to_string(synth.test_per_domain);
  kv["metrics.kid_block_size"] = std::to_string(metrics.kid_block_size);
  kv["metrics.kid_blocks"] = std::to_string(metrics.kid_blocks);
  kv["metrics.clf_base_channels"] = std::to_string(metrics.clf_base_channels);
  kv["metrics.clf_epochs"] = std::to_string(metrics.clf_epochs);
  kv["metrics.clf_batch_size"] = std::to_string(metrics.clf_batch_size);
  kv["metrics.clf_lr"] = fmt_double(metrics.clf_lr);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  return os.str();
}

std::string ExperimentConfig::config_hash() const {
  const std::string s = canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  ExperimentConfig cfg;
  apply_config_file(cfg, path);
  return cfg;
}

}  // namespace mdt
