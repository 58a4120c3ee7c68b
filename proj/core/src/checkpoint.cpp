#include "mdt/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "mdt/errors.hpp"

namespace mdt {
namespace {

constexpr char kMagic[8] = {'M', 'D', 'T', 'C', 'K', 'P', 'T', kCheckpointVersion};

struct TensorEntry {
  std::string name;
  const Tensor* tensor;
};

void collect(const Param& p, std::vector<TensorEntry>& out, const std::string& prefix) {
  out.push_back({prefix + p.name, &p.value});
  out.push_back({prefix + p.name + "#m", &p.m});
  out.push_back({prefix + p.name + "#v", &p.v});
}

nlohmann::ordered_json gen_cfg_json(const GeneratorConfig& c) {
  return {{"num_domains", c.num_domains},     {"image_size", c.image_size},
          {"in_channels", c.in_channels},     {"base_channels", c.base_channels},
          {"num_downsample", c.num_downsample}, {"num_res_blocks", c.num_res_blocks},
          {"lrelu_slope", c.lrelu_slope}};
}

GeneratorConfig gen_cfg_from(const nlohmann::json& j) {
  GeneratorConfig c;
  c.num_domains = j.at("num_domains").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.num_downsample = j.at("num_downsample").get<int>();
  c.num_res_blocks = j.at("num_res_blocks").get<int>();
  c.lrelu_slope = j.at("lrelu_slope").get<double>();
  return c;
}

nlohmann::ordered_json disc_cfg_json(const DiscriminatorConfig& c) {
  return {{"in_channels", c.in_channels},
          {"base_channels", c.base_channels},
          {"num_scales", c.num_scales},
          {"lrelu_slope", c.lrelu_slope}};
}

DiscriminatorConfig disc_cfg_from(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.in_channels = j.at("in_channels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.num_scales = j.at("num_scales").get<int>();
  c.lrelu_slope = j.at("lrelu_slope").get<double>();
  return c;
}

nlohmann::ordered_json train_cfg_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr0", c.lr0},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"batch_size", c.batch_size},
          {"lambda_rec", c.weights.lambda_rec},
          {"lambda_idt", c.weights.lambda_idt},
          {"seed", c.seed},
          {"iterations_per_epoch", c.iterations_per_epoch},
          {"adv_identity_path", c.adv_identity_path}};
}

TrainConfig train_cfg_from(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.lr0 = j.at("lr0").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.weights.lambda_rec = j.at("lambda_rec").get<double>();
  c.weights.lambda_idt = j.at("lambda_idt").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.iterations_per_epoch = j.at("iterations_per_epoch").get<int>();
  c.adv_identity_path = j.at("adv_identity_path").get<bool>();
  return c;
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw IoError("cannot open checkpoint '" + path + "'");
  std::fseek(f.get(), 0, SEEK_END);
  const long sz = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (sz < 0) throw IoError("cannot stat checkpoint '" + path + "'");
  std::vector<unsigned char> bytes(static_cast<size_t>(sz));
  if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
    throw IoError("short read on checkpoint '" + path + "'");
  return bytes;
}

}  // namespace

void save_checkpoint(const TrainState& st, const std::string& path,
                     const std::string& config_hash) {
  std::vector<TensorEntry> entries;
  const_cast<TrainState&>(st).gen.visit_params(
      [&entries](Param& p) { collect(p, entries, ""); });
  for (size_t i = 0; i < st.discs.size(); ++i) {
    const std::string prefix = "disc." + std::to_string(i) + ".";
    const_cast<Discriminator&>(st.discs[i]).visit_params(
        [&entries, &prefix](Param& p) { collect(p, entries, prefix); });
  }

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["dtype"] = "f64le";
  manifest["config_hash"] = config_hash;
  manifest["epoch"] = st.next_epoch;
  manifest["iter"] = st.next_iter;
  manifest["generator"] = gen_cfg_json(st.gen_cfg);
  manifest["discriminator"] = disc_cfg_json(st.disc_cfg);
  manifest["train"] = train_cfg_json(st.train_cfg);
  manifest["domain_names"] = st.domain_names;
  manifest["rng_state"] = st.rng.state();
  manifest["adam_g_steps"] = st.opt_g.steps();
  std::vector<long long> dsteps;
  for (const auto& o : st.opt_d) dsteps.push_back(o.steps());
  manifest["adam_d_steps"] = dsteps;

  std::int64_t offset = 0;
  auto tensors = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor->shape()}, {"offset", offset}});
    offset += e.tensor->size();
  }
  manifest["tensors"] = std::move(tensors);

  const std::string mstr = manifest.dump();
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kMagic, kMagic + 8);
  const std::uint64_t mlen = mstr.size();
  buf.insert(buf.end(), reinterpret_cast<const unsigned char*>(&mlen),
             reinterpret_cast<const unsigned char*>(&mlen) + 8);
  buf.insert(buf.end(), mstr.begin(), mstr.end());
  const size_t payload_begin = buf.size();
  buf.resize(buf.size() + static_cast<size_t>(offset) * sizeof(double));
  {
    double* dst = reinterpret_cast<double*>(buf.data() + payload_begin);
    for (const auto& e : entries) {
      std::memcpy(dst, e.tensor->data(), static_cast<size_t>(e.tensor->size()) * sizeof(double));
      dst += e.tensor->size();
    }
  }
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, buf.data() + 16, static_cast<uInt>(buf.size() - 16)));
  buf.insert(buf.end(), reinterpret_cast<const unsigned char*>(&crc),
             reinterpret_cast<const unsigned char*>(&crc) + 4);

  const std::string tmp = path + ".tmp";
  {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(tmp.c_str(), "wb"), &std::fclose);
    if (!f) throw IoError("cannot create checkpoint '" + tmp + "'");
    if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
      throw IoError("short write on checkpoint '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

namespace {

nlohmann::json parse_container(const std::vector<unsigned char>& bytes, const std::string& path,
                               const double** payload, std::int64_t* payload_count) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 7) != 0)
    throw IoError("'" + path + "' is not a checkpoint");
  if (bytes[7] != kCheckpointVersion)
    throw IoError("checkpoint '" + path + "' has format version " +
                  std::to_string(static_cast<int>(bytes[7])) + ", expected " +
                  std::to_string(kCheckpointVersion));
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, bytes.data() + 16, static_cast<uInt>(bytes.size() - 20)));
  if (crc != stored_crc) throw IoError("checkpoint '" + path + "' failed its integrity checksum");

  std::uint64_t mlen;
  std::memcpy(&mlen, bytes.data() + 8, 8);
  if (16 + mlen > bytes.size() - 4) throw IoError("checkpoint '" + path + "' manifest truncated");
  nlohmann::json manifest = nlohmann::json::parse(
      bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(mlen));
  *payload = reinterpret_cast<const double*>(bytes.data() + 16 + mlen);
  *payload_count = static_cast<std::int64_t>((bytes.size() - 20 - mlen) / sizeof(double));
  return manifest;
}

}  // namespace

std::string checkpoint_config_hash(const std::string& path) {
  const auto bytes = read_file(path);
  const double* payload;
  std::int64_t count;
  return parse_container(bytes, path, &payload, &count).at("config_hash").get<std::string>();
}

TrainState load_checkpoint(const std::string& path) {
  const auto bytes = read_file(path);
  const double* payload;
  std::int64_t payload_count;
  const nlohmann::json manifest = parse_container(bytes, path, &payload, &payload_count);

  TrainState st{
      gen_cfg_from(manifest.at("generator")),
      disc_cfg_from(manifest.at("discriminator")),
      train_cfg_from(manifest.at("train")),
      Generator::build(gen_cfg_from(manifest.at("generator")), 0),
      {},
      Adam(0, 0, 0),
      {},
      Rng(0),
      manifest.at("epoch").get<int>(),
      manifest.at("iter").get<long long>(),
      manifest.at("domain_names").get<std::vector<std::string>>(),
  };
  st.opt_g = Adam(st.train_cfg.beta1, st.train_cfg.beta2);
  st.opt_g.set_steps(manifest.at("adam_g_steps").get<long long>());
  const auto dsteps = manifest.at("adam_d_steps").get<std::vector<long long>>();
  if (static_cast<int>(dsteps.size()) != st.gen_cfg.num_domains)
    throw ConfigError("checkpoint '" + path + "': config mismatch (expected " +
                      std::to_string(st.gen_cfg.num_domains) + " discriminators, found " +
                      std::to_string(dsteps.size()) + ")");
  for (int d = 0; d < st.gen_cfg.num_domains; ++d) {
    st.discs.push_back(Discriminator::build(st.disc_cfg, 0));
    Adam a(st.train_cfg.beta1, st.train_cfg.beta2);
    a.set_steps(dsteps[static_cast<size_t>(d)]);
    st.opt_d.push_back(a);
  }
  st.rng.set_state(manifest.at("rng_state").get<std::string>());

  // Index payload tensors by name, then pour them into the rebuilt models.
  struct Slot {
    const double* src;
    std::vector<int> shape;
  };
  std::map<std::string, Slot> slots;
  for (const auto& t : manifest.at("tensors")) {
    const auto off = t.at("offset").get<std::int64_t>();
    Slot slot{payload + off, t.at("shape").get<std::vector<int>>()};
    if (off + shape_size(slot.shape) > payload_count)
      throw IoError("checkpoint '" + path + "' tensor payload truncated");
    slots[t.at("name").get<std::string>()] = std::move(slot);
  }
  auto pour = [&slots, &path](Param& p, const std::string& prefix) {
    for (const char* suffix : {"", "#m", "#v"}) {
      const std::string key = prefix + p.name + suffix;
      const auto it = slots.find(key);
      if (it == slots.end())
        throw ConfigError("checkpoint '" + path + "': config mismatch (missing tensor '" + key +
                          "')");
      Tensor& dst = suffix[0] == '\0' ? p.value : (suffix[1] == 'm' ? p.m : p.v);
      if (it->second.shape != dst.shape())
        throw ConfigError("checkpoint '" + path + "': tensor '" + key + "' has shape " +
                          shape_str(it->second.shape) + ", expected " + shape_str(dst.shape()));
      std::memcpy(dst.data(), it->second.src, static_cast<size_t>(dst.size()) * sizeof(double));
    }
  };
  st.gen.visit_params([&pour](Param& p) { pour(p, ""); });
  for (int d = 0; d < st.gen_cfg.num_domains; ++d)
    st.discs[static_cast<size_t>(d)].visit_params(
        [&pour, d](Param& p) { pour(p, "disc." + std::to_string(d) + "."); });
  return st;
}

}  // namespace mdt
