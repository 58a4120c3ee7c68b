#include "mdt/model.hpp"

#include <cmath>

#include "mdt/errors.hpp"
#include "mdt/kernels.hpp"
#include "mdt/rng.hpp"

namespace mdt {
namespace {

constexpr double kInitStd = 0.02;

Tensor gaussian(std::vector<int> shape, Rng& rng, double std) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, std);
  return t;
}

ConvSpec make_conv(const std::string& name, int cin, int cout, int k, int stride, int pad,
                   bool bias, Rng& rng) {
  ConvSpec c;
  c.w = Param(name + ".w", gaussian({cout, cin, k, k}, rng, kInitStd));
  if (bias) {
    c.b = Param(name + ".b", Tensor({cout}));
    c.has_bias = true;
  }
  c.stride = stride;
  c.pad = pad;
  return c;
}

ConvSpec make_deconv(const std::string& name, int cin, int cout, int k, int stride, int pad,
                     bool bias, Rng& rng) {
  ConvSpec c;
  c.w = Param(name + ".w", gaussian({cin, cout, k, k}, rng, kInitStd));
  if (bias) {
    c.b = Param(name + ".b", Tensor({cout}));
    c.has_bias = true;
  }
  c.transposed = true;
  c.stride = stride;
  c.pad = pad;
  return c;
}

ResBlock make_res_block(const std::string& name, int ch, Rng& rng) {
  ResBlock b;
  b.c1 = make_conv(name + ".conv1", ch, ch, 3, 1, 1, false, rng);
  b.c2 = make_conv(name + ".conv2", ch, ch, 3, 1, 1, false, rng);
  return b;
}

Graph::Id apply_conv(Graph& g, const ConvSpec& c, Graph::Id x, bool frozen) {
  const Graph::Id w = frozen ? g.frozen(c.w) : g.param(const_cast<Param&>(c.w));
  Graph::Id b = -1;
  if (c.has_bias) b = frozen ? g.frozen(c.b) : g.param(const_cast<Param&>(c.b));
  return c.transposed ? g.conv_transpose2d(x, w, b, c.stride, c.pad)
                      : g.conv2d(x, w, b, c.stride, c.pad);
}

Graph::Id apply_res_block(Graph& g, const ResBlock& rb, Graph::Id x, double slope, bool frozen) {
  Graph::Id h = apply_conv(g, rb.c1, x, frozen);
  h = g.instance_norm(h);
  h = g.leaky_relu(h, slope);
  h = apply_conv(g, rb.c2, h, frozen);
  h = g.instance_norm(h);
  return g.add(h, x);
}

void visit_conv(ConvSpec& c, const std::function<void(Param&)>& fn) {
  fn(c.w);
  if (c.has_bias) fn(c.b);
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_domains < 2) throw ConfigError("num_domains must be >= 2");
  if (in_channels <= 0 || base_channels <= 0) throw ConfigError("channel counts must be positive");
  if (num_downsample < 1) throw ConfigError("num_downsample must be >= 1");
  if (num_res_blocks < 0) throw ConfigError("num_res_blocks must be >= 0");
  if (image_size <= 0 || image_size % (1 << num_downsample) != 0)
    throw ConfigError("image_size must be a positive multiple of 2^num_downsample");
}

void DiscriminatorConfig::validate() const {
  if (in_channels <= 0 || base_channels <= 0) throw ConfigError("channel counts must be positive");
  if (num_scales < 1) throw ConfigError("num_scales must be >= 1");
}

Generator Generator::build(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Generator gen;
  gen.cfg_ = cfg;
  Rng rng(seed);

  int ch = cfg.in_channels;
  for (int k = 0; k < cfg.num_downsample; ++k) {
    const int out = cfg.base_channels << k;
    gen.downs_.push_back(make_conv("encoder.down" + std::to_string(k), ch, out, 4, 2, 1, false, rng));
    ch = out;
  }
  for (int r = 0; r < cfg.num_res_blocks; ++r)
    gen.enc_blocks_.push_back(make_res_block("encoder.res" + std::to_string(r), ch, rng));

  // One decoder is drawn from the stream, then replicated so all decoders
  // start element-wise identical.
  Decoder proto;
  for (int r = 0; r < cfg.num_res_blocks; ++r)
    proto.blocks.push_back(make_res_block("decoder.0.res" + std::to_string(r), ch, rng));
  int cur = ch;
  for (int t = 0; t < cfg.num_downsample; ++t) {
    const int skip_ch = cfg.base_channels << (cfg.num_downsample - 1 - t);
    const int in_ch = cur + skip_ch;
    const bool last = t == cfg.num_downsample - 1;
    const int out_ch = last ? cfg.in_channels : cfg.base_channels << (cfg.num_downsample - 2 - t);
    proto.ups.push_back(
        make_deconv("decoder.0.up" + std::to_string(t), in_ch, out_ch, 4, 2, 1, last, rng));
    cur = out_ch;
  }

  gen.decoders_.resize(static_cast<size_t>(cfg.num_domains));
  for (int d = 0; d < cfg.num_domains; ++d) {
    Decoder dec = proto;  // deep copy: identical initial parameters
    const std::string prefix = "decoder." + std::to_string(d) + ".";
    for (size_t r = 0; r < dec.blocks.size(); ++r) {
      dec.blocks[r].c1.w.name = prefix + "res" + std::to_string(r) + ".conv1.w";
      dec.blocks[r].c2.w.name = prefix + "res" + std::to_string(r) + ".conv2.w";
    }
    for (size_t t = 0; t < dec.ups.size(); ++t) {
      dec.ups[t].w.name = prefix + "up" + std::to_string(t) + ".w";
      if (dec.ups[t].has_bias) dec.ups[t].b.name = prefix + "up" + std::to_string(t) + ".b";
    }
    gen.decoders_[static_cast<size_t>(d)] = std::move(dec);
  }
  return gen;
}

void Generator::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != cfg_.in_channels || x.dim(1) != cfg_.image_size ||
      x.dim(2) != cfg_.image_size)
    throw DataError("generator input must be (" + std::to_string(cfg_.in_channels) + "," +
                    std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) +
                    "), got " + shape_str(x.shape()));
}

void Generator::check_domain(int domain) const {
  if (domain < 0 || domain >= cfg_.num_domains)
    throw ConfigError("domain id " + std::to_string(domain) + " out of range [0," +
                      std::to_string(cfg_.num_domains) + ")");
}

EncodedIds Generator::encode_ids(Graph& g, Graph::Id x, bool frozen) {
  check_input(g.val(x));
  EncodedIds out;
  Graph::Id h = x;
  for (auto& down : downs_) {
    h = apply_conv(g, down, h, frozen);
    h = g.instance_norm(h);
    h = g.leaky_relu(h, cfg_.lrelu_slope);
    out.skips.push_back(h);
  }
  for (auto& rb : enc_blocks_) h = apply_res_block(g, rb, h, cfg_.lrelu_slope, frozen);
  out.latent = h;
  return out;
}

Graph::Id Generator::decode_ids(Graph& g, int domain, const EncodedIds& enc, bool frozen) {
  check_domain(domain);
  if (static_cast<int>(enc.skips.size()) != cfg_.num_downsample)
    throw DataError("skip stack has " + std::to_string(enc.skips.size()) + " entries, expected " +
                    std::to_string(cfg_.num_downsample));
  Decoder& dec = decoders_[static_cast<size_t>(domain)];
  Graph::Id h = enc.latent;
  for (auto& rb : dec.blocks) h = apply_res_block(g, rb, h, cfg_.lrelu_slope, frozen);
  for (int t = 0; t < cfg_.num_downsample; ++t) {
    const Graph::Id skip = enc.skips[static_cast<size_t>(cfg_.num_downsample - 1 - t)];
    h = g.concat_channels(h, skip);
    h = apply_conv(g, dec.ups[static_cast<size_t>(t)], h, frozen);
    if (t < cfg_.num_downsample - 1) {
      h = g.instance_norm(h);
      h = g.leaky_relu(h, cfg_.lrelu_slope);
    } else {
      h = g.tanh_op(h);
    }
  }
  return h;
}

Encoded Generator::encode(const Tensor& x) const {
  Graph g(false);
  auto* self = const_cast<Generator*>(this);
  const EncodedIds ids = self->encode_ids(g, g.input(x), true);
  Encoded out;
  out.latent = g.val(ids.latent);
  for (Graph::Id s : ids.skips) out.skips.push_back(g.val(s));
  return out;
}

Tensor Generator::decode(int domain, const Encoded& enc) const {
  Graph g(false);
  auto* self = const_cast<Generator*>(this);
  EncodedIds ids;
  ids.latent = g.input(enc.latent);
  for (const Tensor& s : enc.skips) ids.skips.push_back(g.input(s));
  return g.val(self->decode_ids(g, domain, ids, true));
}

Tensor Generator::translate(const Tensor& x, int target) const {
  Graph g(false);
  auto* self = const_cast<Generator*>(this);
  const EncodedIds enc = self->encode_ids(g, g.input(x), true);
  return g.val(self->decode_ids(g, target, enc, true));
}

std::vector<Tensor> Generator::translate_all(const Tensor& x) const {
  Graph g(false);
  auto* self = const_cast<Generator*>(this);
  const EncodedIds enc = self->encode_ids(g, g.input(x), true);
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(cfg_.num_domains));
  for (int d = 0; d < cfg_.num_domains; ++d)
    out.push_back(g.val(self->decode_ids(g, d, enc, true)));
  return out;
}

void Generator::visit_params(const std::function<void(Param&)>& fn) {
  for (auto& c : downs_) visit_conv(c, fn);
  for (auto& rb : enc_blocks_) {
    visit_conv(rb.c1, fn);
    visit_conv(rb.c2, fn);
  }
  for (auto& dec : decoders_) {
    for (auto& rb : dec.blocks) {
      visit_conv(rb.c1, fn);
      visit_conv(rb.c2, fn);
    }
    for (auto& c : dec.ups) visit_conv(c, fn);
  }
}

void Generator::visit_params(const std::function<void(const Param&)>& fn) const {
  std::function<void(Param&)> wrap = [&fn](Param& p) { fn(p); };
  const_cast<Generator*>(this)->visit_params(wrap);
}

std::vector<Param*> Generator::params() {
  std::vector<Param*> out;
  visit_params([&out](Param& p) { out.push_back(&p); });
  return out;
}

Discriminator Discriminator::build(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Discriminator d;
  d.cfg_ = cfg;
  Rng rng(seed);

  int ch = cfg.in_channels;
  for (int k = 0; k < cfg.num_scales; ++k) {
    const int out = cfg.base_channels << k;
    // First stage keeps its bias (no normalization there).
    d.trunk_.push_back(make_conv("trunk" + std::to_string(k), ch, out, 4, 2, 1, k == 0, rng));
    ch = out;
  }
  const int head_ch = cfg.base_channels << cfg.num_scales;
  d.trunk_.push_back(make_conv("trunk_s1", ch, head_ch, 4, 1, 1, false, rng));
  d.patch_head_ = make_conv("patch", head_ch, 1, 4, 1, 1, true, rng);
  d.global_down_ = make_conv("global_down", head_ch, head_ch, 4, 2, 1, true, rng);
  d.global_out_ = make_conv("global_out", head_ch, 1, 1, 1, 0, true, rng);
  return d;
}

int Discriminator::patch_map_size(const DiscriminatorConfig& cfg, int input_size) {
  int s = input_size;
  for (int k = 0; k < cfg.num_scales; ++k) s = (s + 2 - 4) / 2 + 1;
  s = (s + 2 - 4) / 1 + 1;  // stride-1 trunk stage
  s = (s + 2 - 4) / 1 + 1;  // patch head
  return s;
}

DiscOutIds Discriminator::apply_ids(Graph& g, Graph::Id x, bool frozen) {
  const Tensor& xv = g.val(x);
  if (xv.rank() != 3 || xv.dim(0) != cfg_.in_channels)
    throw DataError("discriminator input must have " + std::to_string(cfg_.in_channels) +
                    " channels, got " + shape_str(xv.shape()));
  Graph::Id h = x;
  for (size_t k = 0; k < trunk_.size(); ++k) {
    h = apply_conv(g, trunk_[k], h, frozen);
    if (k > 0) h = g.instance_norm(h);
    h = g.leaky_relu(h, cfg_.lrelu_slope);
  }
  DiscOutIds out;
  out.patch = g.sigmoid_op(apply_conv(g, patch_head_, h, frozen));
  Graph::Id gl = apply_conv(g, global_down_, h, frozen);
  gl = g.leaky_relu(gl, cfg_.lrelu_slope);
  gl = apply_conv(g, global_out_, gl, frozen);
  out.global = g.sigmoid_op(g.global_mean(gl));
  return out;
}

DiscriminatorOutput Discriminator::discriminate(const Tensor& x) const {
  Graph g(false);
  auto* self = const_cast<Discriminator*>(this);
  const DiscOutIds ids = self->apply_ids(g, g.input(x), true);
  return DiscriminatorOutput{g.val(ids.patch), g.val(ids.global)[0]};
}

void Discriminator::visit_params(const std::function<void(Param&)>& fn) {
  for (auto& c : trunk_) visit_conv(c, fn);
  visit_conv(patch_head_, fn);
  visit_conv(global_down_, fn);
  visit_conv(global_out_, fn);
}

void Discriminator::visit_params(const std::function<void(const Param&)>& fn) const {
  std::function<void(Param&)> wrap = [&fn](Param& p) { fn(p); };
  const_cast<Discriminator*>(this)->visit_params(wrap);
}

std::vector<Param*> Discriminator::params() {
  std::vector<Param*> out;
  visit_params([&out](Param& p) { out.push_back(&p); });
  return out;
}

}  // namespace mdt
