#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mdt/graph.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

// Architecture of the translator: one shared encoder and num_domains
// structurally identical decoders. image_size must be divisible by
// 2^num_downsample so every resolution in the pyramid is exact.
struct GeneratorConfig {
  int num_domains = 2;
  int image_size = 256;
  int in_channels = 3;
  int base_channels = 64;
  int num_downsample = 3;
  int num_res_blocks = 6;
  double lrelu_slope = 0.2;

  void validate() const;
  int bottleneck_channels() const { return base_channels << (num_downsample - 1); }
  int bottleneck_size() const { return image_size >> num_downsample; }
};

struct DiscriminatorConfig {
  int in_channels = 3;
  int base_channels = 64;
  // Number of stride-2 trunk stages. The trunk ends with one stride-1 stage;
  // the default of 3 gives the 70x70 patch receptive field.
  int num_scales = 3;
  double lrelu_slope = 0.2;

  void validate() const;
};

// Patch probabilities plus a whole-image probability, both in (0,1).
struct DiscriminatorOutput {
  Tensor patch_map;     // (1, hp, wp)
  double global_score;  // scalar
};

// Graph-node handles for the two discriminator heads.
struct DiscOutIds {
  Graph::Id patch;
  Graph::Id global;
};

// One stride-2 (or stride-1) convolution, optionally transposed.
struct ConvSpec {
  Param w;
  Param b;
  bool has_bias = false;
  bool transposed = false;
  int stride = 2;
  int pad = 1;
};

struct ResBlock {
  ConvSpec c1, c2;
};

struct EncodedIds {
  Graph::Id latent;
  std::vector<Graph::Id> skips;  // finest first
};

// Plain-value encoding result for inference use.
struct Encoded {
  Tensor latent;
  std::vector<Tensor> skips;
};

class Generator {
public:
  static Generator build(const GeneratorConfig& cfg, std::uint64_t seed);

  const GeneratorConfig& config() const { return cfg_; }

  // Graph builders (training path). `frozen` uses parameters as constants.
  EncodedIds encode_ids(Graph& g, Graph::Id x, bool frozen = false);
  Graph::Id decode_ids(Graph& g, int domain, const EncodedIds& enc, bool frozen = false);

  // Inference entry points; pure functions of (parameters, input).
  Encoded encode(const Tensor& x) const;
  Tensor decode(int domain, const Encoded& enc) const;
  Tensor translate(const Tensor& x, int target) const;
  // One shared encoding, then every decoder.
  std::vector<Tensor> translate_all(const Tensor& x) const;

  void visit_params(const std::function<void(Param&)>& fn);
  void visit_params(const std::function<void(const Param&)>& fn) const;
  std::vector<Param*> params();

private:
  void check_input(const Tensor& x) const;
  void check_domain(int domain) const;

  GeneratorConfig cfg_;
  std::vector<ConvSpec> downs_;
  std::vector<ResBlock> enc_blocks_;
  struct Decoder {
    std::vector<ResBlock> blocks;
    std::vector<ConvSpec> ups;
  };
  std::vector<Decoder> decoders_;

  friend class GeneratorAccess;
};

class Discriminator {
public:
  static Discriminator build(const DiscriminatorConfig& cfg, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return cfg_; }

  DiscOutIds apply_ids(Graph& g, Graph::Id x, bool frozen = false);
  DiscriminatorOutput discriminate(const Tensor& x) const;

  // Spatial size of the patch map for a square input.
  static int patch_map_size(const DiscriminatorConfig& cfg, int input_size);

  void visit_params(const std::function<void(Param&)>& fn);
  void visit_params(const std::function<void(const Param&)>& fn) const;
  std::vector<Param*> params();

private:
  DiscriminatorConfig cfg_;
  std::vector<ConvSpec> trunk_;  // num_scales stride-2 stages + one stride-1 stage
  ConvSpec patch_head_;
  ConvSpec global_down_;
  ConvSpec global_out_;  // 1x1 to one channel
};

}  // namespace mdt
