#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/data.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

// Procedural multi-domain dataset with hidden pairwise ground truth: every
// domain stores transform_d(scene) for the same scenes, so any ordered domain
// pair has exact partners. Transforms are per-channel monotone tone curves
// plus a smooth multiplicative shading field, fixed per domain — an analog of
// illumination domains.
struct SynthSpec {
  int num_domains = 3;
  int image_size = 64;
  int train_per_domain = 150;
  int test_per_domain = 99;
  std::uint64_t seed = 0;

  void validate() const;
};

// Scene in [0,1] RGB: random colored geometric shapes over a smooth
// low-frequency background. Deterministic in (spec.seed, scene_id).
Tensor render_scene(const SynthSpec& spec, int scene_id);

// Applies domain d's transform and snaps to the 8-bit grid, returning the
// [-1,1] tensor exactly as it will be stored and reloaded.
Tensor apply_domain_transform(const SynthSpec& spec, int domain, const Tensor& scene);

std::string synth_domain_name(const SynthSpec& spec, int domain);

// In-memory generation. Train scenes are [0, train_per_domain); test scenes
// [train_per_domain, train_per_domain + test_per_domain). Both splits carry
// the pairing table.
DatasetSplits synth_generate(const SynthSpec& spec);

// Materializes root/train/<domain>/, root/test/<domain>/, root/pairs.json and
// root/spec.json. Deterministic: re-running produces byte-identical files.
// extra_text is embedded in every PNG (e.g. the experiment config hash).
void write_synth_dataset(const SynthSpec& spec, const std::string& root,
                         const std::vector<std::pair<std::string, std::string>>& extra_text = {});

}  // namespace mdt
