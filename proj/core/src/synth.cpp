#include "mdt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "mdt/errors.hpp"
#include "mdt/image_io.hpp"
#include "mdt/rng.hpp"

namespace fs = std::filesystem;

namespace mdt {
namespace {

constexpr std::uint64_t kSceneStream = 0x5ce9e;
constexpr std::uint64_t kDomainStream = 0xd03a1;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Shape {
  int kind;  // 0 circle, 1 rotated rectangle, 2 triangle
  double cx, cy, r1, r2, rot;
  double tx[3], ty[3];
  double color[3];

  bool contains(double x, double y) const {
    switch (kind) {
      case 0: {
        const double dx = x - cx, dy = y - cy;
        return dx * dx + dy * dy <= r1 * r1;
      }
      case 1: {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(rot), s = std::sin(rot);
        const double u = c * dx + s * dy, v = -s * dx + c * dy;
        return std::abs(u) <= r1 && std::abs(v) <= r2;
      }
      default: {
        auto side = [&](int i, int j) {
          return (tx[j] - tx[i]) * (y - ty[i]) - (ty[j] - ty[i]) * (x - tx[i]);
        };
        const double a = side(0, 1), b = side(1, 2), c = side(2, 0);
        return (a >= 0 && b >= 0 && c >= 0) || (a <= 0 && b <= 0 && c <= 0);
      }
    }
  }
};

// Per-domain transform parameters, derived deterministically from the spec
// seed and the domain index.
struct DomainTransform {
  double tone_w[3][3];  // per channel: weights of t, t^2, t^3 (>=0, sum 1)
  double lo[3], hi[3];  // output range per channel
  // shading field: f(x,y) = 1 - amp * s(x,y), s in [0,1]
  double amp, gx, gy, freq_x, freq_y, phase, wave_weight;

  double shade(double x, double y) const {  // x,y in [0,1]
    const double grad = clamp01(0.5 + gx * (x - 0.5) + gy * (y - 0.5));
    const double wave =
        0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * (freq_x * x + freq_y * y) + phase);
    const double s = clamp01((1.0 - wave_weight) * grad + wave_weight * wave);
    return 1.0 - amp * s;
  }

  double tone(int c, double t) const {
    const double* w = tone_w[c];
    const double m = w[0] * t + w[1] * t * t + w[2] * t * t * t;
    return lo[c] + (hi[c] - lo[c]) * m;
  }
};

DomainTransform domain_transform(const SynthSpec& spec, int domain) {
  DomainTransform tr{};
  Rng rng(mix_seed(spec.seed, kDomainStream + static_cast<std::uint64_t>(domain)));
  auto tone_weights = [&rng](double* w, double linear_bias) {
    double a = linear_bias + rng.uniform(0.0, 1.0);
    double b = rng.uniform(0.0, 1.0);
    double c = rng.uniform(0.0, 1.0);
    const double s = a + b + c;
    w[0] = a / s;
    w[1] = b / s;
    w[2] = c / s;
  };
  switch (domain) {
    case 0:  // "normal": near-identity tones, no shading
      for (int c = 0; c < 3; ++c) {
        tone_weights(tr.tone_w[c], 6.0);
        tr.lo[c] = rng.uniform(0.02, 0.06);
        tr.hi[c] = rng.uniform(0.94, 1.0);
      }
      tr.amp = 0.0;
      tr.gx = tr.gy = tr.freq_x = tr.freq_y = tr.phase = tr.wave_weight = 0.0;
      break;
    case 1:  // "shadow": directional darkening
      for (int c = 0; c < 3; ++c) {
        tone_weights(tr.tone_w[c], 3.0);
        tr.lo[c] = rng.uniform(0.02, 0.08);
        tr.hi[c] = rng.uniform(0.82, 0.92);
      }
      tr.amp = rng.uniform(0.45, 0.6);
      tr.gx = rng.uniform(0.8, 1.4);
      tr.gy = rng.uniform(0.4, 0.9);
      tr.freq_x = rng.uniform(0.5, 1.0);
      tr.freq_y = rng.uniform(0.5, 1.0);
      tr.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      tr.wave_weight = rng.uniform(0.15, 0.3);
      break;
    case 2:  // "dark": global low range, compressive tones
      for (int c = 0; c < 3; ++c) {
        double w3 = 1.5 + rng.uniform(0.0, 1.0);
        double w1 = rng.uniform(0.2, 0.5);
        double w2 = rng.uniform(0.0, 0.5);
        const double s = w1 + w2 + w3;
        tr.tone_w[c][0] = w1 / s;
        tr.tone_w[c][1] = w2 / s;
        tr.tone_w[c][2] = w3 / s;
        tr.lo[c] = rng.uniform(0.0, 0.03);
        tr.hi[c] = rng.uniform(0.38, 0.5);
      }
      tr.amp = rng.uniform(0.05, 0.12);
      tr.gx = rng.uniform(-0.3, 0.3);
      tr.gy = rng.uniform(-0.3, 0.3);
      tr.freq_x = rng.uniform(0.5, 1.5);
      tr.freq_y = rng.uniform(0.5, 1.5);
      tr.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      tr.wave_weight = 1.0;
      break;
    default:  // extra domains: randomized but always monotone and distinct
      for (int c = 0; c < 3; ++c) {
        tone_weights(tr.tone_w[c], rng.uniform(0.5, 4.0));
        tr.lo[c] = rng.uniform(0.0, 0.15);
        tr.hi[c] = rng.uniform(0.55, 1.0);
      }
      tr.amp = rng.uniform(0.1, 0.5);
      tr.gx = rng.uniform(-1.2, 1.2);
      tr.gy = rng.uniform(-1.2, 1.2);
      tr.freq_x = rng.uniform(0.5, 2.0);
      tr.freq_y = rng.uniform(0.5, 2.0);
      tr.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      tr.wave_weight = rng.uniform(0.0, 1.0);
      break;
  }
  return tr;
}

}  // namespace

void SynthSpec::validate() const {
  if (num_domains < 2) throw ConfigError("synth: num_domains must be >= 2");
  if (image_size < 8) throw ConfigError("synth: image_size must be >= 8");
  if (train_per_domain < 1 || test_per_domain < 1)
    throw ConfigError("synth: split sizes must be >= 1");
}

Tensor render_scene(const SynthSpec& spec, int scene_id) {
  const int S = spec.image_size;
  Rng rng(mix_seed(spec.seed, kSceneStream + static_cast<std::uint64_t>(scene_id)));
  Tensor img({3, S, S});

  // Smooth background.
  double a1[3], a2[3], f1x[3], f1y[3], f2x[3], f2y[3], p1[3], p2[3];
  for (int c = 0; c < 3; ++c) {
    a1[c] = rng.uniform(0.05, 0.15);
    a2[c] = rng.uniform(0.04, 0.1);
    f1x[c] = rng.uniform(0.4, 1.6);
    f1y[c] = rng.uniform(0.4, 1.6);
    f2x[c] = rng.uniform(1.0, 2.8);
    f2y[c] = rng.uniform(1.0, 2.8);
    p1[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p2[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double u = (x + 0.5) / S, v = (y + 0.5) / S;
        const double bk =
            0.5 + a1[c] * std::cos(2.0 * std::numbers::pi * (f1x[c] * u + f1y[c] * v) + p1[c]) +
            a2[c] * std::cos(2.0 * std::numbers::pi * (f2x[c] * u + f2y[c] * v) + p2[c]);
        img.at(c, y, x) = std::clamp(bk, 0.1, 0.9);
      }

  const int n_shapes = 5 + rng.uniform_int(4);
  for (int s = 0; s < n_shapes; ++s) {
    Shape sh{};
    sh.kind = rng.uniform_int(3);
    sh.cx = rng.uniform(0.1, 0.9) * S;
    sh.cy = rng.uniform(0.1, 0.9) * S;
    sh.r1 = rng.uniform(0.08, 0.22) * S;
    sh.r2 = rng.uniform(0.06, 0.2) * S;
    sh.rot = rng.uniform(0.0, std::numbers::pi);
    for (int k = 0; k < 3; ++k) {
      sh.tx[k] = sh.cx + rng.uniform(-0.25, 0.25) * S;
      sh.ty[k] = sh.cy + rng.uniform(-0.25, 0.25) * S;
    }
    for (int c = 0; c < 3; ++c) sh.color[c] = rng.uniform(0.05, 0.95);
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x)
        if (sh.contains(x + 0.5, y + 0.5))
          for (int c = 0; c < 3; ++c) img.at(c, y, x) = sh.color[c];
  }
  return img;
}

Tensor apply_domain_transform(const SynthSpec& spec, int domain, const Tensor& scene) {
  if (domain < 0 || domain >= spec.num_domains) throw ConfigError("synth: domain out of range");
  const DomainTransform tr = domain_transform(spec, domain);
  const int S = spec.image_size;
  Tensor out({3, S, S});
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double f = tr.shade((x + 0.5) / S, (y + 0.5) / S);
      for (int c = 0; c < 3; ++c) {
        const double t = clamp01(scene.at(c, y, x));
        const double u = clamp01(tr.tone(c, t) * f);
        // Snap to the 8-bit grid so the in-memory value equals the value a
        // reload of the stored PNG produces.
        const auto byte = static_cast<unsigned char>(std::round(u * 255.0));
        out.at(c, y, x) = normalize_pixel(byte);
      }
    }
  return out;
}

std::string synth_domain_name(const SynthSpec& spec, int domain) {
  static const char* suffix[3] = {"_normal", "_shadow", "_dark"};
  char buf[8];
  std::snprintf(buf, sizeof(buf), "d%02d", domain);
  std::string name(buf);
  if (domain < 3) name += suffix[domain];
  (void)spec;
  return name;
}

DatasetSplits synth_generate(const SynthSpec& spec) {
  spec.validate();
  DatasetSplits out;
  auto make_split = [&spec](int scene_begin, int scene_end) {
    MultiDomainDataset ds;
    ds.image_size = spec.image_size;
    std::vector<std::vector<int>> scenes(static_cast<size_t>(spec.num_domains));
    for (int d = 0; d < spec.num_domains; ++d) {
      DomainImages dom;
      dom.name = synth_domain_name(spec, d);
      for (int s = scene_begin; s < scene_end; ++s) {
        const Tensor scene = render_scene(spec, s);
        dom.images.push_back(apply_domain_transform(spec, d, scene));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s%06d.png", s);
        dom.files.emplace_back(buf);
        scenes[static_cast<size_t>(d)].push_back(s);
      }
      ds.domains.push_back(std::move(dom));
    }
    ds.scene_ids = std::move(scenes);
    ds.validate();
    return ds;
  };
  out.train = make_split(0, spec.train_per_domain);
  out.test = make_split(spec.train_per_domain, spec.train_per_domain + spec.test_per_domain);
  return out;
}

void write_synth_dataset(const SynthSpec& spec, const std::string& root,
                         const std::vector<std::pair<std::string, std::string>>& extra_text) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (!fs::is_directory(root)) throw IoError("cannot create dataset root '" + root + "'");

  nlohmann::ordered_json pairs;
  pairs["scenes"] = nlohmann::json::array();

  const int total = spec.train_per_domain + spec.test_per_domain;
  for (int s = 0; s < total; ++s) {
    const bool is_train = s < spec.train_per_domain;
    const std::string split = is_train ? "train" : "test";
    const Tensor scene = render_scene(spec, s);
    nlohmann::ordered_json entry;
    entry["id"] = s;
    entry["split"] = split;
    nlohmann::ordered_json files;
    for (int d = 0; d < spec.num_domains; ++d) {
      const std::string dom = synth_domain_name(spec, d);
      const fs::path dir = fs::path(root) / split / dom;
      fs::create_directories(dir);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "s%06d.png", s);
      const Tensor img = apply_domain_transform(spec, d, scene);
      write_png_file((dir / buf).string(), to_raw_image(img), extra_text);
      files[dom] = dom + "/" + buf;
    }
    entry["files"] = std::move(files);
    pairs["scenes"].push_back(std::move(entry));
  }

  std::ofstream pf(fs::path(root) / "pairs.json");
  pf << pairs.dump(1) << "\n";

  nlohmann::ordered_json sj;
  sj["num_domains"] = spec.num_domains;
  sj["image_size"] = spec.image_size;
  sj["train_per_domain"] = spec.train_per_domain;
  sj["test_per_domain"] = spec.test_per_domain;
  sj["seed"] = spec.seed;
  for (const auto& [k, v] : extra_text) sj[k] = v;
  std::ofstream sf(fs::path(root) / "spec.json");
  sf << sj.dump(1) << "\n";
}

}  // namespace mdt
