#pragma once

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "mdt/data.hpp"
#include "mdt/model.hpp"
#include "mdt/rng.hpp"
#include "mdt/tensor.hpp"

namespace fixtures {

inline mdt::Tensor random_image(int c, int s, mdt::Rng& rng) {
  mdt::Tensor t({c, s, s});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

inline bool identical(const mdt::Tensor& a, const mdt::Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(double)) == 0;
}

inline mdt::GeneratorConfig micro_gen(int domains = 2, int size = 8) {
  mdt::GeneratorConfig cfg;
  cfg.num_domains = domains;
  cfg.image_size = size;
  cfg.base_channels = 4;
  cfg.num_downsample = 2;
  cfg.num_res_blocks = 1;
  return cfg;
}

inline mdt::DiscriminatorConfig micro_disc() {
  mdt::DiscriminatorConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 1;
  return cfg;
}

inline mdt::MultiDomainDataset tiny_dataset(int domains, int per_domain, int size,
                                            std::uint64_t seed) {
  mdt::MultiDomainDataset ds;
  ds.image_size = size;
  mdt::Rng rng(seed);
  for (int d = 0; d < domains; ++d) {
    mdt::DomainImages dom;
    dom.name = "d" + std::to_string(d);
    for (int k = 0; k < per_domain; ++k) {
      dom.images.push_back(random_image(3, size, rng));
      dom.files.push_back("x" + std::to_string(k) + ".png");
    }
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

// Unique scratch directory under the system temp dir; removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("mdt_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path path() const { return path_; }
  std::string str() const { return path_.string(); }

private:
  std::filesystem::path path_;
};

}  // namespace fixtures
