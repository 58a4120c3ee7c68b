#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdt/rng.hpp"
#include "mdt/tensor.hpp"

namespace mdt {

struct DomainImages {
  std::string name;
  std::vector<std::string> files;  // lexicographic, relative to the domain dir
  std::vector<Tensor> images;     // normalized (3,S,S) in [-1,1]
  int size() const { return static_cast<int>(images.size()); }
};

// N domain collections plus an optional pairing table. When present,
// scene_ids[d][i] is the scene behind image i of domain d; two images of
// different domains are ground-truth partners iff their scene ids match.
struct MultiDomainDataset {
  int image_size = 0;
  std::vector<DomainImages> domains;
  std::optional<std::vector<std::vector<int>>> scene_ids;

  int num_domains() const { return static_cast<int>(domains.size()); }
  bool has_pairing() const { return scene_ids.has_value(); }
  // Index of the partner of (domain, index) inside to_domain. Requires a
  // pairing table; the table is a bijection between any two domains.
  int partner_index(int domain, int index, int to_domain) const;
  void validate() const;
};

// One image index per domain, drawn independently and uniformly.
struct UnpairedBag {
  std::vector<int> index_per_domain;
};

// Lexicographic domain order by folder name; images lexicographic by file
// name; every image resized to image_size and normalized via pixel/127.5 - 1.
// Undecodable files are skipped with a warning on stderr; an empty domain is
// an error.
MultiDomainDataset load_domain_folders(const std::string& root, int image_size);

UnpairedBag sample_bag(const MultiDomainDataset& ds, Rng& rng);

// A dataset root and its optional train/test sub-roots. If `root/train`
// exists it is the training split and `root/test` the test split; otherwise
// the root itself serves as both. pairs.json at the root, when present,
// provides the pairing tables.
struct DatasetSplits {
  MultiDomainDataset train;
  MultiDomainDataset test;
};
DatasetSplits load_dataset_root(const std::string& root, int image_size);

}  // namespace mdt
