#include "mdt/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "mdt/errors.hpp"
#include "mdt/image_io.hpp"

namespace fs = std::filesystem;

namespace mdt {

void MultiDomainDataset::validate() const {
  if (num_domains() < 2) throw ConfigError("dataset needs at least 2 domains");
  for (const auto& d : domains) {
    if (d.images.empty()) throw DataError("domain '" + d.name + "' is empty");
    for (const auto& img : d.images)
      if (img.rank() != 3 || img.dim(1) != image_size || img.dim(2) != image_size)
        throw DataError("domain '" + d.name + "' holds an image of shape " +
                        shape_str(img.shape()));
  }
  if (scene_ids) {
    if (static_cast<int>(scene_ids->size()) != num_domains())
      throw DataError("pairing table domain count mismatch");
    for (int d = 0; d < num_domains(); ++d)
      if ((*scene_ids)[d].size() != domains[d].images.size())
        throw DataError("pairing table size mismatch in domain '" + domains[d].name + "'");
  }
}

int MultiDomainDataset::partner_index(int domain, int index, int to_domain) const {
  if (!scene_ids) throw DataError("dataset has no pairing table");
  const int scene = (*scene_ids)[static_cast<size_t>(domain)][static_cast<size_t>(index)];
  const auto& target = (*scene_ids)[static_cast<size_t>(to_domain)];
  const auto it = std::find(target.begin(), target.end(), scene);
  if (it == target.end())
    throw DataError("scene " + std::to_string(scene) + " missing from domain " +
                    std::to_string(to_domain));
  return static_cast<int>(it - target.begin());
}

MultiDomainDataset load_domain_folders(const std::string& root, int image_size) {
  if (!fs::is_directory(root)) throw DataError("dataset root '" + root + "' is not a directory");
  std::vector<std::string> folders;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) folders.push_back(e.path().filename().string());
  std::sort(folders.begin(), folders.end());
  if (folders.size() < 2)
    throw DataError("dataset root '" + root + "' must contain at least 2 domain folders");

  MultiDomainDataset ds;
  ds.image_size = image_size;
  for (const auto& name : folders) {
    DomainImages dom;
    dom.name = name;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / name))
      if (e.is_regular_file()) files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        const RawImage raw = read_png_file((fs::path(root) / name / f).string());
        dom.images.push_back(to_image_tensor(raw, image_size));
        dom.files.push_back(f);
      } catch (const DataError& e) {
        std::cerr << "warning: skipping undecodable image " << name << "/" << f << ": "
                  << e.what() << "\n";
      }
    }
    if (dom.images.empty()) throw DataError("domain folder '" + name + "' has no decodable image");
    ds.domains.push_back(std::move(dom));
  }
  ds.validate();
  return ds;
}

UnpairedBag sample_bag(const MultiDomainDataset& ds, Rng& rng) {
  UnpairedBag bag;
  bag.index_per_domain.reserve(static_cast<size_t>(ds.num_domains()));
  for (const auto& dom : ds.domains) {
    if (dom.images.empty()) throw DataError("cannot sample from empty domain '" + dom.name + "'");
    bag.index_per_domain.push_back(rng.uniform_int(dom.size()));
  }
  return bag;
}

namespace {

// Attaches scene ids from pairs.json to a loaded split by file name.
void attach_pairing(MultiDomainDataset& ds, const fs::path& pairs_path) {
  std::ifstream in(pairs_path);
  if (!in) return;
  nlohmann::json j;
  in >> j;
  // file name -> scene id, per domain
  std::vector<std::map<std::string, int>> by_file(static_cast<size_t>(ds.num_domains()));
  std::map<std::string, int> domain_index;
  for (int d = 0; d < ds.num_domains(); ++d) domain_index[ds.domains[d].name] = d;
  for (const auto& scene : j.at("scenes")) {
    const int id = scene.at("id").get<int>();
    for (const auto& [dom_name, file] : scene.at("files").items()) {
      const auto it = domain_index.find(dom_name);
      if (it == domain_index.end()) continue;
      // stored paths are "<domain>/<file>"
      const std::string f = fs::path(file.get<std::string>()).filename().string();
      by_file[static_cast<size_t>(it->second)][f] = id;
    }
  }
  std::vector<std::vector<int>> scene_ids(static_cast<size_t>(ds.num_domains()));
  for (int d = 0; d < ds.num_domains(); ++d) {
    const auto& dom = ds.domains[static_cast<size_t>(d)];
    auto& ids = scene_ids[static_cast<size_t>(d)];
    for (const auto& f : dom.files) {
      const auto it = by_file[static_cast<size_t>(d)].find(f);
      if (it == by_file[static_cast<size_t>(d)].end()) return;  // unmatched file: no pairing
      ids.push_back(it->second);
    }
  }
  ds.scene_ids = std::move(scene_ids);
}

}  // namespace

DatasetSplits load_dataset_root(const std::string& root, int image_size) {
  DatasetSplits out;
  const fs::path r(root);
  const bool split_layout = fs::is_directory(r / "train");
  out.train = load_domain_folders(split_layout ? (r / "train").string() : root, image_size);
  if (fs::is_directory(r / "test"))
    out.test = load_domain_folders((r / "test").string(), image_size);
  else
    out.test = out.train;
  if (fs::exists(r / "pairs.json")) {
    attach_pairing(out.train, r / "pairs.json");
    attach_pairing(out.test, r / "pairs.json");
  }
  return out;
}

}  // namespace mdt
