#include "mdt/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "mdt/checkpoint.hpp"
#include "mdt/classifier.hpp"
#include "mdt/errors.hpp"
#include "mdt/image_io.hpp"
#include "mdt/metrics.hpp"
#include "mdt/schedule.hpp"

namespace fs = std::filesystem;

namespace mdt::cli {
namespace {

PngText hash_text(const std::string& hash) { return {{"mdt_config_hash", hash}}; }

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw IoError("cannot create directory '" + p.string() + "'");
}

// N rows (source domains) by N+1 columns (input, then every translation).
Tensor sample_grid(const Generator& gen, const std::vector<Tensor>& exemplars) {
  const int n = static_cast<int>(exemplars.size());
  const int s = gen.config().image_size;
  Tensor grid({3, n * s, (n + 1) * s});
  auto paste = [&grid, s](const Tensor& img, int row, int col) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) grid.at(c, row * s + y, col * s + x) = img.at(c, y, x);
  };
  for (int i = 0; i < n; ++i) {
    paste(exemplars[static_cast<size_t>(i)], i, 0);
    const auto outs = gen.translate_all(exemplars[static_cast<size_t>(i)]);
    for (int j = 0; j < n; ++j) paste(outs[static_cast<size_t>(j)], i, j + 1);
  }
  return grid;
}

void check_checkpoint_consistency(const ExperimentConfig& cfg, const TrainState& st,
                                  const std::string& ckpt_hash) {
  if (cfg.is_explicit("image_size") && cfg.gen.image_size != st.gen_cfg.image_size)
    throw ConfigError("config hash mismatch: checkpoint (" + ckpt_hash + ") was trained at " +
                      std::to_string(st.gen_cfg.image_size) + "px, got --image-size " +
                      std::to_string(cfg.gen.image_size));
  if (cfg.is_explicit("domains") && cfg.gen.num_domains != st.gen_cfg.num_domains)
    throw ConfigError("config hash mismatch: checkpoint (" + ckpt_hash + ") has " +
                      std::to_string(st.gen_cfg.num_domains) + " domains, got --domains " +
                      std::to_string(cfg.gen.num_domains));
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const TrainingHalted*>(&e)) return kTrainingHaltExit;
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigExit;
  if (dynamic_cast<const DataError*>(&e)) return kDataExit;
  if (dynamic_cast<const IoError*>(&e)) return kIoExit;
  return kFailure;
}

void cmd_synth(const ExperimentConfig& cfg) {
  cfg.synth.validate();
  write_synth_dataset(cfg.synth, cfg.out_dir, hash_text(cfg.config_hash()));
  std::cout << "dataset written to " << cfg.out_dir << " (" << cfg.synth.num_domains
            << " domains, " << cfg.synth.train_per_domain << " train + "
            << cfg.synth.test_per_domain << " test per domain)\n";
}

void cmd_train(ExperimentConfig cfg) {
  if (cfg.dataset.empty()) throw ConfigError("train: --dataset is required");
  const DatasetSplits splits = load_dataset_root(cfg.dataset, cfg.gen.image_size);
  MultiDomainDataset train_ds = splits.train;
  train_ds.scene_ids.reset();  // the trainer never sees pairings
  if (cfg.is_explicit("domains") && cfg.gen.num_domains != train_ds.num_domains())
    throw ConfigError("--domains " + std::to_string(cfg.gen.num_domains) + " but dataset has " +
                      std::to_string(train_ds.num_domains()));
  cfg.gen.num_domains = train_ds.num_domains();
  cfg.sync();
  const std::string hash = cfg.config_hash();

  ensure_dir(cfg.out_dir);
  ensure_dir(fs::path(cfg.out_dir) / "checkpoints");
  ensure_dir(fs::path(cfg.out_dir) / "samples");
  const std::string log_path = (fs::path(cfg.out_dir) / "train_log.jsonl").string();
  const std::string latest = (fs::path(cfg.out_dir) / "ckpt_latest.mdtckpt").string();

  TrainState st;
  std::ofstream log;
  if (!cfg.resume.empty()) {
    const std::string path = cfg.resume == "auto" ? latest : cfg.resume;
    st = load_checkpoint(path);
    const std::string ckpt_hash = checkpoint_config_hash(path);
    if (ckpt_hash != hash)
      throw ConfigError("resume: checkpoint config hash " + ckpt_hash +
                        " does not match this configuration (" + hash + ")");
    log.open(log_path, std::ios::app);
    if (!log) throw IoError("cannot append to " + log_path);
    std::cout << "resuming from " << path << " at epoch " << st.next_epoch << "\n";
  } else {
    st = init_training(train_ds, cfg.gen, cfg.disc, cfg.train);
    log.open(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot create " + log_path);
    nlohmann::ordered_json header;
    header["schema"] = "mdt-train-log/1";
    header["config_hash"] = hash;
    log << header.dump() << "\n";
  }

  // Test exemplars for the per-epoch sample grid (first test image per domain).
  std::vector<Tensor> exemplars;
  for (const auto& d : splits.test.domains) exemplars.push_back(d.images.front());

  TrainSinks sinks;
  sinks.on_iteration = [&log](const LossRecord& r) { log << r.to_json_line() << "\n"; };
  sinks.on_epoch = [&](int epoch, const LossRecord& mean, TrainState& state) {
    log.flush();
    char name[40];
    std::snprintf(name, sizeof(name), "epoch_%04d.mdtckpt", epoch);
    const std::string ckpt = (fs::path(cfg.out_dir) / "checkpoints" / name).string();
    save_checkpoint(state, ckpt, hash);
    std::error_code ec;
    fs::copy_file(ckpt, latest, fs::copy_options::overwrite_existing, ec);
    if (ec) throw IoError("cannot update " + latest + ": " + ec.message());

    char gname[32];
    std::snprintf(gname, sizeof(gname), "epoch_%04d.png", epoch);
    write_png_file((fs::path(cfg.out_dir) / "samples" / gname).string(),
                   to_raw_image(sample_grid(state.gen, exemplars)), hash_text(hash));
    std::cout << "epoch " << epoch << " lr " << lr_at_epoch(epoch, state.train_cfg)
              << " total_g " << mean.total_g << "\n";
  };

  auto halt_save = [&](TrainState& state) {
    const std::string path = (fs::path(cfg.out_dir) / "ckpt_halt.mdtckpt").string();
    save_checkpoint(state, path, hash);
    return path;
  };

  train(st, train_ds, sinks, halt_save);
  std::cout << "training finished after " << st.next_epoch << " epochs; checkpoint: " << latest
            << "\n";
}

void cmd_translate(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("translate: --checkpoint is required");
  if (cfg.inputs.empty()) throw ConfigError("translate: at least one input image is required");
  const TrainState st = load_checkpoint(cfg.checkpoint);
  const std::string ckpt_hash = checkpoint_config_hash(cfg.checkpoint);
  check_checkpoint_consistency(cfg, st, ckpt_hash);

  for (const auto& input : cfg.inputs) {
    const Tensor x = to_image_tensor(read_png_file(input), st.gen_cfg.image_size);
    const std::vector<Tensor> outs = st.gen.translate_all(x);
    const fs::path dir = cfg.is_explicit("out") ? fs::path(cfg.out_dir)
                                                : fs::path(input).parent_path();
    if (cfg.is_explicit("out")) ensure_dir(dir);
    for (int d = 0; d < st.gen_cfg.num_domains; ++d) {
      const std::string name = stem_of(input) + ".to_" +
                               st.domain_names[static_cast<size_t>(d)] + ".png";
      write_png_file((dir / name).string(), to_raw_image(outs[static_cast<size_t>(d)]),
                     hash_text(ckpt_hash));
    }
  }
}

namespace {

struct PairMetrics {
  double ssim_mean = 0.0, ssim_std = 0.0;
  double fid_v = 0.0;
  double kid_mean = 0.0, kid_std = 0.0;
  double cosine = 0.0;
  bool paired = false;
  std::vector<double> ssim_values;
};

void write_curve_csv(const std::string& path, const IqaCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path);
  out << "threshold,fraction\n";
  for (size_t i = 0; i < curve.thresholds.size(); ++i)
    out << curve.thresholds[i] << "," << curve.fractions[i] << "\n";
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 50; ++i) t.push_back(i / 50.0);
  return t;
}

}  // namespace

void cmd_evaluate(const ExperimentConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("evaluate: --checkpoint is required");
  if (cfg.dataset.empty()) throw ConfigError("evaluate: --dataset is required");
  const TrainState st = load_checkpoint(cfg.checkpoint);
  const std::string ckpt_hash = checkpoint_config_hash(cfg.checkpoint);
  check_checkpoint_consistency(cfg, st, ckpt_hash);

  const DatasetSplits splits = load_dataset_root(cfg.dataset, st.gen_cfg.image_size);
  const MultiDomainDataset& test = splits.test;
  if (test.num_domains() != st.gen_cfg.num_domains)
    throw ConfigError("dataset has " + std::to_string(test.num_domains()) +
                      " domains, checkpoint expects " + std::to_string(st.gen_cfg.num_domains));
  const int n = test.num_domains();
  const bool paired = test.has_pairing();
  if (!paired)
    std::cerr << "warning: no pairing table; paired metrics (ssim, cosine) will be null\n";

  // Embedder: a small classifier trained from scratch on the real train split.
  ClassifierConfig ccfg;
  ccfg.base_channels = cfg.metrics.clf_base_channels;
  ccfg.epochs = cfg.metrics.clf_epochs;
  ccfg.batch_size = cfg.metrics.clf_batch_size;
  ccfg.lr = cfg.metrics.clf_lr;
  ccfg.seed = cfg.seed;
  const DomainClassifier clf = train_domain_classifier(splits.train, ccfg);
  const Embedder emb = clf.embedder();

  // Real held-out accuracy.
  std::vector<Tensor> real_all;
  std::vector<int> real_labels;
  for (int d = 0; d < n; ++d)
    for (const auto& img : test.domains[static_cast<size_t>(d)].images) {
      real_all.push_back(img);
      real_labels.push_back(d);
    }
  const double real_acc = classification_accuracy(clf, real_all, real_labels);

  // All translations: trans[src][k][tgt].
  std::vector<std::vector<std::vector<Tensor>>> trans(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& dom = test.domains[static_cast<size_t>(i)];
    trans[static_cast<size_t>(i)].reserve(dom.images.size());
    for (const auto& img : dom.images)
      trans[static_cast<size_t>(i)].push_back(st.gen.translate_all(img));
  }

  // Real feature sets per domain.
  std::vector<FeatureSet> real_fs(static_cast<size_t>(n));
  for (int d = 0; d < n; ++d)
    real_fs[static_cast<size_t>(d)] = embed(test.domains[static_cast<size_t>(d)].images, emb);

  std::map<std::pair<int, int>, PairMetrics> pair_metrics;
  std::vector<double> all_ssim;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      PairMetrics pm;
      const auto& src = test.domains[static_cast<size_t>(i)];
      std::vector<Tensor> fakes;
      for (size_t k = 0; k < src.images.size(); ++k)
        fakes.push_back(trans[static_cast<size_t>(i)][k][static_cast<size_t>(j)]);
      const FeatureSet fake_fs = embed(fakes, emb);
      pm.fid_v = fid(fake_fs, real_fs[static_cast<size_t>(j)]);
      const KidResult kr = kid(fake_fs, real_fs[static_cast<size_t>(j)],
                               cfg.metrics.kid_block_size, cfg.metrics.kid_blocks, cfg.seed);
      pm.kid_mean = kr.mean;
      pm.kid_std = kr.stddev;
      if (paired) {
        pm.paired = true;
        std::vector<int> pairing;
        for (size_t k = 0; k < src.images.size(); ++k)
          pairing.push_back(test.partner_index(i, static_cast<int>(k), j));
        for (size_t k = 0; k < src.images.size(); ++k) {
          const Tensor& gt =
              test.domains[static_cast<size_t>(j)].images[static_cast<size_t>(pairing[k])];
          pm.ssim_values.push_back(ssim(fakes[k], gt));
        }
        double mean = 0.0;
        for (double v : pm.ssim_values) mean += v;
        mean /= static_cast<double>(pm.ssim_values.size());
        double var = 0.0;
        for (double v : pm.ssim_values) var += (v - mean) * (v - mean);
        pm.ssim_mean = mean;
        pm.ssim_std = pm.ssim_values.size() > 1
                          ? std::sqrt(var / static_cast<double>(pm.ssim_values.size() - 1))
                          : 0.0;
        pm.cosine = cosine_feature_distance(real_fs[static_cast<size_t>(j)], fake_fs, pairing);
        all_ssim.insert(all_ssim.end(), pm.ssim_values.begin(), pm.ssim_values.end());
      }
      pair_metrics[{i, j}] = std::move(pm);
    }
  }

  // Per-target classification accuracy over strict translations (i != j).
  std::vector<double> target_acc(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::vector<Tensor> imgs;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      if (i == j) continue;
      for (size_t k = 0; k < trans[static_cast<size_t>(i)].size(); ++k) {
        imgs.push_back(trans[static_cast<size_t>(i)][k][static_cast<size_t>(j)]);
        labels.push_back(j);
      }
    }
    target_acc[static_cast<size_t>(j)] = classification_accuracy(clf, imgs, labels);
  }

  // Per-source diversity across the N translate_all outputs.
  std::vector<double> source_div(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<FeatureSet> per_target;
    for (int j = 0; j < n; ++j) {
      std::vector<Tensor> imgs;
      for (size_t k = 0; k < trans[static_cast<size_t>(i)].size(); ++k)
        imgs.push_back(trans[static_cast<size_t>(i)][k][static_cast<size_t>(j)]);
      per_target.push_back(embed(imgs, emb));
    }
    source_div[static_cast<size_t>(i)] = diversity_score(per_target);
  }

  ensure_dir(cfg.out_dir);
  ensure_dir(fs::path(cfg.out_dir) / "curves");

  nlohmann::ordered_json report;
  report["schema"] = "mdt-eval/1";
  report["task"] = fs::path(cfg.dataset).filename().string();
  report["config_hash"] = cfg.config_hash();
  report["checkpoint_config_hash"] = ckpt_hash;
  report["seed"] = cfg.seed;
  report["embedder"] = emb.id;
  report["classifier_held_out_accuracy"] = real_acc;

  auto pairs = nlohmann::ordered_json::array();
  double agg_ssim = 0.0, agg_fid = 0.0, agg_kid = 0.0, agg_cos = 0.0;
  int pair_count = 0;
  for (const auto& [key, pm] : pair_metrics) {
    nlohmann::ordered_json pj;
    pj["source"] = test.domains[static_cast<size_t>(key.first)].name;
    pj["target"] = test.domains[static_cast<size_t>(key.second)].name;
    if (pm.paired) {
      pj["ssim_mean"] = pm.ssim_mean;
      pj["ssim_std"] = pm.ssim_std;
      pj["cosine_distance"] = pm.cosine;
    } else {
      pj["ssim_mean"] = nullptr;
      pj["ssim_std"] = nullptr;
      pj["cosine_distance"] = nullptr;
    }
    pj["fid"] = pm.fid_v;
    pj["kid_mean"] = pm.kid_mean;
    pj["kid_std"] = pm.kid_std;
    pairs.push_back(std::move(pj));
    agg_ssim += pm.ssim_mean;
    agg_fid += pm.fid_v;
    agg_kid += pm.kid_mean;
    agg_cos += pm.cosine;
    ++pair_count;

    if (pm.paired) {
      const std::string cname = "ssim_" + test.domains[static_cast<size_t>(key.first)].name +
                                "_to_" + test.domains[static_cast<size_t>(key.second)].name +
                                ".csv";
      write_curve_csv((fs::path(cfg.out_dir) / "curves" / cname).string(),
                      iqa_curve(pm.ssim_values, default_thresholds()));
    }
  }
  report["pairs"] = std::move(pairs);

  nlohmann::ordered_json per_target;
  for (int j = 0; j < n; ++j)
    per_target[test.domains[static_cast<size_t>(j)].name] = {
        {"classification_accuracy", target_acc[static_cast<size_t>(j)]}};
  report["per_target"] = std::move(per_target);

  nlohmann::ordered_json per_source;
  for (int i = 0; i < n; ++i)
    per_source[test.domains[static_cast<size_t>(i)].name] = {
        {"diversity", source_div[static_cast<size_t>(i)]}};
  report["per_source"] = std::move(per_source);

  nlohmann::ordered_json across;
  if (paired) {
    across["ssim_mean"] = agg_ssim / pair_count;
    across["cosine_distance"] = agg_cos / pair_count;
  } else {
    across["ssim_mean"] = nullptr;
    across["cosine_distance"] = nullptr;
  }
  across["fid"] = agg_fid / pair_count;
  across["kid_mean"] = agg_kid / pair_count;
  double acc_mean = 0.0, div_mean = 0.0;
  for (int d = 0; d < n; ++d) {
    acc_mean += target_acc[static_cast<size_t>(d)];
    div_mean += source_div[static_cast<size_t>(d)];
  }
  across["classification_accuracy"] = acc_mean / n;
  across["diversity"] = div_mean / n;
  report["across_all_domains"] = std::move(across);

  if (paired)
    write_curve_csv((fs::path(cfg.out_dir) / "curves" / "ssim_all.csv").string(),
                    iqa_curve(all_ssim, default_thresholds()));

  const std::string report_path = (fs::path(cfg.out_dir) / "report.json").string();
  std::ofstream out(report_path);
  if (!out) throw IoError("cannot create " + report_path);
  out << report.dump(1) << "\n";
  std::cout << "report written to " << report_path << "\n";
}

}  // namespace mdt::cli
