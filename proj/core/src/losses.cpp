#include "mdt/losses.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mdt/errors.hpp"

namespace mdt {
namespace {

double bce_value(double p, double target) {
  const double c = std::clamp(p, kBceEps, 1.0 - kBceEps);
  return -(target * std::log(c) + (1.0 - target) * std::log(1.0 - c));
}

double bce_patch_mean(const Tensor& patch, double target) {
  double s = 0.0;
  for (std::int64_t i = 0; i < patch.size(); ++i) s += bce_value(patch[i], target);
  return s / static_cast<double>(patch.size());
}

double vec_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_rec < 0.0 || lambda_idt < 0.0) throw ConfigError("loss weights must be >= 0");
}

double LossRecord::compute_total(const LossWeights& w) const {
  return vec_sum(adv_g) + w.lambda_rec * vec_sum(rec) + w.lambda_idt * vec_sum(idt);
}

bool LossRecord::finite() const {
  auto ok = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  return ok(adv_d) && ok(adv_g) && ok(rec) && ok(idt) && std::isfinite(total_g);
}

std::string LossRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["iter"] = iter;
  j["epoch"] = epoch;
  auto emit = [&j](const char* key, const std::vector<double>& v) {
    for (size_t i = 0; i < v.size(); ++i) j[std::string(key) + "." + std::to_string(i)] = v[i];
  };
  emit("adv_d", adv_d);
  emit("adv_g", adv_g);
  emit("rec", rec);
  emit("idt", idt);
  j["total_g"] = total_g;
  return j.dump();
}

LossRecord LossRecord::from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  LossRecord r;
  r.iter = j.at("iter").get<long long>();
  r.epoch = j.at("epoch").get<int>();
  auto read = [&j](const char* key, std::vector<double>& v) {
    for (int i = 0;; ++i) {
      const auto it = j.find(std::string(key) + "." + std::to_string(i));
      if (it == j.end()) break;
      v.push_back(it->get<double>());
    }
  };
  read("adv_d", r.adv_d);
  read("adv_g", r.adv_g);
  read("rec", r.rec);
  read("idt", r.idt);
  r.total_g = j.at("total_g").get<double>();
  return r;
}

double bce_dual(const DiscriminatorOutput& out, double target) {
  return 0.5 * bce_patch_mean(out.patch_map, target) + 0.5 * bce_value(out.global_score, target);
}

double adv_loss_d(const DiscriminatorOutput& real, const std::vector<DiscriminatorOutput>& fakes) {
  if (fakes.empty()) throw ConfigError("adv_loss_d: no fake outputs");
  double fake_sum = 0.0;
  for (const auto& f : fakes) fake_sum += bce_dual(f, 0.0);
  return bce_dual(real, 1.0) + fake_sum / static_cast<double>(fakes.size());
}

double adv_loss_g(const std::vector<DiscriminatorOutput>& fakes) {
  if (fakes.empty()) throw ConfigError("adv_loss_g: no fake outputs");
  double s = 0.0;
  for (const auto& f : fakes) s += bce_dual(f, 1.0);
  return s / static_cast<double>(fakes.size());
}

double reconstruction_loss(const Tensor& x, const std::vector<Tensor>& recovered) {
  double s = 0.0;
  for (const Tensor& r : recovered) {
    if (!r.same_shape(x))
      throw DataError("reconstruction_loss: shape mismatch " + shape_str(r.shape()) + " vs " +
                      shape_str(x.shape()));
    double term = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) term += std::abs(r[i] - x[i]);
    s += term / static_cast<double>(x.size());
  }
  return s;
}

double identity_loss(const Tensor& x, const Tensor& self_translated) {
  if (!self_translated.same_shape(x))
    throw DataError("identity_loss: shape mismatch " + shape_str(self_translated.shape()) +
                    " vs " + shape_str(x.shape()));
  double s = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) s += std::abs(self_translated[i] - x[i]);
  return s / static_cast<double>(x.size());
}

double total_generator_loss(double adv_g_sum, double rec_sum, double idt_sum,
                            const LossWeights& w) {
  return adv_g_sum + w.lambda_rec * rec_sum + w.lambda_idt * idt_sum;
}

Graph::Id bce_dual_ids(Graph& g, const DiscOutIds& out, double target) {
  const Graph::Id patch = g.bce_mean(out.patch, target, kBceEps);
  const Graph::Id global = g.bce_mean(out.global, target, kBceEps);
  return g.weighted_sum({{patch, 0.5}, {global, 0.5}});
}

Graph::Id adv_loss_d_ids(Graph& g, const DiscOutIds& real, const std::vector<DiscOutIds>& fakes) {
  if (fakes.empty()) throw ConfigError("adv_loss_d: no fake outputs");
  std::vector<std::pair<Graph::Id, double>> terms;
  terms.emplace_back(bce_dual_ids(g, real, 1.0), 1.0);
  const double wf = 1.0 / static_cast<double>(fakes.size());
  for (const auto& f : fakes) terms.emplace_back(bce_dual_ids(g, f, 0.0), wf);
  return g.weighted_sum(terms);
}

Graph::Id adv_loss_g_ids(Graph& g, const std::vector<DiscOutIds>& fakes) {
  if (fakes.empty()) throw ConfigError("adv_loss_g: no fake outputs");
  std::vector<std::pair<Graph::Id, double>> terms;
  const double wf = 1.0 / static_cast<double>(fakes.size());
  for (const auto& f : fakes) terms.emplace_back(bce_dual_ids(g, f, 1.0), wf);
  return g.weighted_sum(terms);
}

}  // namespace mdt
