#ifndef WGCS_BENCH_HPP
#define WGCS_BENCH_HPP

// Replicated MSE(mean) / MSE(sd) benchmark of the sampler against the CKDE
// baseline on the synthetic models M1-M3.

#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "baseline.hpp"
#include "json_util.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "sampler.hpp"
#include "synth.hpp"
#include "wgan.hpp"

namespace wgcs::bench {

using Matrix = Eigen::MatrixXd;

struct ModelSettings {
  Eigen::Index d = 5;
  json generator;               // network shape
  json critic;                  // network shape
  json train = json::object();  // merge patch over BenchConfig::train
};

/// One hidden layer for M1/M2 and two for M3, a two-layer critic, clip(log n) output.
inline ModelSettings default_model_settings(synth::ModelKind kind) {
  const json clip = {{"kind", "clip"}, {"bound", "log_n"}};
  ModelSettings s;
  s.d = 5;
  s.generator = kind == synth::ModelKind::m3 ? network_shape({64, 64}, clip) : network_shape({64}, clip);
  s.critic = network_shape({64, 32});
  if (kind == synth::ModelKind::m1 || kind == synth::ModelKind::m2) {
    s.generator = network_shape({128}, clip);
    s.critic = network_shape({128, 64});
    const auto decay = [](std::int64_t steps) {
      return json{{"lr", 1e-3}, {"decay", {{"start", 1e-3}, {"end", 1e-5}, {"steps", steps}}}};
    };
    s.train = {{"noise_dim", 5},
               {"batch_size", 512},
               {"total_generator_steps", 8000},
               {"generator_optimizer", decay(8000)},
               {"critic_optimizer", decay(40000)}};
  }
  return s;
}

inline wgan::TrainConfig default_bench_train_config() {
  wgan::TrainConfig c;
  c.total_generator_steps = 4000;
  c.noise_dim = 1;
  c.generator_optimizer.lr = 5e-4;
  c.critic_optimizer.lr = 5e-4;
  return c;
}

struct BenchConfig {
  std::vector<std::string> models{"m1", "m2", "m3"};
  std::vector<std::string> methods{"wgcs", "ckde"};
  int replications = 3;
  Eigen::Index n = 5000;
  Eigen::Index test_size = 200;
  Eigen::Index draws = 2000;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool paper_scale = false;
  wgan::TrainConfig train = default_bench_train_config();
  std::map<std::string, ModelSettings> settings;

  ModelSettings settings_for(const std::string& model) const {
    auto it = settings.find(model);
    return it != settings.end() ? it->second : default_model_settings(synth::model_from_string(model));
  }

  /// n = 5000, K = 2000, R = 10, J = 10000, d = 100.
  void apply_paper_scale() {
    paper_scale = true;
    n = 5000;
    test_size = 2000;
    replications = 10;
    draws = 10000;
    for (const auto& m : models) {
      auto s = settings_for(m);
      s.d = 100;
      settings[m] = s;
    }
  }

  void validate() const {
    if (models.empty()) throw ConfigError("bench needs at least one model");
    if (methods.empty()) throw ConfigError("bench needs at least one method");
    for (const auto& m : models)
      if (synth::model_from_string(m) == synth::ModelKind::two_moon) throw ConfigError("bench models are m1, m2, m3");
    for (const auto& m : methods)
      if (m != "wgcs" && m != "ckde") throw ConfigError("unknown bench method '" + m + "'");
    if (replications < 1 || n < 2 || test_size < 1 || draws < 2 || jobs < 1)
      throw ConfigError("bench sizes out of range");
    train.validate();
    for (const auto& m : models) {
      json t = wgan::train_config_to_json(train);
      t.merge_patch(settings_for(m).train);
      wgan::train_config_from_json(t).validate();
    }
  }
};

inline BenchConfig bench_config_from_json(const json& j) {
  require_known_keys(j, {"models", "methods", "replications", "n", "test_size", "draws", "seed", "jobs", "train", "settings"},
                     "bench config");
  BenchConfig c;
  c.models = get_or(j, "models", c.models);
  c.methods = get_or(j, "methods", c.methods);
  c.replications = get_or(j, "replications", c.replications);
  c.n = get_or(j, "n", c.n);
  c.test_size = get_or(j, "test_size", c.test_size);
  c.draws = get_or(j, "draws", c.draws);
  c.seed = get_or(j, "seed", c.seed);
  c.jobs = get_or(j, "jobs", c.jobs);
  if (j.contains("train")) {
    json t = train_config_to_json(default_bench_train_config());
    t.merge_patch(j.at("train"));
    c.train = wgan::train_config_from_json(t);
  }
  if (j.contains("settings")) {
    for (const auto& [model, sj] : j.at("settings").items()) {
      require_known_keys(sj, {"d", "generator", "critic", "train"}, "bench settings." + model);
      auto s = default_model_settings(synth::model_from_string(model));
      s.d = get_or(sj, "d", s.d);
      if (sj.contains("generator")) s.generator = sj.at("generator");
      if (sj.contains("critic")) s.critic = sj.at("critic");
      if (sj.contains("train")) s.train = sj.at("train");
      c.settings[model] = s;
    }
  }
  c.validate();
  return c;
}

inline json bench_config_to_json(const BenchConfig& c) {
  json settings = json::object();
  for (const auto& m : c.models) {
    const auto s = c.settings_for(m);
    settings[m] = {{"d", s.d}, {"generator", s.generator}, {"critic", s.critic}, {"train", s.train}};
  }
  return {{"models", c.models},     {"methods", c.methods}, {"replications", c.replications},
          {"n", c.n},               {"test_size", c.test_size}, {"draws", c.draws},
          {"seed", c.seed},         {"jobs", c.jobs},       {"train", wgan::train_config_to_json(c.train)},
          {"settings", settings}};
}

struct ReplicateResult {
  std::uint64_t seed = 0;
  std::map<std::string, std::pair<double, double>> mse;  // method -> (mse_mean, mse_sd)
};

struct Cell {
  std::string model;
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<double> mse_mean;
  std::vector<double> mse_sd;
};

struct Summary {
  double mean = 0.0;
  double se = 0.0;  // sample SD / sqrt(R); 0 for R = 1
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

struct BenchReport {
  BenchConfig config;
  std::vector<Cell> cells;

  json to_json() const {
    json cj = json::array();
    json records = json::array();
    for (const auto& c : cells) {
      const auto sm = summarize(c.mse_mean);
      const auto ss = summarize(c.mse_sd);
      cj.push_back({{"model", c.model},
                    {"method", c.method},
                    {"seeds", c.seeds},
                    {"mse_mean", c.mse_mean},
                    {"mse_sd", c.mse_sd},
                    {"summary", {{"mse_mean", {{"mean", sm.mean}, {"se", sm.se}}}, {"mse_sd", {{"mean", ss.mean}, {"se", ss.se}}}}}});
      for (std::size_t r = 0; r < c.seeds.size(); ++r) {
        const auto n = static_cast<std::int64_t>(config.test_size);
        records.push_back(metrics::to_json({c.model + "/" + c.method + "/mse_mean", c.mse_mean[r], n, c.seeds[r]}));
        records.push_back(metrics::to_json({c.model + "/" + c.method + "/mse_sd", c.mse_sd[r], n, c.seeds[r]}));
      }
    }
    const json cfg = bench_config_to_json(config);
    return {{"config", cfg}, {"config_digest", digest(cfg)}, {"paper_scale", config.paper_scale},
            {"cells", cj},   {"records", records}};
  }

  /// One row per (model, method); mean and SE across replications.
  std::string to_csv() const {
    std::string out = "model,method,mse_mean,mse_mean_se,mse_sd,mse_sd_se,replications\n";
    for (const auto& c : cells) {
      const auto sm = summarize(c.mse_mean);
      const auto ss = summarize(c.mse_sd);
      out += c.model + "," + c.method + "," + format_double(sm.mean) + "," + format_double(sm.se) + "," +
             format_double(ss.mean) + "," + format_double(ss.se) + "," + std::to_string(c.seeds.size()) + "\n";
    }
    return out;
  }

  /// Rows "model  Mean|SD  value(se)" per method column.
  std::string to_table() const {
    std::string out = "model stat";
    for (const auto& m : config.methods) out += " " + m;
    out += "\n";
    char buf[64];
    for (const auto& model : config.models) {
      for (int stat = 0; stat < 2; ++stat) {
        out += model + (stat == 0 ? " Mean" : " SD");
        for (const auto& method : config.methods) {
          for (const auto& c : cells) {
            if (c.model != model || c.method != method) continue;
            const auto s = summarize(stat == 0 ? c.mse_mean : c.mse_sd);
            std::snprintf(buf, sizeof buf, " %.2f(%.2f)", s.mean, s.se);
            out += buf;
          }
        }
        out += "\n";
      }
    }
    return out;
  }
};

/// The per-model patch applied over the shared training configuration.
inline wgan::TrainConfig train_config_for(const BenchConfig& cfg, const std::string& model) {
  json t = wgan::train_config_to_json(cfg.train);
  t.merge_patch(cfg.settings_for(model).train);
  return wgan::train_config_from_json(t);
}

/// Trains this sampler on `train` with the bench settings for `model`.
inline FittedSampler fit_bench_sampler(const BenchConfig& cfg, const std::string& model, const PairedDataset& train,
                                       std::uint64_t seed) {
  const auto settings = cfg.settings_for(model);
  wgan::TrainConfig tc = train_config_for(cfg, model);
  tc.seed = seed;
  const auto n = static_cast<std::size_t>(train.size());
  const auto d = static_cast<std::size_t>(train.x_dim());
  const auto gspec = resolve_network(settings.generator, static_cast<std::size_t>(tc.noise_dim) + d, 1, n);
  const auto cspec = resolve_network(settings.critic, d + 1, 1, n);
  return fit_sampler(train, gspec, cspec, tc);
}

/// One replicate of one model: fresh training data and test points, then
/// each requested method is fitted and scored against the closed-form moments.
inline ReplicateResult run_replicate(const BenchConfig& cfg, const std::string& model, int replicate) {
  const auto kind = synth::model_from_string(model);
  const auto settings = cfg.settings_for(model);
  const std::uint64_t seed = derive_seed(cfg.seed, "bench." + model, static_cast<std::uint64_t>(replicate));
  synth::SynthModel sm{kind, 0.0, settings.d};
  const PairedDataset train = synth::generate(sm, cfg.n, derive_seed(seed, "train"));
  Rng test_rng = make_rng(seed, "test");
  const Matrix test_x = synth::sample_predictors(cfg.test_size, settings.d, test_rng);

  Matrix true_mean(cfg.test_size, 1);
  Matrix true_sd(cfg.test_size, 1);
  for (Eigen::Index k = 0; k < cfg.test_size; ++k) {
    const auto t = synth::true_conditional_stats(kind, test_x.row(k));
    true_mean(k, 0) = t.mean;
    true_sd(k, 0) = t.sd;
  }

  ReplicateResult res;
  res.seed = seed;
  for (const auto& method : cfg.methods) {
    Matrix est_mean(cfg.test_size, 1);
    Matrix est_sd(cfg.test_size, 1);
    if (method == "wgcs") {
      const auto fit = fit_bench_sampler(cfg, model, train, derive_seed(seed, "wgcs"));
      for (Eigen::Index k = 0; k < cfg.test_size; ++k) {
        const Matrix draws = fit.sampler.sample(test_x.row(k), cfg.draws, static_cast<std::uint64_t>(k));
        est_mean(k, 0) = sampler::sample_mean(draws)(0);
        est_sd(k, 0) = sampler::sample_sd(draws)(0);
      }
    } else {
      const auto ck = baseline::CkdeModel::fit(train);
      for (Eigen::Index k = 0; k < cfg.test_size; ++k) {
        est_mean(k, 0) = baseline::ckde_mean(ck, test_x.row(k));
        est_sd(k, 0) = baseline::ckde_sd(ck, test_x.row(k));
      }
    }
    res.mse[method] = {metrics::mse_mean(est_mean, true_mean), metrics::mse_sd(est_sd, true_sd)};
  }
  return res;
}

/// Replicates are independent; with jobs > 1 they run concurrently. Output
/// order and values do not depend on the job count.
inline BenchReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  struct Task {
    std::string model;
    int replicate;
  };
  std::vector<Task> tasks;
  for (const auto& m : cfg.models)
    for (int r = 0; r < cfg.replications; ++r) tasks.push_back({m, r});

  std::vector<ReplicateResult> results(tasks.size());
  for (std::size_t start = 0; start < tasks.size(); start += static_cast<std::size_t>(cfg.jobs)) {
    const std::size_t end = std::min(tasks.size(), start + static_cast<std::size_t>(cfg.jobs));
    if (cfg.jobs == 1) {
      results[start] = run_replicate(cfg, tasks[start].model, tasks[start].replicate);
      continue;
    }
    std::vector<std::future<ReplicateResult>> futures;
    for (std::size_t i = start; i < end; ++i)
      futures.push_back(std::async(std::launch::async, run_replicate, std::cref(cfg), tasks[i].model, tasks[i].replicate));
    for (std::size_t i = start; i < end; ++i) results[i] = futures[i - start].get();
  }

  BenchReport rep{cfg, {}};
  for (const auto& m : cfg.models) {
    for (const auto& method : cfg.methods) {
      Cell c{m, method, {}, {}, {}};
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].model != m) continue;
        c.seeds.push_back(results[i].seed);
        c.mse_mean.push_back(results[i].mse.at(method).first);
        c.mse_sd.push_back(results[i].mse.at(method).second);
      }
      rep.cells.push_back(std::move(c));
    }
  }
  return rep;
}

}  // namespace wgcs::bench

#endif  // WGCS_BENCH_HPP
