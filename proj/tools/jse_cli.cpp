#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "jse/config.hpp"
#include "jse/metrics.hpp"
#include "jse/pipelines.hpp"
#include "jse/scene.hpp"
#include "jse/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> topology;
  std::optional<std::string> provider;
  std::optional<int> iters;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<double> aec_step;
  std::optional<int> aec_passes;
};

jse::RunConfig resolve(const Overrides& o) {
  jse::RunConfig cfg = o.config.empty() ? jse::RunConfig{} : jse::RunConfig::load(o.config);
  if (o.seed) cfg.set("run.seed", std::to_string(*o.seed));
  if (o.topology) cfg.set("pipeline.topology", *o.topology);
  if (o.provider) cfg.set("pipeline.psd_provider", *o.provider);
  if (o.iters) cfg.set("pipeline.iterations", std::to_string(*o.iters));
  if (o.workers) cfg.set("run.workers", std::to_string(*o.workers));
  if (o.out) cfg.set("run.out", *o.out);
  if (o.aec_step) cfg.pipeline.aec.step_base = *o.aec_step;
  if (o.aec_passes) cfg.pipeline.aec.passes = *o.aec_passes;
  cfg.validate();
  return cfg;
}

std::size_t worker_count(const jse::RunConfig& cfg, std::size_t jobs) {
  std::size_t w = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(w, jobs));
}

/// Runs job(i) for i in [0, n) on a small pool. The first exception is
/// rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto loop = [&] {
    for (std::size_t i; (i = next++) < n;) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw jse::IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw jse::IoError("write failed: " + path.string());
}

json config_json(const jse::RunConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.entries()) j[k] = v;
  return j;
}

std::string scene_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04zu", i);
  return buf;
}

int cmd_synth(const jse::RunConfig& cfg) {
  const fs::path out = cfg.out;
  fs::create_directories(out);
  parallel_for(cfg.count, worker_count(cfg, cfg.count), [&](std::size_t i) {
    const jse::Scene scene = jse::synth_scene(cfg.scene_config(i));
    jse::write_scene(scene, out / scene_name(i));
  });
  std::printf("wrote %zu scene(s) to %s\n", cfg.count, out.string().c_str());
  return 0;
}

struct LoadedInput {
  jse::Signal d, x;
  double sample_rate = 16000.0;
  std::optional<jse::Scene> scene;
};

LoadedInput load_input(const fs::path& dir, bool need_truth) {
  if (!fs::is_directory(dir)) throw jse::IoError("scene directory not found: " + dir.string());
  LoadedInput in;
  if (need_truth) {
    in.scene = jse::read_scene(dir);
    in.d = in.scene->d;
    in.x = in.scene->x;
    in.sample_rate = in.scene->config.sample_rate;
    return in;
  }
  for (const char* name : {"d.wav", "x.wav"}) {
    if (!fs::exists(dir / name)) throw jse::IoError(std::string("missing ") + name + " in " + dir.string());
  }
  jse::WavData d = jse::read_wav(dir / "d.wav");
  in.d = std::move(d.signal);
  in.sample_rate = d.sample_rate;
  in.x = jse::read_wav(dir / "x.wav", in.sample_rate);
  return in;
}

json report_json(const jse::RunConfig& cfg, const fs::path& scene_dir, const jse::PipelineOutput& out) {
  json r;
  r["scene"] = scene_dir.string();
  r["config"] = config_json(cfg);
  r["topology"] = jse::to_string(cfg.pipeline.topology);
  r["provider"] = out.provider;
  r["iterations"] = cfg.pipeline.iterations;
  r["loglik"] = out.loglik;
  json sub = json::array();
  for (const auto& s : out.substeps) sub.push_back({{"iteration", s.iteration}, {"step", s.step}, {"value", s.value}});
  r["substeps"] = sub;
  r["timings"] = out.timings;
  return r;
}

int cmd_run(const jse::RunConfig& cfg, const std::vector<std::string>& scenes) {
  const fs::path out_root = cfg.out;
  fs::create_directories(out_root);
  const bool oracle = cfg.pipeline.provider.kind == jse::ProviderKind::oracle;
  parallel_for(scenes.size(), worker_count(cfg, scenes.size()), [&](std::size_t i) {
    const fs::path dir = scenes[i];
    const LoadedInput in = load_input(dir, oracle);
    const jse::PipelineOutput out =
        jse::run_pipeline(in.d, in.x, cfg.pipeline, in.scene ? &*in.scene : nullptr, in.sample_rate);
    const fs::path dst = scenes.size() == 1 ? out_root : out_root / dir.filename();
    fs::create_directories(dst);
    jse::write_wav(dst / "s_hat_e.wav", out.s_hat_wave, in.sample_rate);
    jse::write_archive(dst / "filters.nnjt", {{"H", jse::echo_filter_tensor(out.h)},
                                              {"G", jse::dereverb_filter_tensor(out.g)},
                                              {"loglik", jse::Tensor{{static_cast<std::uint32_t>(out.loglik.size())},
                                                                     {out.loglik.begin(), out.loglik.end()}}}});
    write_json(dst / "report.json", report_json(cfg, dir, out));
    std::printf("%s: %s done in %.1f s\n", dir.string().c_str(), jse::to_string(cfg.pipeline.topology).c_str(),
                out.timings.at("total"));
  });
  return 0;
}

int cmd_eval(const jse::RunConfig& cfg, const std::vector<std::string>& pairs) {
  if (pairs.empty() || pairs.size() % 2 != 0) throw jse::InvalidInput("eval expects SCENE_DIR ESTIMATE_WAV pairs");
  const std::size_t n = pairs.size() / 2;
  std::vector<std::vector<jse::MetricRow>> rows(n);
  parallel_for(n, worker_count(cfg, n), [&](std::size_t i) {
    const fs::path dir = pairs[2 * i];
    const jse::Scene scene = jse::read_scene(dir);
    const jse::Signal est = jse::read_wav(pairs[2 * i + 1], scene.config.sample_rate);
    if (est.channels() != scene.d.channels() || est.samples() != scene.d.samples()) {
      throw jse::InvalidInput("estimate " + pairs[2 * i + 1] + " is not aligned with " + dir.string());
    }
    std::string id = dir.filename().string();
    if (id.empty()) id = dir.parent_path().filename().string();
    rows[i] = jse::metric_rows(id, jse::evaluate(est, scene));
  });
  std::vector<jse::MetricRow> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  const fs::path out = cfg.out;
  fs::create_directories(out);
  jse::write_metrics_csv(out / "metrics.csv", all);
  jse::write_metrics_summary(out / "summary.json", all);
  const auto summary = jse::summarize(all);
  for (std::size_t k = 0; k < 6; ++k) {
    std::printf("%-7s mean %8.3f dB  ci95 %7.3f  (n=%zu)\n", jse::MetricValues::kNames[k], summary[k].mean,
                summary[k].ci95, summary[k].count);
  }
  return 0;
}

int cmd_export_features(const jse::RunConfig& cfg, const std::vector<std::string>& scenes) {
  const fs::path out_root = cfg.out;
  parallel_for(scenes.size(), worker_count(cfg, scenes.size()), [&](std::size_t i) {
    const fs::path dir = scenes[i];
    const jse::Scene scene = jse::read_scene(dir);
    const jse::TrainingFeatures tf = jse::training_features(scene, cfg.pipeline);
    const jse::SceneSpectra truth = jse::SceneSpectra::analyze(scene, cfg.pipeline.window);
    jse::TargetConfig tc;
    tc.echo_taps = cfg.pipeline.echo_taps;
    tc.dereverb_taps = cfg.pipeline.dereverb_taps;
    tc.delay = cfg.pipeline.delay;
    tc.iterations = cfg.pipeline.iterations;
    tc.eps = cfg.pipeline.eps;
    const jse::TargetResult target = jse::ground_truth_target_pipeline(truth, tc);
    const fs::path dst = scenes.size() == 1 ? out_root : out_root / dir.filename();
    fs::create_directories(dst);
    jse::write_archive(dst / "features.nnjt", {{"nn0", tf.nn0.to_tensor()}, {"nn1", tf.nn1.to_tensor()}});
    jse::write_archive(dst / "targets.nnjt",
                       {{"targets", jse::target_tensor(target.v, truth.d.frames(), truth.d.bins()).to_tensor()}});
  });
  std::printf("exported features for %zu scene(s) to %s\n", scenes.size(), out_root.string().c_str());
  return 0;
}

/// Synthesizes `count` scenes and runs every topology plus the unprocessed
/// mixture through the metrics.
int cmd_bench(const jse::RunConfig& cfg) {
  const std::vector<jse::Topology> topologies = {jse::Topology::joint, jse::Topology::parallel,
                                                 jse::Topology::nn_cascade, jse::Topology::cascade};
  const std::size_t T = topologies.size();
  std::vector<std::vector<double>> sisdr(cfg.count, std::vector<double>(T + 1));
  std::vector<std::vector<double>> seconds(cfg.count, std::vector<double>(T));
  parallel_for(cfg.count, worker_count(cfg, cfg.count), [&](std::size_t i) {
    const jse::Scene scene = jse::synth_scene(cfg.scene_config(i));
    for (std::size_t t = 0; t < T; ++t) {
      jse::PipelineConfig pc = cfg.pipeline;
      pc.topology = topologies[t];
      const jse::PipelineOutput out = jse::run_pipeline(scene.d, scene.x, pc, &scene, scene.config.sample_rate);
      sisdr[i][t] = jse::evaluate(out.s_hat_wave, scene).average.si_sdr;
      seconds[i][t] = out.timings.at("total");
    }
    sisdr[i][T] = jse::evaluate(scene.d, scene).average.si_sdr;
    std::printf("%s joint %.2f parallel %.2f nn-cascade %.2f cascade %.2f mixture %.2f\n", scene_name(i).c_str(),
                sisdr[i][0], sisdr[i][1], sisdr[i][2], sisdr[i][3], sisdr[i][T]);
    std::fflush(stdout);
  });
  json report;
  report["config"] = config_json(cfg);
  report["scenes"] = cfg.count;
  for (std::size_t t = 0; t <= T; ++t) {
    double s = 0.0, sec = 0.0;
    for (std::size_t i = 0; i < cfg.count; ++i) {
      s += sisdr[i][t];
      if (t < T) sec += seconds[i][t];
    }
    const std::string name = t < T ? jse::to_string(topologies[t]) : "mixture";
    report["mean_si_sdr"][name] = s / static_cast<double>(cfg.count);
    if (t < T) report["seconds"][name] = sec;
    std::printf("mean SI-SDR %-10s %7.3f dB\n", name.c_str(), s / static_cast<double>(cfg.count));
  }
  fs::create_directories(cfg.out);
  write_json(fs::path(cfg.out) / "bench.json", report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint echo, reverberation and noise reduction toolkit"};
  Overrides o;
  app.add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "base random seed");
  app.add_option("--topology", o.topology, "joint, parallel, cascade or nn-cascade");
  app.add_option("--psd-provider", o.provider, "oracle, unconstrained or lstm:PATH");
  app.add_option("--iters", o.iters, "BCA iterations I");
  app.add_option("--workers", o.workers, "parallel utterances (0 = all cores)");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--aec-step", o.aec_step, "adaptive AEC base step size");
  app.add_option("--aec-passes", o.aec_passes, "adaptive AEC passes over the utterance");

  std::size_t count = 0;
  auto* synth = app.add_subcommand("synth", "synthesize scenes");
  synth->add_option("--count", count, "number of scenes");
  std::vector<std::string> run_scenes;
  auto* run = app.add_subcommand("run", "enhance scene directories");
  run->add_option("scenes", run_scenes, "scene directories")->required();
  std::vector<std::string> eval_pairs;
  auto* eval = app.add_subcommand("eval", "score estimates against scene ground truth");
  eval->add_option("pairs", eval_pairs, "SCENE_DIR ESTIMATE_WAV pairs")->required();
  std::vector<std::string> export_scenes;
  auto* exp = app.add_subcommand("export-features", "write network features and targets");
  exp->add_option("scenes", export_scenes, "scene directories")->required();
  auto* bench = app.add_subcommand("bench", "compare all topologies on synthesized scenes");
  bench->add_option("--count", count, "number of scenes");
  for (auto* sub : {synth, run, eval, exp, bench}) sub->fallthrough();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    jse::RunConfig cfg = resolve(o);
    if (count > 0) cfg.count = count;
    if (*synth) return cmd_synth(cfg);
    if (*run) return cmd_run(cfg, run_scenes);
    if (*eval) return cmd_eval(cfg, eval_pairs);
    if (*exp) return cmd_export_features(cfg, export_scenes);
    if (*bench) return cmd_bench(cfg);
  } catch (const jse::NumericalFailure& e) {
    std::fprintf(stderr, "error [%s]: %s\n", e.stage().c_str(), e.what());
    return 3;
  } catch (const jse::SingularSystem& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const jse::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
