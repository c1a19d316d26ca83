#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "spectralprior/config.hpp"
#include "spectralprior/diagnostics.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/image.hpp"
#include "spectralprior/kernels.hpp"
#include "spectralprior/optimize.hpp"
#include "spectralprior/record_io.hpp"
#include "spectralprior/task.hpp"

namespace fs = std::filesystem;
using namespace spectralprior;

namespace {

enum Exit { ok = 0, config_error = 2, divergence = 3, io_error = 4 };

// Flags shared by every subcommand that builds a task. Each non-empty flag
// overwrites one configuration key.
struct TaskFlags {
  std::string config;
  std::vector<std::string> set;
  std::deque<std::pair<std::string, std::string>> values;
  bool timing = false;
  bool no_antialias = false;
  bool quiet = false;

  std::string& bind(const char* key) {
    values.emplace_back(key, std::string());
    return values.back().second;
  }
};

void add_task_flags(CLI::App& app, TaskFlags& f, bool with_task) {
  app.add_option("--config", f.config, "key=value configuration file; flags override it");
  app.add_option("--set", f.set, "override any configuration key (key=value), repeatable");
  if (with_task) app.add_option("--task", f.bind("task"), "denoise|restore|inpaint|superres");
  app.add_option("-i,--input", f.bind("input"), "input image (PGM, PPM or PNG)");
  app.add_option("--ground-truth", f.bind("ground_truth"), "clean image for metrics");
  app.add_option("-o,--output", f.bind("output_dir"), "output directory");
  app.add_option("--seed", f.bind("seed"), "generator seed");
  app.add_option("--noise-seed", f.bind("noise_seed"), "noise seed (defaults to --seed)");
  app.add_option("--sigma", f.bind("sigma"), "noise level in 8-bit units");
  app.add_option("--p", f.bind("keep_probability"), "restore: fraction of observed pixels");
  app.add_option("--mask", f.bind("mask"), "inpaint: mask image, white = observed");
  app.add_option("--factor", f.bind("factor"), "superres: upscaling factor");
  app.add_flag("--no-antialias", f.no_antialias, "superres: decimate instead of box-average");
  app.add_option("--bands", f.bind("bands"), "radial bands in the logged residuals");
  app.add_option("--loss", f.bind("loss.kind"), "dsp_complex|dsp_magnitude|dsp_log_magnitude|dip_pixel");
  app.add_option("--normalization", f.bind("loss.normalization"), "unitary|unnormalized");
  app.add_option("--eps", f.bind("loss.eps"), "magnitude smoothing");
  app.add_option("--band-weights", f.bind("loss.band_weights"), "comma-separated per-band loss weights");
  app.add_option("--depth", f.bind("generator.depth"), "generator levels");
  app.add_option("--channels", f.bind("generator.channels"), "comma-separated channels per level");
  app.add_option("--skip-channels", f.bind("generator.skip_channels"), "comma-separated skip channels per level");
  app.add_option("--optimizer", f.bind("optimizer.kind"), "adam|sgd");
  app.add_option("--lr", f.bind("optimizer.lr"), "learning rate");
  app.add_option("--iterations", f.bind("optimizer.iterations"), "optimization steps");
  app.add_option("--log-every", f.bind("optimizer.log_every"), "logging interval");
  app.add_flag("--timing", f.timing, "add a wall-clock ms column to the record");
  app.add_flag("-q,--quiet", f.quiet, "no progress output");
}

io::KeyValues collect(const TaskFlags& f, const char* task) {
  io::KeyValues kv;
  if (!f.config.empty()) kv = io::load_key_values(f.config);
  if (task) kv["task"] = task;
  for (const auto& [key, value] : f.values) {
    if (!value.empty()) kv[key] = value;
  }
  if (f.timing) kv["record_timing"] = "true";
  if (f.no_antialias) kv["antialias"] = "false";
  for (const auto& s : f.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

std::size_t thread_cap() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SPECTRALPRIOR_THREADS")) {
    const auto cap = io::parse_uint("SPECTRALPRIOR_THREADS", env);
    if (cap == 0) throw ConfigError("SPECTRALPRIOR_THREADS: must be >= 1");
    n = std::min<std::size_t>(n, cap);
  }
  return n;
}

std::string image_extension(const io::TaskConfig& c) {
  const auto ext = c.input.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".png" ? ext : ".png";
}

optimize::Progress progress(bool quiet, const std::string& tag) {
  if (quiet) return {};
  return [tag](const optimize::LogEntry& e) {
    std::fprintf(stderr, "%s iter %6zu  loss %.6g  psnr %.3f\n", tag.c_str(), e.iteration, e.loss, e.psnr);
  };
}

// Runs one prepared task and writes image, record, manifest and sidecar into dir.
optimize::RunRecord run_into(const io::TaskConfig& cfg, const io::PreparedTask& prepared, const fs::path& dir,
                             bool quiet, const std::string& tag) {
  fs::create_directories(dir);
  io::KeyValues manifest = io::manifest(cfg, prepared);
  manifest["output_dir"] = dir.string();
  io::write_text(dir / "manifest.txt", io::format_key_values(manifest));
  try {
    auto record = optimize::run(prepared.run, prepared.obs, progress(quiet, tag));
    const Tensor out = io::crop(record.reconstruction, prepared.out_height, prepared.out_width);
    io::save_image(io::ImageBuffer::from_tensor(out), dir / ("reconstruction" + image_extension(cfg)));
    if (prepared.padded) {
      io::PaddedImage pad{record.reconstruction, Tensor(), prepared.out_height, prepared.out_width};
      io::write_pad_sidecar(dir / "reconstruction.pad", pad);
    }
    io::write_text(dir / "record.csv", io::record_csv(record, cfg.record_timing));
    return record;
  } catch (const optimize::RunAborted& e) {
    io::write_text(dir / "record.csv", io::record_csv(e.partial(), cfg.record_timing));
    throw;
  }
}

io::PreparedTask prepare_checked(const io::TaskConfig& cfg, const io::KeyValues& kv) {
  auto prepared = io::prepare(cfg);
  io::verify_hashes(kv, prepared);
  return prepared;
}

int cmd_task(const TaskFlags& f, const char* task) {
  const auto kv = collect(f, task);
  const auto cfg = io::task_config_from(kv);
  const auto prepared = prepare_checked(cfg, kv);
  const auto record = run_into(cfg, prepared, cfg.output_dir, f.quiet, io::to_string(cfg.task));
  const auto& last = record.entries.back();
  std::printf("%s: %zu iterations, final loss %.6g, psnr %.3f dB -> %s\n", io::to_string(cfg.task).c_str(),
              last.iteration, last.loss, last.psnr, cfg.output_dir.string().c_str());
  return ok;
}

std::string stem(const io::TaskConfig& cfg, const std::string& loss) {
  return io::to_string(cfg.task) + "_" + loss + "_s" + std::to_string(cfg.seed);
}

int cmd_compare(const TaskFlags& f) {
  const auto kv = collect(f, nullptr);
  auto cfg = io::task_config_from(kv);
  auto dsp_cfg = cfg;
  if (dsp_cfg.loss.kind == objective::LossKind::dip_pixel) dsp_cfg.loss.kind = objective::LossKind::dsp_magnitude;
  auto dip_cfg = cfg;
  dip_cfg.loss.kind = objective::LossKind::dip_pixel;
  dip_cfg.loss.band_weights.clear();

  const auto dip_prep = prepare_checked(dip_cfg, kv);
  if (!dip_prep.clean) throw ConfigError("compare: needs a ground truth to measure PSNR");
  const auto dip = run_into(dip_cfg, dip_prep, cfg.output_dir / "dip", f.quiet, "dip");
  const auto dsp_prep = io::prepare(dsp_cfg);
  const auto dsp = run_into(dsp_cfg, dsp_prep, cfg.output_dir / "dsp", f.quiet, "dsp");

  const auto report = diagnostics::early_stopping_report(dip, dsp);
  const auto name = "early_stopping_" + stem(cfg, objective::to_string(dsp_cfg.loss.kind));
  io::write_text(cfg.output_dir / (name + ".csv"), diagnostics::to_csv(report));
  const auto text = diagnostics::summary(report);
  io::write_text(cfg.output_dir / (name + ".txt"), text);
  std::fputs(text.c_str(), stdout);
  return ok;
}

struct ReportFlags {
  std::string run;
  std::size_t k = 2;
  std::size_t window = 50;
  std::size_t checked = 4;
  double factor = 2.0;
};

int cmd_report(const ReportFlags& f) {
  const fs::path dir = f.run;
  const auto kv = io::load_key_values(dir / "manifest.txt");
  const auto cfg = io::task_config_from(kv);
  const auto record = io::parse_record_csv(io::read_text(dir / "record.csv"));
  const auto name = stem(cfg, objective::to_string(cfg.loss.kind));

  diagnostics::OrderingOptions ordering;
  ordering.smoothing_window = f.window;
  ordering.bands_checked = f.checked;
  const auto traj = diagnostics::spectral_ordering_report(record, ordering);
  io::write_text(dir / ("ordering_" + name + ".csv"), diagnostics::to_csv(traj));
  auto text = diagnostics::summary(traj);
  io::write_text(dir / ("ordering_" + name + ".txt"), text);
  std::fputs(text.c_str(), stdout);

  const auto prepared = prepare_checked(cfg, kv);
  if (!prepared.obs.ground_truth || !prepared.obs.noise) {
    std::puts("noise stability: skipped (needs a ground truth and a known noise realization)");
    return ok;
  }
  diagnostics::StabilityOptions stability;
  stability.smoothing_window = f.window;
  stability.bound_factor = f.factor;
  const auto ns = diagnostics::noise_stability_report(record, prepared.obs, f.k, stability);
  io::write_text(dir / ("stability_" + name + ".csv"), diagnostics::to_csv(ns));
  text = diagnostics::summary(ns);
  io::write_text(dir / ("stability_" + name + ".txt"), text);
  std::fputs(text.c_str(), stdout);
  return ok;
}

struct BiasVarianceFlags {
  std::size_t n = 8;
  std::size_t threads = 0;
};

int cmd_bias_variance(const TaskFlags& f, const BiasVarianceFlags& b) {
  const auto kv = collect(f, nullptr);
  const auto cfg = io::task_config_from(kv);
  const auto prepared = prepare_checked(cfg, kv);
  if (!prepared.clean) throw ConfigError("bias-variance: needs a clean image");
  if (b.n < 2) throw ConfigError("bias-variance: n must be >= 2");

  diagnostics::BiasVarianceTask task{*prepared.clean, prepared.obs.op, cfg.resolved_sigma() / 255.0, {},
                                     cfg.resolved_noise_seed(), prepared.run};
  std::size_t workers = thread_cap();
  if (b.threads > 0) workers = std::min(workers, b.threads);
  const auto report = diagnostics::bias_variance_experiment(task, b.n, workers);

  fs::create_directories(cfg.output_dir);
  const auto name = "bias_variance_" + stem(cfg, objective::to_string(cfg.loss.kind)) + "_n" + std::to_string(b.n);
  io::write_text(cfg.output_dir / "manifest.txt", io::format_key_values(io::manifest(cfg, prepared)));
  io::write_text(cfg.output_dir / (name + ".csv"), diagnostics::to_csv(report));
  const auto text = diagnostics::summary(report);
  io::write_text(cfg.output_dir / (name + ".txt"), text);
  std::fputs(text.c_str(), stdout);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image reconstruction with untrained generators and spectral losses"};
  app.require_subcommand(1);

  const char* tasks[] = {"denoise", "restore", "inpaint", "superres"};
  const char* blurbs[] = {"remove additive Gaussian noise", "fill randomly dropped pixels",
                          "fill the region outside a mask", "upscale a low-resolution image"};
  std::vector<TaskFlags> task_flags(4);
  std::vector<CLI::App*> task_cmds;
  for (int i = 0; i < 4; ++i) {
    auto* cmd = app.add_subcommand(tasks[i], blurbs[i]);
    add_task_flags(*cmd, task_flags[i], false);
    task_cmds.push_back(cmd);
  }

  TaskFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "run the pixel loss and a spectral loss on the same schedule");
  add_task_flags(*compare, compare_flags, true);

  TaskFlags bv_flags;
  BiasVarianceFlags bv;
  auto* bias = app.add_subcommand("bias-variance", "spectral bias/variance over noise realizations");
  add_task_flags(*bias, bv_flags, true);
  bias->add_option("-n,--realizations", bv.n, "number of noise realizations")->capture_default_str();
  bias->add_option("--threads", bv.threads, "concurrent runs (default: core count)");

  ReportFlags rf;
  auto* report = app.add_subcommand("report", "ordering and noise-stability reports for a finished run");
  report->add_option("run", rf.run, "run directory holding manifest.txt and record.csv")->required();
  report->add_option("--k", rf.k, "bands counted as low frequency")->capture_default_str();
  report->add_option("--window", rf.window, "smoothing window in iterations")->capture_default_str();
  report->add_option("--checked", rf.checked, "lowest bands whose ordering is checked")->capture_default_str();
  report->add_option("--bound-factor", rf.factor, "allowed multiple of the noise bound")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    kernels::set_thread_count(static_cast<int>(std::min<std::size_t>(thread_cap(), kernels::max_threads())));
    for (int i = 0; i < 4; ++i) {
      if (*task_cmds[i]) return cmd_task(task_flags[i], tasks[i]);
    }
    if (*compare) return cmd_compare(compare_flags);
    if (*bias) return cmd_bias_variance(bv_flags, bv);
    if (*report) return cmd_report(rf);
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return divergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io_error;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return io_error;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return config_error;
  }
  return ok;
}
