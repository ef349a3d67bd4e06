// Command line pipeline: phantom -> acquire -> baseline -> pretrain ->
// reconstruct -> evaluate/export. Every stage writes a manifest carrying the
// config hash so downstream stages can refuse mismatched inputs.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include "deblur/baselines.hpp"
#include "deblur/io.hpp"
#include "deblur/metrics.hpp"
#include "deblur/phantom.hpp"
#include "deblur/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

using namespace deblur;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  json j;
  j["phantom"] = {{"H", 64},
                  {"W", 64},
                  {"duration_s", 14.0},
                  {"frame_dt_s", 0.0468},
                  {"cardiac_period_s", 1.0},
                  {"respiratory_period_s", 3.5},
                  {"cardiac_amp", 0.15},
                  {"resp_shift_px", 3.0}};
  j["acquisition"] = {{"mode", "radial"},
                      {"coils", 5},
                      {"spokes_per_frame", 10},
                      {"n_readout", 64},
                      {"rows_per_frame", 10},
                      {"noise_sigma", 0.02}};
  j["baseline"] = {{"storm_lambda", 0.05},
                   {"storm_knn", 5},
                   {"storm_sigma", 0.0},
                   {"cg_iters", 60},
                   {"lowrank_lambda", 1e-3},
                   {"lowrank_sweeps", 60}};
  j["recon"] = {{"r", 30},
                {"d", 2},
                {"lambda1", 1e-3},
                {"lambda2", 1e-4},
                {"lambda3", 1e2},
                {"lr_theta", 2e-4},
                {"lr_phi", 2e-4},
                {"lr_z", 2e-4},
                {"epochs", 150},
                {"pretrain_epochs_spatial", 400},
                {"pretrain_epochs_temporal", 1500},
                {"pretrain_lr", 2e-3},
                {"optimizer", "gd"},
                {"pretrain_optimizer", "adam"},
                {"exclude_bias_from_l1", false},
                {"normalize_data", true},
                {"hidden_temporal", 16},
                {"kernel", 3},
                {"z_snapshot_every", 0},
                {"minibatch_frames", 0}};
  j["seed"] = 1;
  return j;
}

json load_config(const std::string& path, uint64_t seed_override,
                 double duration_override) {
  json j = default_config();
  if (!path.empty()) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file: " + path);
    json user;
    try {
      user = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    j.merge_patch(user);
  }
  if (seed_override != 0) j["seed"] = seed_override;
  if (duration_override > 0.0) {
    if (duration_override != 14.0 && duration_override != 28.0 &&
        duration_override != 42.0)
      throw ConfigError("duration preset must be 14, 28 or 42 seconds");
    j["phantom"]["duration_s"] = duration_override;
  }
  return j;
}

PhantomConfig phantom_config(const json& j) {
  const json& p = j.at("phantom");
  PhantomConfig cfg;
  cfg.H = p.at("H").get<int>();
  cfg.W = p.at("W").get<int>();
  cfg.duration_s = p.at("duration_s").get<double>();
  cfg.frame_dt_s = p.at("frame_dt_s").get<double>();
  cfg.cardiac_period_s = p.at("cardiac_period_s").get<double>();
  cfg.respiratory_period_s = p.at("respiratory_period_s").get<double>();
  cfg.cardiac_amp = p.at("cardiac_amp").get<double>();
  cfg.resp_shift_px = p.at("resp_shift_px").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  if (cfg.H <= 0 || cfg.W <= 0 || cfg.frame_dt_s <= 0.0 ||
      cfg.duration_s <= 0.0)
    throw ConfigError("phantom geometry fields must be positive");
  return cfg;
}

ReconConfig recon_config(const json& j) {
  const json& r = j.at("recon");
  ReconConfig cfg;
  cfg.r = r.at("r").get<int>();
  cfg.d = r.at("d").get<int>();
  cfg.lambda1 = r.at("lambda1").get<double>();
  cfg.lambda2 = r.at("lambda2").get<double>();
  cfg.lambda3 = r.at("lambda3").get<double>();
  cfg.lr_theta = r.at("lr_theta").get<double>();
  cfg.lr_phi = r.at("lr_phi").get<double>();
  cfg.lr_z = r.at("lr_z").get<double>();
  cfg.epochs = r.at("epochs").get<int>();
  cfg.pretrain_epochs_spatial = r.at("pretrain_epochs_spatial").get<int>();
  cfg.pretrain_epochs_temporal = r.at("pretrain_epochs_temporal").get<int>();
  cfg.pretrain_lr = r.at("pretrain_lr").get<double>();
  cfg.operator_mode = j.at("acquisition").at("mode").get<std::string>();
  cfg.optimizer = r.at("optimizer").get<std::string>();
  cfg.pretrain_optimizer = r.at("pretrain_optimizer").get<std::string>();
  cfg.exclude_bias_from_l1 = r.at("exclude_bias_from_l1").get<bool>();
  cfg.normalize_data = r.at("normalize_data").get<bool>();
  cfg.hidden_temporal = r.at("hidden_temporal").get<int>();
  cfg.kernel = r.at("kernel").get<int>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.z_snapshot_every = r.at("z_snapshot_every").get<int>();
  cfg.minibatch_frames = r.at("minibatch_frames").get<int>();
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

uint64_t hash_of(const json& cfg) { return io::config_hash(cfg.dump()); }

void check_upstream(const fs::path& dir, uint64_t expected) {
  uint64_t got;
  try {
    got = io::read_manifest_hash(dir);
  } catch (const std::exception&) {
    throw ConfigError("no manifest found under " + dir.string());
  }
  if (got != expected)
    throw ConfigError("config hash mismatch against " + dir.string() +
                      " (stages were run with different configs)");
}

void finish_stage(const fs::path& out, const std::string& stage,
                  const json& cfg, const std::vector<std::string>& outputs,
                  std::chrono::steady_clock::time_point t0) {
  io::write_manifest(out, stage, cfg.dump(), cfg.at("seed").get<uint64_t>(),
                     outputs);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::ofstream log(out / "run.log", std::ios::app);
  char line[128];
  std::snprintf(line, sizeof(line), "%s %.3fs\n", stage.c_str(), secs);
  log << line;
  std::cout << stage << " done in " << secs << "s -> " << out.string() << "\n";
}

void check_series_finite(const std::vector<MatrixXcd>& frames,
                         const std::string& what) {
  for (const auto& f : frames)
    if (!f.allFinite())
      throw std::runtime_error(what + " produced non-finite values");
}

std::vector<int> default_nav_rows(int H) { return {H / 2 - 1, H / 2}; }

ImageSeries load_reference(const fs::path& dir, double frame_dt) {
  return io::read_series(dir / "series.dtn", frame_dt);
}

// --- stages -------------------------------------------------------------

int run_phantom(const json& cfg, const fs::path& out) {
  auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out);
  PhantomConfig pc = phantom_config(cfg);
  ImageSeries series = make_phantom(pc);
  check_series_finite(series.frames, "phantom");
  const int coils = cfg.at("acquisition").at("coils").get<int>();
  CoilMaps cm = make_coilmaps(coils, pc.H, pc.W, pc.seed + 7);
  io::write_series(out / "series.dtn", series);
  io::save_coilmaps(out / "coilmaps.dtn", cm);
  finish_stage(out, "phantom", cfg, {"series.dtn", "coilmaps.dtn"}, t0);
  return 0;
}

int run_acquire(const json& cfg, const fs::path& in, const fs::path& out) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(in, hash_of(cfg));
  fs::create_directories(out);
  PhantomConfig pc = phantom_config(cfg);
  ImageSeries series = load_reference(in, pc.frame_dt_s);
  CoilMaps cm = io::load_coilmaps(in / "coilmaps.dtn");
  const json& a = cfg.at("acquisition");
  const double sigma = a.at("noise_sigma").get<double>();
  const uint64_t seed = cfg.at("seed").get<uint64_t>();
  KSpaceDataset ds;
  if (a.at("mode") == "radial") {
    TrajectorySchedule sched = golden_angle_schedule(
        series.n_frames(), a.at("spokes_per_frame").get<int>(),
        a.at("n_readout").get<int>());
    ds = acquire(series, cm, sched, sigma, seed + 11);
  } else if (a.at("mode") == "cartesian") {
    std::vector<int> nav = default_nav_rows(pc.H);
    if (a.contains("nav_rows")) nav = a.at("nav_rows").get<std::vector<int>>();
    auto masks = make_cartesian_masks(series.n_frames(), pc.H, pc.W,
                                      a.at("rows_per_frame").get<int>(), nav,
                                      seed + 13);
    ds = acquire_cartesian(series, cm, masks, nav, sigma, seed + 11);
  } else {
    throw ConfigError("acquisition.mode must be radial or cartesian");
  }
  io::save_dataset(out / "dataset", ds);
  finish_stage(out, "acquire", cfg, {"dataset"}, t0);
  return 0;
}

int run_baseline(const json& cfg, const fs::path& data, const fs::path& out,
                 const std::string& method) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(data, hash_of(cfg));
  fs::create_directories(out);
  KSpaceDataset ds = io::load_dataset(data / "dataset");
  ReconConfig rc = recon_config(cfg);
  const json& b = cfg.at("baseline");
  FactorPair fp;
  if (method == "storm") {
    GraphLaplacian gl = storm_laplacian(ds, b.at("storm_sigma").get<double>(),
                                        b.at("storm_knn").get<int>());
    StormResult res =
        storm_recon(ds, gl, rc.r, b.at("storm_lambda").get<double>(),
                    b.at("cg_iters").get<int>());
    if (!res.factors.U.allFinite())
      throw std::runtime_error("baseline produced non-finite factors");
    fp = std::move(res.factors);
  } else if (method == "lowrank") {
    LowRankResult res =
        lowrank_recon(ds, rc.r, b.at("lowrank_lambda").get<double>(),
                      b.at("lowrank_sweeps").get<int>(), rc.seed + 17);
    if (!res.factors.U.allFinite())
      throw std::runtime_error("baseline produced non-finite factors");
    fp = std::move(res.factors);
  } else {
    throw ConfigError("baseline method must be storm or lowrank");
  }
  io::save_factors(out / "factors", fp);
  io::write_text(out / "method.txt", method + "\n");
  finish_stage(out, "baseline", cfg, {"factors", "method.txt"}, t0);
  return 0;
}

int run_pretrain(const json& cfg, const fs::path& data, const fs::path& init,
                 const fs::path& out) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(data, hash_of(cfg));
  check_upstream(init, hash_of(cfg));
  fs::create_directories(out);
  KSpaceDataset ds = io::load_dataset(data / "dataset");
  ReconConfig rc = recon_config(cfg);
  FactorPair fp = io::load_factors(init / "factors");
  const double scale = rc.normalize_data ? dataset_norm(ds) : 1.0;
  PretrainResult sp, tp;
  ReconInit ri = pretrain_init(fp.U, fp.V, ds.H, ds.W, rc, scale, &sp, &tp);
  io::save_net(out / "theta", ri.theta);
  io::save_net(out / "phi", ri.phi);
  io::write_matrix(out / "Z0.dtn", ri.Z);
  io::write_matrix(out / "U0.dtn", ri.U0);
  char fit[128];
  std::snprintf(fit, sizeof(fit), "spatial_fit %.6g\ntemporal_fit %.6g\n",
                sp.relative_fit, tp.relative_fit);
  io::write_text(out / "fit.txt", fit);
  finish_stage(out, "pretrain", cfg, {"theta", "phi", "Z0.dtn", "U0.dtn"}, t0);
  return 0;
}

int run_reconstruct(const json& cfg, const fs::path& data,
                    const fs::path& pretrain, const fs::path& out,
                    const fs::path& reference) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(data, hash_of(cfg));
  check_upstream(pretrain, hash_of(cfg));
  fs::create_directories(out);
  KSpaceDataset ds = io::load_dataset(data / "dataset");
  ReconConfig rc = recon_config(cfg);
  ReconInit ri;
  ri.theta = io::load_net(pretrain / "theta");
  ri.phi = io::load_net(pretrain / "phi");
  ri.Z = io::read_matrix(pretrain / "Z0.dtn");
  ri.U0 = io::read_matrix_complex(pretrain / "U0.dtn");
  ImageSeries ref;
  const bool have_ref = !reference.empty();
  if (have_ref) ref = load_reference(reference, 0.0);
  ReconResult res = reconstruct(ds, rc, ri, have_ref ? &ref : nullptr);
  io::save_factors(out / "factors", res.factors);
  io::save_net(out / "theta", res.theta);
  io::save_net(out / "phi", res.phi);
  io::write_matrix(out / "Z.dtn", res.Z);
  io::write_trace_csv(out / "trace.csv", res.trace);
  finish_stage(out, "reconstruct", cfg,
               {"factors", "theta", "phi", "Z.dtn", "trace.csv"}, t0);
  return 0;
}

int run_evaluate(const json& cfg, const fs::path& recon,
                 const fs::path& reference, const fs::path& out) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(recon, hash_of(cfg));
  fs::create_directories(out);
  FactorPair fp = io::load_factors(recon / "factors");
  PhantomConfig pc = phantom_config(cfg);
  // the reference may be the phantom series or another run's factors
  std::vector<MatrixXd> ref_frames;
  if (fs::exists(reference / "series.dtn")) {
    check_upstream(reference, hash_of(cfg));
    ImageSeries s = load_reference(reference, pc.frame_dt_s);
    for (const auto& f : s.frames) ref_frames.push_back(f.cwiseAbs());
  } else if (fs::exists(reference / "factors")) {
    check_upstream(reference, hash_of(cfg));
    FactorPair other = io::load_factors(reference / "factors");
    for (int i = 0; i < other.n_frames(); ++i)
      ref_frames.push_back(other.frame(i, pc.H, pc.W).cwiseAbs());
  } else {
    throw ConfigError("reference dir holds neither a series nor factors");
  }
  if (static_cast<int>(ref_frames.size()) != fp.n_frames())
    throw ConfigError("reference and reconstruction frame counts differ");

  double vmax = 0.0;
  for (const auto& f : ref_frames) vmax = std::max(vmax, f.maxCoeff());
  std::vector<double> sers, psnrs, hfens, ssims;
  for (int i = 0; i < fp.n_frames(); ++i) {
    MatrixXd rec = fp.frame(i, pc.H, pc.W).cwiseAbs();
    sers.push_back(metrics::ser(rec, ref_frames[i]));
    psnrs.push_back(metrics::psnr(rec, ref_frames[i]));
    hfens.push_back(metrics::hfen(rec, ref_frames[i]));
    ssims.push_back(metrics::ssim(rec, ref_frames[i], vmax));
  }
  std::vector<metrics::MetricReport> reports = {
      metrics::aggregate("ser", "db", sers),
      metrics::aggregate("psnr", "db", psnrs),
      metrics::aggregate("hfen", "ratio", hfens),
      metrics::aggregate("ssim", "", ssims)};
  json j = json::array();
  std::string csv = "metric,mode,mean,stddev\n";
  char line[160];
  for (const auto& r : reports) {
    j.push_back({{"metric", r.metric},
                 {"mode", r.mode},
                 {"mean", r.mean},
                 {"stddev", r.stddev},
                 {"per_frame", r.per_frame}});
    std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f\n", r.metric.c_str(),
                  r.mode.c_str(), r.mean, r.stddev);
    csv += line;
  }
  io::write_text(out / "metrics.json", j.dump(2) + "\n");
  io::write_text(out / "metrics.csv", csv);
  for (const auto& r : reports)
    std::cout << r.metric << (r.mode.empty() ? "" : " (" + r.mode + ")")
              << ": mean " << r.mean << " stddev " << r.stddev << "\n";
  finish_stage(out, "evaluate", cfg, {"metrics.json", "metrics.csv"}, t0);
  return 0;
}

int run_export(const json& cfg, const fs::path& recon, const fs::path& out,
               int frame_stride) {
  auto t0 = std::chrono::steady_clock::now();
  check_upstream(recon, hash_of(cfg));
  fs::create_directories(out / "frames");
  PhantomConfig pc = phantom_config(cfg);
  FactorPair fp = io::load_factors(recon / "factors");

  MatrixXd Z = io::read_matrix(recon / "Z.dtn");
  io::write_latents_csv(out / "latents.csv", Z);

  std::string curves = "frame";
  for (int j = 0; j < fp.rank(); ++j) curves += ",v" + std::to_string(j + 1);
  curves += "\n";
  char num[64];
  for (int i = 0; i < fp.n_frames(); ++i) {
    curves += std::to_string(i);
    for (int j = 0; j < fp.rank(); ++j) {
      std::snprintf(num, sizeof(num), ",%.9g", fp.V(i, j));
      curves += num;
    }
    curves += "\n";
  }
  io::write_text(out / "curves.csv", curves);

  double vmax = 0.0;
  std::vector<MatrixXd> mags;
  for (int i = 0; i < fp.n_frames(); ++i) {
    mags.push_back(fp.frame(i, pc.H, pc.W).cwiseAbs());
    vmax = std::max(vmax, mags.back().maxCoeff());
  }
  for (int i = 0; i < fp.n_frames(); i += std::max(frame_stride, 1)) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d.pgm", i);
    io::write_pgm(out / "frames" / name, mags[i], vmax, 8);
  }

  // x-t profile through the image center column
  const int xc = pc.W / 2;
  std::string profile = "frame";
  for (int y = 0; y < pc.H; ++y) profile += ",y" + std::to_string(y);
  profile += "\n";
  for (int i = 0; i < fp.n_frames(); ++i) {
    profile += std::to_string(i);
    for (int y = 0; y < pc.H; ++y) {
      std::snprintf(num, sizeof(num), ",%.9g", mags[i](y, xc));
      profile += num;
    }
    profile += "\n";
  }
  io::write_text(out / "profile_xt.csv", profile);
  finish_stage(out, "export", cfg,
               {"latents.csv", "curves.csv", "frames", "profile_xt.csv"}, t0);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic MRI recovery with generator-factored bilinear models"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed_override = 0;
  double duration = 0.0;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed_override, "override the config seed");
  app.add_option("--duration", duration,
                 "acquisition length preset in seconds (14, 28 or 42)");

  std::string out_dir, in_dir, data_dir, init_dir, pretrain_dir, recon_dir,
      reference_dir, method = "storm";
  int frame_stride = 10;

  auto* sc_phantom = app.add_subcommand("phantom", "simulate the image series");
  sc_phantom->add_option("--out", out_dir)->required();

  auto* sc_acquire = app.add_subcommand("acquire", "sample multi-coil k-space");
  sc_acquire->add_option("--in", in_dir, "phantom stage dir")->required();
  sc_acquire->add_option("--out", out_dir)->required();

  auto* sc_baseline =
      app.add_subcommand("baseline", "smooth-manifold or low-rank recovery");
  sc_baseline->add_option("--data", data_dir, "acquire stage dir")->required();
  sc_baseline->add_option("--method", method, "storm | lowrank");
  sc_baseline->add_option("--out", out_dir)->required();

  auto* sc_pretrain =
      app.add_subcommand("pretrain", "fit both generators to baseline factors");
  sc_pretrain->add_option("--data", data_dir, "acquire stage dir")->required();
  sc_pretrain->add_option("--init", init_dir, "baseline stage dir")->required();
  sc_pretrain->add_option("--out", out_dir)->required();

  auto* sc_recon =
      app.add_subcommand("reconstruct", "joint generator optimization");
  sc_recon->add_option("--data", data_dir, "acquire stage dir")->required();
  sc_recon->add_option("--pretrain", pretrain_dir)->required();
  sc_recon->add_option("--reference", reference_dir,
                       "phantom dir for trace quality column");
  sc_recon->add_option("--out", out_dir)->required();

  auto* sc_eval = app.add_subcommand("evaluate", "image quality metrics");
  sc_eval->add_option("--recon", recon_dir, "reconstruct or baseline dir")
      ->required();
  sc_eval->add_option("--reference", reference_dir,
                      "phantom dir or another recon dir")
      ->required();
  sc_eval->add_option("--out", out_dir)->required();

  auto* sc_export = app.add_subcommand("export", "CSV and PGM artifacts");
  sc_export->add_option("--recon", recon_dir)->required();
  sc_export->add_option("--frame-stride", frame_stride);
  sc_export->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = load_config(config_path, seed_override, duration);
    if (sc_phantom->parsed()) return run_phantom(cfg, out_dir);
    if (sc_acquire->parsed()) return run_acquire(cfg, in_dir, out_dir);
    if (sc_baseline->parsed())
      return run_baseline(cfg, data_dir, out_dir, method);
    if (sc_pretrain->parsed())
      return run_pretrain(cfg, data_dir, init_dir, out_dir);
    if (sc_recon->parsed())
      return run_reconstruct(cfg, data_dir, pretrain_dir, out_dir,
                             reference_dir);
    if (sc_eval->parsed())
      return run_evaluate(cfg, recon_dir, reference_dir, out_dir);
    if (sc_export->parsed())
      return run_export(cfg, recon_dir, out_dir, frame_stride);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
