#include "deblur/io.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

// small end-to-end config so the whole pipeline runs in seconds
const char* kConfig = R"({
  "phantom": {"H": 16, "W": 16, "duration_s": 1.0, "frame_dt_s": 0.05,
              "cardiac_period_s": 0.5, "respiratory_period_s": 1.0,
              "cardiac_amp": 0.1, "resp_shift_px": 0.5},
  "acquisition": {"mode": "cartesian", "coils": 2, "rows_per_frame": 5,
                  "noise_sigma": 0.005},
  "baseline": {"storm_lambda": 0.05, "storm_knn": 4, "cg_iters": 40,
               "lowrank_lambda": 1e-4, "lowrank_sweeps": 20},
  "recon": {"r": 4, "d": 2, "epochs": 6, "pretrain_epochs_spatial": 60,
            "pretrain_epochs_temporal": 120, "hidden_temporal": 8,
            "lambda1": 1e-4, "lambda2": 1e-4, "lambda3": 0.5,
            "optimizer": "adam", "lr_theta": 1e-3, "lr_phi": 1e-3,
            "lr_z": 1e-3},
  "seed": 3
})";

std::string cli_path() {
  const char* p = std::getenv("DEBLUR_CLI");
  REQUIRE_MESSAGE(p != nullptr, "DEBLUR_CLI must point at the binary");
  return p;
}

int run(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workspace {
  fs::path root;
  fs::path cfg;
  explicit Workspace(const std::string& name) {
    root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    fs::create_directories(root);
    cfg = root / "config.json";
    std::ofstream(cfg) << kConfig;
  }
  ~Workspace() { fs::remove_all(root); }
  std::string dir(const std::string& d) const { return (root / d).string(); }
};

int run_pipeline(const Workspace& ws, const std::string& seed_flag = "") {
  const std::string base = "--config " + ws.cfg.string() + " " + seed_flag;
  int rc = run(base + " phantom --out " + ws.dir("phantom"));
  if (rc) return rc;
  rc = run(base + " acquire --in " + ws.dir("phantom") + " --out " +
           ws.dir("acq"));
  if (rc) return rc;
  rc = run(base + " baseline --data " + ws.dir("acq") + " --method storm" +
           " --out " + ws.dir("storm"));
  if (rc) return rc;
  rc = run(base + " pretrain --data " + ws.dir("acq") + " --init " +
           ws.dir("storm") + " --out " + ws.dir("pre"));
  if (rc) return rc;
  rc = run(base + " reconstruct --data " + ws.dir("acq") + " --pretrain " +
           ws.dir("pre") + " --reference " + ws.dir("phantom") + " --out " +
           ws.dir("recon"));
  if (rc) return rc;
  rc = run(base + " evaluate --recon " + ws.dir("recon") + " --reference " +
           ws.dir("phantom") + " --out " + ws.dir("eval"));
  if (rc) return rc;
  return run(base + " export --recon " + ws.dir("recon") + " --out " +
             ws.dir("exp") + " --frame-stride 5");
}

}  // namespace

TEST_CASE("full pipeline runs and produces every artifact") {
  Workspace ws("deblur_cli_e2e");
  REQUIRE(run_pipeline(ws) == 0);

  CHECK(fs::exists(ws.root / "phantom/series.dtn"));
  CHECK(fs::exists(ws.root / "acq/dataset/samples.dtn"));
  CHECK(fs::exists(ws.root / "storm/factors/U.dtn"));
  CHECK(fs::exists(ws.root / "pre/theta/net.json"));
  CHECK(fs::exists(ws.root / "pre/Z0.dtn"));
  CHECK(fs::exists(ws.root / "recon/trace.csv"));
  CHECK(fs::exists(ws.root / "recon/Z.dtn"));
  CHECK(fs::exists(ws.root / "eval/metrics.csv"));
  CHECK(fs::exists(ws.root / "exp/latents.csv"));
  CHECK(fs::exists(ws.root / "exp/curves.csv"));
  CHECK(fs::exists(ws.root / "exp/profile_xt.csv"));
  CHECK(fs::exists(ws.root / "exp/frames/frame_0000.pgm"));

  // every stage dir carries a manifest with the same config hash
  const uint64_t h = deblur::io::read_manifest_hash(ws.root / "phantom");
  for (const char* d : {"acq", "storm", "pre", "recon", "eval", "exp"})
    CHECK(deblur::io::read_manifest_hash(ws.root / d) == h);

  // timing log exists but the manifest itself is free of timestamps
  CHECK(fs::exists(ws.root / "recon/run.log"));
  std::string manifest =
      deblur::io::read_text(ws.root / "recon/manifest.json");
  CHECK(manifest.find("time") == std::string::npos);

  // metrics CSV has the four expected rows
  std::string csv = deblur::io::read_text(ws.root / "eval/metrics.csv");
  CHECK(csv.find("ser,") != std::string::npos);
  CHECK(csv.find("psnr,") != std::string::npos);
  CHECK(csv.find("hfen,") != std::string::npos);
  CHECK(csv.find("ssim,") != std::string::npos);

  // latents CSV: header + one row per frame (20 frames at these settings)
  std::string lat = deblur::io::read_text(ws.root / "exp/latents.csv");
  CHECK(lat.rfind("frame,z1,z2", 0) == 0);
  CHECK(std::count(lat.begin(), lat.end(), '\n') == 21);
}

TEST_CASE("reruns of the pipeline are byte identical") {
  Workspace a("deblur_cli_det_a");
  Workspace b("deblur_cli_det_b");
  REQUIRE(run_pipeline(a) == 0);
  REQUIRE(run_pipeline(b) == 0);
  for (const char* f :
       {"acq/dataset/samples.dtn", "storm/factors/U.dtn", "pre/Z0.dtn",
        "recon/factors/U.dtn", "recon/factors/V.dtn", "recon/Z.dtn",
        "recon/trace.csv", "eval/metrics.csv", "exp/latents.csv"}) {
    CAPTURE(f);
    CHECK(deblur::io::read_text(a.root / f) ==
          deblur::io::read_text(b.root / f));
  }
}

TEST_CASE("seed override changes the data and the manifest hash") {
  Workspace a("deblur_cli_seed");
  REQUIRE(run(std::string("--config ") + a.cfg.string() +
              " phantom --out " + a.dir("p1")) == 0);
  REQUIRE(run(std::string("--config ") + a.cfg.string() +
              " --seed 99 phantom --out " + a.dir("p2")) == 0);
  CHECK(deblur::io::read_manifest_hash(a.root / "p1") !=
        deblur::io::read_manifest_hash(a.root / "p2"));
}

TEST_CASE("stage coupling rejects mismatched configs with exit code 2") {
  Workspace ws("deblur_cli_couple");
  REQUIRE(run(std::string("--config ") + ws.cfg.string() +
              " phantom --out " + ws.dir("phantom")) == 0);
  // different seed -> different hash -> acquire must refuse
  CHECK(run(std::string("--config ") + ws.cfg.string() +
            " --seed 42 acquire --in " + ws.dir("phantom") + " --out " +
            ws.dir("acq")) == 2);
}

TEST_CASE("bad inputs exit with the documented codes") {
  Workspace ws("deblur_cli_bad");
  // malformed config file
  std::ofstream(ws.root / "broken.json") << "{ not json";
  CHECK(run("--config " + (ws.root / "broken.json").string() +
            " phantom --out " + ws.dir("x")) == 2);
  // bad duration preset
  CHECK(run("--config " + ws.cfg.string() + " --duration 15 phantom --out " +
            ws.dir("y")) == 2);
  // missing upstream directory
  CHECK(run("--config " + ws.cfg.string() + " acquire --in " +
            ws.dir("nowhere") + " --out " + ws.dir("z")) == 2);
}
