#pragma once

#include "deblur/factors.hpp"
#include "deblur/generators.hpp"
#include "deblur/operators.hpp"
#include "deblur/phantom.hpp"
#include "deblur/train.hpp"

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace deblur::io {

namespace fs = std::filesystem;

// --- DTN1 tensor container ---------------------------------------------
// magic "DTN1" | dtype u8 (1 = f64, 2 = complex f64 interleaved) | ndim u8 |
// shape (ndim x u64 LE) | payload (row-major, LE)

struct TensorFile {
  uint8_t dtype = 1;
  std::vector<uint64_t> shape;
  std::vector<double> real;
  std::vector<std::complex<double>> cplx;

  uint64_t count() const {
    uint64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }
};

void write_tensor(const fs::path& path, const std::vector<uint64_t>& shape,
                  const double* data);
void write_tensor(const fs::path& path, const std::vector<uint64_t>& shape,
                  const std::complex<double>* data);
TensorFile read_tensor(const fs::path& path);

// Matrices are written with their (rows, cols) logical shape, row-major.
void write_matrix(const fs::path& path, const MatrixXd& m);
void write_matrix(const fs::path& path, const MatrixXcd& m);
MatrixXd read_matrix(const fs::path& path);
MatrixXcd read_matrix_complex(const fs::path& path);

// [n_f, H, W] containers
void write_series(const fs::path& path, const ImageSeries& series);
ImageSeries read_series(const fs::path& path, double frame_dt);

// --- higher level artifacts --------------------------------------------

void save_coilmaps(const fs::path& path, const CoilMaps& cm);
CoilMaps load_coilmaps(const fs::path& path);

void save_schedule_json(const fs::path& path, const TrajectorySchedule& s);
TrajectorySchedule load_schedule_json(const fs::path& path);

void save_dataset(const fs::path& dir, const KSpaceDataset& ds);
KSpaceDataset load_dataset(const fs::path& dir);

void save_factors(const fs::path& dir, const FactorPair& fp);
FactorPair load_factors(const fs::path& dir);

// net directory: manifest.json with kind/layer shapes + one DTN1 per tensor
void save_net(const fs::path& dir, const GeneratorNet& net);
GeneratorNet load_net(const fs::path& dir);

void write_trace_csv(const fs::path& path, const TrainTrace& trace);
void write_latents_csv(const fs::path& path, const MatrixXd& Z);

// 8- or 16-bit PGM of a magnitude image scaled to [0, vmax]
void write_pgm(const fs::path& path, const MatrixXd& magnitude, double vmax,
               int bits = 8);

// --- manifests -----------------------------------------------------------

// FNV-1a 64 over the canonical (sorted-key) JSON dump
uint64_t config_hash(const std::string& canonical_json);

// Writes manifest.json with config, config_hash, seed, stage name and output
// list. Timing goes to a separate run.log so artifacts stay byte-identical
// across reruns.
void write_manifest(const fs::path& dir, const std::string& stage,
                    const std::string& config_json, uint64_t seed,
                    const std::vector<std::string>& outputs);

// returns the embedded config hash; throws if the manifest is missing
uint64_t read_manifest_hash(const fs::path& dir);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace deblur::io
