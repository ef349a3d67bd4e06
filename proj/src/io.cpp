#include "deblur/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace deblur::io {

using nlohmann::json;

namespace {

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
  return is;
}

void write_header(std::ostream& os, uint8_t dtype,
                  const std::vector<uint64_t>& shape) {
  os.write("DTN1", 4);
  os.put(static_cast<char>(dtype));
  os.put(static_cast<char>(shape.size()));
  for (auto e : shape) put_u64(os, e);
}

}  // namespace

void write_tensor(const fs::path& path, const std::vector<uint64_t>& shape,
                  const double* data) {
  auto os = open_out(path);
  write_header(os, 1, shape);
  uint64_t n = 1;
  for (auto e : shape) n *= e;
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * sizeof(double)));
}

void write_tensor(const fs::path& path, const std::vector<uint64_t>& shape,
                  const std::complex<double>* data) {
  auto os = open_out(path);
  write_header(os, 2, shape);
  uint64_t n = 1;
  for (auto e : shape) n *= e;
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(n * 2 * sizeof(double)));
}

TensorFile read_tensor(const fs::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (std::string(magic, 4) != "DTN1")
    throw std::runtime_error("not a DTN1 container: " + path.string());
  TensorFile tf;
  tf.dtype = static_cast<uint8_t>(is.get());
  const int ndim = is.get();
  tf.shape.resize(ndim);
  for (int i = 0; i < ndim; ++i) tf.shape[i] = get_u64(is);
  const uint64_t n = tf.count();
  if (tf.dtype == 1) {
    tf.real.resize(n);
    is.read(reinterpret_cast<char*>(tf.real.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  } else if (tf.dtype == 2) {
    tf.cplx.resize(n);
    is.read(reinterpret_cast<char*>(tf.cplx.data()),
            static_cast<std::streamsize>(n * 2 * sizeof(double)));
  } else {
    throw std::runtime_error("unknown dtype in " + path.string());
  }
  if (!is) throw std::runtime_error("truncated container: " + path.string());
  return tf;
}

namespace {

template <typename Mat>
std::vector<typename Mat::Scalar> to_row_major(const Mat& m) {
  std::vector<typename Mat::Scalar> out(m.size());
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[n++] = m(i, j);
  return out;
}

}  // namespace

void write_matrix(const fs::path& path, const MatrixXd& m) {
  auto buf = to_row_major(m);
  write_tensor(path, {static_cast<uint64_t>(m.rows()),
                      static_cast<uint64_t>(m.cols())}, buf.data());
}

void write_matrix(const fs::path& path, const MatrixXcd& m) {
  auto buf = to_row_major(m);
  write_tensor(path, {static_cast<uint64_t>(m.rows()),
                      static_cast<uint64_t>(m.cols())}, buf.data());
}

MatrixXd read_matrix(const fs::path& path) {
  TensorFile tf = read_tensor(path);
  if (tf.dtype != 1 || tf.shape.size() != 2)
    throw std::runtime_error("expected real rank-2 tensor: " + path.string());
  MatrixXd m(tf.shape[0], tf.shape[1]);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = tf.real[n++];
  return m;
}

MatrixXcd read_matrix_complex(const fs::path& path) {
  TensorFile tf = read_tensor(path);
  if (tf.dtype != 2 || tf.shape.size() != 2)
    throw std::runtime_error("expected complex rank-2 tensor: " + path.string());
  MatrixXcd m(tf.shape[0], tf.shape[1]);
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = tf.cplx[n++];
  return m;
}

void write_series(const fs::path& path, const ImageSeries& series) {
  const int nf = series.n_frames(), H = series.height(), W = series.width();
  std::vector<std::complex<double>> buf(static_cast<size_t>(nf) * H * W);
  size_t n = 0;
  for (int i = 0; i < nf; ++i)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) buf[n++] = series.frames[i](y, x);
  write_tensor(path, {static_cast<uint64_t>(nf), static_cast<uint64_t>(H),
                      static_cast<uint64_t>(W)}, buf.data());
}

ImageSeries read_series(const fs::path& path, double frame_dt) {
  TensorFile tf = read_tensor(path);
  if (tf.dtype != 2 || tf.shape.size() != 3)
    throw std::runtime_error("expected complex rank-3 tensor: " + path.string());
  ImageSeries series;
  series.frame_dt = frame_dt;
  const int nf = static_cast<int>(tf.shape[0]);
  const int H = static_cast<int>(tf.shape[1]), W = static_cast<int>(tf.shape[2]);
  size_t n = 0;
  for (int i = 0; i < nf; ++i) {
    MatrixXcd f(H, W);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) f(y, x) = tf.cplx[n++];
    series.frames.push_back(std::move(f));
  }
  return series;
}

void save_coilmaps(const fs::path& path, const CoilMaps& cm) {
  ImageSeries s;
  s.frames = cm.maps;
  write_series(path, s);
}

CoilMaps load_coilmaps(const fs::path& path) {
  ImageSeries s = read_series(path, 0.0);
  CoilMaps cm;
  cm.maps = std::move(s.frames);
  return cm;
}

void save_schedule_json(const fs::path& path, const TrajectorySchedule& s) {
  json j;
  j["n_readout"] = s.n_readout;
  j["frames"] = json::array();
  for (const auto& frame : s.frames) {
    json spokes = json::array();
    for (const auto& sp : frame)
      spokes.push_back({{"angle", sp.angle}, {"navigator", sp.navigator}});
    j["frames"].push_back(spokes);
  }
  write_text(path, j.dump(2) + "\n");
}

TrajectorySchedule load_schedule_json(const fs::path& path) {
  json j = json::parse(read_text(path));
  TrajectorySchedule s;
  s.n_readout = j.at("n_readout").get<int>();
  for (const auto& frame : j.at("frames")) {
    std::vector<Spoke> spokes;
    for (const auto& sp : frame)
      spokes.push_back({sp.at("angle").get<double>(),
                        sp.at("navigator").get<bool>()});
    s.frames.push_back(std::move(spokes));
  }
  return s;
}

void save_dataset(const fs::path& dir, const KSpaceDataset& ds) {
  fs::create_directories(dir);
  json meta;
  meta["mode"] = ds.mode == SamplingMode::Radial ? "radial" : "cartesian";
  meta["H"] = ds.H;
  meta["W"] = ds.W;
  meta["n_frames"] = ds.n_frames();
  meta["n_coils"] = ds.n_coils();
  meta["noise_sigma"] = ds.noise_sigma;
  meta["nav_rows"] = ds.nav_rows;
  write_text(dir / "dataset.json", meta.dump(2) + "\n");
  save_coilmaps(dir / "coilmaps.dtn", ds.coils);
  if (ds.mode == SamplingMode::Radial) {
    save_schedule_json(dir / "schedule.json", ds.schedule);
  } else {
    const int nf = ds.n_frames();
    std::vector<double> buf(static_cast<size_t>(nf) * ds.H * ds.W);
    size_t n = 0;
    for (int i = 0; i < nf; ++i)
      for (int y = 0; y < ds.H; ++y)
        for (int x = 0; x < ds.W; ++x) buf[n++] = ds.masks[i](y, x) ? 1.0 : 0.0;
    write_tensor(dir / "masks.dtn",
                 {static_cast<uint64_t>(nf), static_cast<uint64_t>(ds.H),
                  static_cast<uint64_t>(ds.W)}, buf.data());
  }
  // samples: [n_f, n_coils, n_samples] (equal count per frame)
  const Eigen::Index ns = ds.frame_sample_count(0);
  std::vector<std::complex<double>> buf(
      static_cast<size_t>(ds.n_frames()) * ds.n_coils() * ns);
  size_t n = 0;
  for (int i = 0; i < ds.n_frames(); ++i)
    for (int c = 0; c < ds.n_coils(); ++c)
      for (Eigen::Index m = 0; m < ns; ++m) buf[n++] = ds.samples[i][c][m];
  write_tensor(dir / "samples.dtn",
               {static_cast<uint64_t>(ds.n_frames()),
                static_cast<uint64_t>(ds.n_coils()),
                static_cast<uint64_t>(ns)}, buf.data());
}

KSpaceDataset load_dataset(const fs::path& dir) {
  json meta = json::parse(read_text(dir / "dataset.json"));
  KSpaceDataset ds;
  ds.mode = meta.at("mode") == "radial" ? SamplingMode::Radial
                                        : SamplingMode::Cartesian;
  ds.H = meta.at("H").get<int>();
  ds.W = meta.at("W").get<int>();
  ds.noise_sigma = meta.at("noise_sigma").get<double>();
  ds.nav_rows = meta.at("nav_rows").get<std::vector<int>>();
  ds.coils = load_coilmaps(dir / "coilmaps.dtn");
  const int nf = meta.at("n_frames").get<int>();
  if (ds.mode == SamplingMode::Radial) {
    ds.schedule = load_schedule_json(dir / "schedule.json");
  } else {
    TensorFile tf = read_tensor(dir / "masks.dtn");
    size_t n = 0;
    for (int i = 0; i < nf; ++i) {
      Mask m(ds.H, ds.W);
      for (int y = 0; y < ds.H; ++y)
        for (int x = 0; x < ds.W; ++x)
          m(y, x) = tf.real[n++] != 0.0 ? 1 : 0;
      ds.masks.push_back(std::move(m));
    }
  }
  TensorFile tf = read_tensor(dir / "samples.dtn");
  const int nc = static_cast<int>(tf.shape[1]);
  const Eigen::Index ns = static_cast<Eigen::Index>(tf.shape[2]);
  ds.samples.resize(nf);
  size_t n = 0;
  for (int i = 0; i < nf; ++i)
    for (int c = 0; c < nc; ++c) {
      VectorXcd b(ns);
      for (Eigen::Index m = 0; m < ns; ++m) b[m] = tf.cplx[n++];
      ds.samples[i].push_back(std::move(b));
    }
  ds.validate();
  return ds;
}

void save_factors(const fs::path& dir, const FactorPair& fp) {
  fs::create_directories(dir);
  write_matrix(dir / "U.dtn", fp.U);
  write_matrix(dir / "V.dtn", fp.V);
}

FactorPair load_factors(const fs::path& dir) {
  return FactorPair{read_matrix_complex(dir / "U.dtn"),
                    read_matrix(dir / "V.dtn")};
}

void save_net(const fs::path& dir, const GeneratorNet& net) {
  fs::create_directories(dir);
  json j;
  j["kind"] = net.kind == NetKind::Spatial2D ? "spatial2d" : "temporal1d";
  j["layers"] = json::array();
  for (size_t l = 0; l < net.layers.size(); ++l) {
    j["layers"].push_back({{"weights", net.layers[l].weights.shape},
                           {"bias", net.layers[l].bias.shape}});
    std::vector<uint64_t> ws(net.layers[l].weights.shape.begin(),
                             net.layers[l].weights.shape.end());
    write_tensor(dir / ("w" + std::to_string(l) + ".dtn"), ws,
                 net.layers[l].weights.data.data());
    write_tensor(dir / ("b" + std::to_string(l) + ".dtn"),
                 {static_cast<uint64_t>(net.layers[l].bias.shape[0])},
                 net.layers[l].bias.data.data());
  }
  write_text(dir / "net.json", j.dump(2) + "\n");
}

GeneratorNet load_net(const fs::path& dir) {
  json j = json::parse(read_text(dir / "net.json"));
  GeneratorNet net;
  net.kind = j.at("kind") == "spatial2d" ? NetKind::Spatial2D
                                         : NetKind::Temporal1D;
  const auto& layers = j.at("layers");
  for (size_t l = 0; l < layers.size(); ++l) {
    TensorFile wf = read_tensor(dir / ("w" + std::to_string(l) + ".dtn"));
    TensorFile bf = read_tensor(dir / ("b" + std::to_string(l) + ".dtn"));
    ConvLayer layer;
    layer.weights = ad::Tensor(
        std::vector<int>(wf.shape.begin(), wf.shape.end()),
        Eigen::Map<const Eigen::VectorXd>(wf.real.data(), wf.real.size()));
    layer.bias = ad::Tensor(
        std::vector<int>(bf.shape.begin(), bf.shape.end()),
        Eigen::Map<const Eigen::VectorXd>(bf.real.data(), bf.real.size()));
    net.layers.push_back(std::move(layer));
  }
  net.validate();
  return net;
}

void write_trace_csv(const fs::path& path, const TrainTrace& trace) {
  std::string s = "epoch,data_loss,l1_theta,l1_phi,tv_z,ser_db\n";
  char line[256];
  for (const auto& r : trace.rows) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.epoch, r.data_loss, r.l1_theta, r.l1_phi, r.tv_z, r.ser_db);
    s += line;
  }
  write_text(path, s);
}

void write_latents_csv(const fs::path& path, const MatrixXd& Z) {
  std::string s = "frame";
  for (Eigen::Index k = 0; k < Z.rows(); ++k)
    s += ",z" + std::to_string(k + 1);
  s += "\n";
  char num[64];
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    s += std::to_string(i);
    for (Eigen::Index k = 0; k < Z.rows(); ++k) {
      std::snprintf(num, sizeof(num), ",%.17g", Z(k, i));
      s += num;
    }
    s += "\n";
  }
  write_text(path, s);
}

void write_pgm(const fs::path& path, const MatrixXd& magnitude, double vmax,
               int bits) {
  if (bits != 8 && bits != 16)
    throw std::invalid_argument("write_pgm: bits must be 8 or 16");
  if (vmax <= 0.0) vmax = 1.0;
  const int maxval = bits == 8 ? 255 : 65535;
  std::string header = "P5\n" + std::to_string(magnitude.cols()) + " " +
                       std::to_string(magnitude.rows()) + "\n" +
                       std::to_string(maxval) + "\n";
  auto os = open_out(path);
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Eigen::Index y = 0; y < magnitude.rows(); ++y)
    for (Eigen::Index x = 0; x < magnitude.cols(); ++x) {
      double v = std::min(std::max(magnitude(y, x) / vmax, 0.0), 1.0);
      const int q = static_cast<int>(std::lround(v * maxval));
      if (bits == 8) {
        os.put(static_cast<char>(q));
      } else {
        os.put(static_cast<char>(q >> 8));
        os.put(static_cast<char>(q & 0xff));
      }
    }
}

uint64_t config_hash(const std::string& canonical_json) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical_json) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const fs::path& dir, const std::string& stage,
                    const std::string& config_json, uint64_t seed,
                    const std::vector<std::string>& outputs) {
  json j;
  j["stage"] = stage;
  j["config"] = json::parse(config_json);
  j["config_hash"] = config_hash(json::parse(config_json).dump());
  j["seed"] = seed;
  j["outputs"] = outputs;
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

uint64_t read_manifest_hash(const fs::path& dir) {
  json j = json::parse(read_text(dir / "manifest.json"));
  return j.at("config_hash").get<uint64_t>();
}

std::string read_text(const fs::path& path) {
  auto is = open_in(path);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace deblur::io
