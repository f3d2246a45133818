#include "sgs/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace sgs {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'S', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void vec3(const Vec3d& v) {
    for (int i = 0; i < 3; ++i) f64(v[i]);
  }
  void vec4(const Vec4d& v) {
    for (int i = 0; i < 4; ++i) f64(v[i]);
  }
  void sh(const ShMatrixd& m) {
    i32(static_cast<int32_t>(m.rows()));
    for (Eigen::Index j = 0; j < m.rows(); ++j)
      for (int c = 0; c < 3; ++c) f64(m(j, c));
  }
  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint8_t u8() { return next(1)[0]; }
  uint32_t u32() {
    const uint8_t* p = next(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    const uint8_t* p = next(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Vec3d vec3() {
    Vec3d v;
    for (int i = 0; i < 3; ++i) v[i] = f64();
    return v;
  }
  Vec4d vec4() {
    Vec4d v;
    for (int i = 0; i < 4; ++i) v[i] = f64();
    return v;
  }
  ShMatrixd sh() {
    const int rows = i32();
    if (rows < 0 || rows > 9) throw std::runtime_error("checkpoint: bad SH row count");
    ShMatrixd m(rows, 3);
    for (int j = 0; j < rows; ++j)
      for (int c = 0; c < 3; ++c) m(j, c) = f64();
    return m;
  }
  bool done() const { return pos_ == size_; }

 private:
  const uint8_t* next(size_t n) {
    if (pos_ + n > size_) throw std::runtime_error("checkpoint: payload truncated");
    const uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

void write_config(Writer& w, const TrainConfig& c) {
  w.i32(c.warmup_iters);
  w.i32(c.total_iters);
  w.i32(c.mc_samples);
  w.i32(c.sh_degree);
  w.i32(c.sparsification_bins);
  w.u64(c.seed);
  w.f64(c.prior_sqrt_variance);
  w.f64(c.weights.lambda_ssim);
  w.f64(c.weights.lambda_kl);
  w.f64(c.weights.lambda_ause);
  w.f64(c.lr.mean);
  w.f64(c.lr.sh);
  w.f64(c.lr.opacity);
  w.f64(c.lr.scale);
  w.f64(c.lr.rotation);
  w.f64(c.lr.posterior);
  w.i32(c.densify.start);
  w.i32(c.densify.until);
  w.i32(c.densify.interval);
  w.f64(c.densify.grad_threshold);
  w.f64(c.densify.prune_opacity);
  w.f64(c.densify.clone_scale_max);
  w.f64(c.densify.split_factor);
  w.f64(c.render.footprint_sigma);
  w.u8(c.render.contribution_cull ? 1 : 0);
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  c.warmup_iters = r.i32();
  c.total_iters = r.i32();
  c.mc_samples = r.i32();
  c.sh_degree = r.i32();
  c.sparsification_bins = r.i32();
  c.seed = r.u64();
  c.prior_sqrt_variance = r.f64();
  c.weights.lambda_ssim = r.f64();
  c.weights.lambda_kl = r.f64();
  c.weights.lambda_ause = r.f64();
  c.lr.mean = r.f64();
  c.lr.sh = r.f64();
  c.lr.opacity = r.f64();
  c.lr.scale = r.f64();
  c.lr.rotation = r.f64();
  c.lr.posterior = r.f64();
  c.densify.start = r.i32();
  c.densify.until = r.i32();
  c.densify.interval = r.i32();
  c.densify.grad_threshold = r.f64();
  c.densify.prune_opacity = r.f64();
  c.densify.clone_scale_max = r.f64();
  c.densify.split_factor = r.f64();
  c.render.footprint_sigma = r.f64();
  c.render.contribution_cull = r.u8() != 0;
  return c;
}

void write_scene(Writer& w, const Scene& s) {
  w.i32(s.sh_degree);
  w.i32(static_cast<int32_t>(s.kernels.size()));
  for (const GaussianKernel& k : s.kernels) {
    w.vec3(k.mean);
    w.vec3(k.log_scale);
    w.vec4(k.rotation);
    w.f64(k.opacity_logit);
    w.sh(k.sh_coeffs);
  }
}

Scene read_scene(Reader& r) {
  Scene s;
  s.sh_degree = r.i32();
  const int count = r.i32();
  if (count < 0) throw std::runtime_error("checkpoint: negative kernel count");
  s.kernels.resize(count);
  for (GaussianKernel& k : s.kernels) {
    k.mean = r.vec3();
    k.log_scale = r.vec3();
    k.rotation = r.vec4();
    k.opacity_logit = r.f64();
    k.sh_coeffs = r.sh();
  }
  return s;
}

void write_distribution(Writer& w, const KernelDistribution& d) {
  w.vec3(d.mean_mu);
  w.vec3(d.sqrt_gamma);
  w.f64(d.mean_logit_alpha);
  w.f64(d.sqrt_pi);
  w.sh(d.mean_c);
  w.sh(d.sqrt_xi);
}

KernelDistribution read_distribution(Reader& r) {
  KernelDistribution d;
  d.mean_mu = r.vec3();
  d.sqrt_gamma = r.vec3();
  d.mean_logit_alpha = r.f64();
  d.sqrt_pi = r.f64();
  d.mean_c = r.sh();
  d.sqrt_xi = r.sh();
  return d;
}

void write_vscene(Writer& w, const VariationalScene& vs) {
  w.i32(vs.sh_degree);
  w.u8(vs.prior_frozen ? 1 : 0);
  w.i32(vs.kernel_count());
  for (const auto& d : vs.posterior) write_distribution(w, d);
  for (const auto& d : vs.prior) write_distribution(w, d);
  for (const auto& s : vs.shape) {
    w.vec3(s.log_scale);
    w.vec4(s.rotation);
  }
}

VariationalScene read_vscene(Reader& r) {
  VariationalScene vs;
  vs.sh_degree = r.i32();
  vs.prior_frozen = r.u8() != 0;
  const int count = r.i32();
  if (count < 0) throw std::runtime_error("checkpoint: negative kernel count");
  vs.posterior.resize(count);
  vs.prior.resize(count);
  vs.shape.resize(count);
  for (auto& d : vs.posterior) d = read_distribution(r);
  for (auto& d : vs.prior) d = read_distribution(r);
  for (auto& s : vs.shape) {
    s.log_scale = r.vec3();
    s.rotation = r.vec4();
  }
  return vs;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  Writer payload;
  payload.u8(static_cast<uint8_t>(checkpoint.phase));
  payload.i32(checkpoint.iteration);
  payload.u64(checkpoint.seed);
  write_config(payload, checkpoint.config);
  if (checkpoint.phase == Phase::kDeterministic) {
    write_scene(payload, checkpoint.scene);
  } else {
    write_vscene(payload, checkpoint.vscene);
  }

  Writer header;
  for (char c : kMagic) header.u8(static_cast<uint8_t>(c));
  header.u32(kCheckpointVersion);
  header.u64(payload.data().size());
  header.u32(static_cast<uint32_t>(
      ::crc32(0, payload.data().data(), static_cast<uInt>(payload.data().size()))));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(reinterpret_cast<const char*>(header.data().data()),
            static_cast<std::streamsize>(header.data().size()));
  out.write(reinterpret_cast<const char*>(payload.data().data()),
            static_cast<std::streamsize>(payload.data().size()));
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

  if (file.size() < 24 || std::memcmp(file.data(), kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: not an SGS checkpoint: " + path);
  Reader header(file.data() + 8, 16);
  const uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version) +
                             " (expected " + std::to_string(kCheckpointVersion) + ")");
  const uint64_t payload_size = header.u64();
  const uint32_t stored_crc = header.u32();
  if (file.size() != 24 + payload_size)
    throw std::runtime_error("load_checkpoint: checksum failure (truncated or padded file): " +
                             path);
  const uint32_t actual_crc =
      static_cast<uint32_t>(::crc32(0, file.data() + 24, static_cast<uInt>(payload_size)));
  if (stored_crc != actual_crc)
    throw std::runtime_error("load_checkpoint: checksum failure: " + path);

  Reader r(file.data() + 24, payload_size);
  Checkpoint ckpt;
  ckpt.phase = static_cast<Phase>(r.u8());
  ckpt.iteration = r.i32();
  ckpt.seed = r.u64();
  ckpt.config = read_config(r);
  if (ckpt.phase == Phase::kDeterministic) {
    ckpt.scene = read_scene(r);
  } else if (ckpt.phase == Phase::kBayesian) {
    ckpt.vscene = read_vscene(r);
  } else {
    throw std::runtime_error("load_checkpoint: unknown phase tag");
  }
  if (!r.done()) throw std::runtime_error("load_checkpoint: trailing bytes in payload");
  return ckpt;
}

}  // namespace sgs
