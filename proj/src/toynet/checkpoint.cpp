#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "transtrack/toynet.hpp"

namespace transtrack::toynet {
namespace {

constexpr std::array<char, 8> kMagic{'T', 'T', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::array<char, 8> kGridMagic{'T', 'T', 'G', 'R', 'I', 'D', '\0', '\0'};
constexpr std::uint64_t kMaxDim = std::uint64_t{1} << 32;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void read_exact(std::istream& in, char* dst, std::size_t n) {
  if (!in.read(dst, static_cast<std::streamsize>(n))) {
    throw std::runtime_error("checkpoint truncated");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

int get_int(std::istream& in, const char* what) {
  const std::uint64_t v = get_u64(in);
  if (v > static_cast<std::uint64_t>(INT32_MAX)) {
    throw std::runtime_error(std::string("checkpoint: ") + what + " out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& p) {
  const ModelConfig& c = p.config;
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u64(out, static_cast<std::uint64_t>(c.grid_h));
  put_u64(out, static_cast<std::uint64_t>(c.grid_w));
  put_u64(out, static_cast<std::uint64_t>(c.feature_channels));
  put_u64(out, static_cast<std::uint64_t>(c.d_model));
  put_u64(out, static_cast<std::uint64_t>(c.ffn_dim));
  put_u64(out, static_cast<std::uint64_t>(c.num_queries));
  put_u64(out, static_cast<std::uint64_t>(c.encoder_layers));
  put_u64(out, static_cast<std::uint64_t>(c.decoder_layers));
  put_u64(out, static_cast<std::uint64_t>(c.classes));
  put_u64(out, c.share_decoders ? 1 : 0);
  put_f64(out, c.init_scale);
  put_u64(out, c.seed);

  std::uint64_t count = 0;
  for_each_tensor(p, [&](const std::string&, const Tensor&) { ++count; });
  put_u64(out, count);
  for_each_tensor(p, [&](const std::string& name, const Tensor& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (const std::size_t d : t.shape()) put_u64(out, d);
  });
  for_each_tensor(p, [&](const std::string&, const Tensor& t) {
    for (const double v : t.values()) put_f64(out, v);
  });
  if (!out) throw std::runtime_error("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const ModelParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(out, p);
}

ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kMagic) throw std::runtime_error("not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.grid_h = get_int(in, "grid_h");
  c.grid_w = get_int(in, "grid_w");
  c.feature_channels = get_int(in, "feature_channels");
  c.d_model = get_int(in, "d_model");
  c.ffn_dim = get_int(in, "ffn_dim");
  c.num_queries = get_int(in, "num_queries");
  c.encoder_layers = get_int(in, "encoder_layers");
  c.decoder_layers = get_int(in, "decoder_layers");
  c.classes = get_int(in, "classes");
  c.share_decoders = get_u64(in) != 0;
  c.init_scale = get_f64(in);
  c.seed = get_u64(in);
  ModelParams p;
  try {
    p = zero_params(c);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }

  std::uint64_t expected = 0;
  for_each_tensor(p, [&](const std::string&, const Tensor&) { ++expected; });
  if (get_u64(in) != expected) throw std::runtime_error("checkpoint tensor count mismatch");
  for_each_tensor(p, [&](const std::string& name, const Tensor& t) {
    const std::uint32_t len = get_u32(in);
    if (len > 256) throw std::runtime_error("checkpoint: tensor name too long");
    std::string stored(len, '\0');
    read_exact(in, stored.data(), len);
    if (stored != name) {
      throw std::runtime_error("checkpoint: expected tensor '" + name + "', found '" + stored + "'");
    }
    const std::uint32_t rank = get_u32(in);
    if (rank != t.rank()) throw std::runtime_error("checkpoint: rank mismatch for " + name);
    for (std::size_t i = 0; i < rank; ++i) {
      const std::uint64_t d = get_u64(in);
      if (d >= kMaxDim || d != t.dim(i)) {
        throw std::runtime_error("checkpoint: shape mismatch for " + name);
      }
    }
  });
  for_each_tensor(p, [&](const std::string&, Tensor& t) {
    for (double& v : t.values()) v = get_f64(in);
  });
  return p;
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

void save_feature_grids(std::ostream& out, const std::vector<Tensor>& frames) {
  std::array<std::size_t, 3> shape{0, 0, 0};
  if (!frames.empty()) {
    if (frames.front().rank() != 3) throw std::invalid_argument("feature grids must be rank 3");
    shape = {frames.front().dim(0), frames.front().dim(1), frames.front().dim(2)};
  }
  for (const auto& f : frames) {
    if (f.rank() != 3 || f.dim(0) != shape[0] || f.dim(1) != shape[1] || f.dim(2) != shape[2]) {
      throw std::invalid_argument("feature grids differ in shape");
    }
  }
  out.write(kGridMagic.data(), kGridMagic.size());
  put_u32(out, kVersion);
  put_u64(out, frames.size());
  for (const std::size_t d : shape) put_u64(out, d);
  for (const auto& f : frames) {
    for (const double v : f.values()) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("feature grid write failed");
}

void save_feature_grids(const std::string& path, const std::vector<Tensor>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_feature_grids(out, frames);
}

std::vector<Tensor> load_feature_grids(std::istream& in) {
  std::array<char, 8> magic{};
  read_exact(in, magic.data(), magic.size());
  if (magic != kGridMagic) throw std::runtime_error("not a feature grid file (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported feature grid version " + std::to_string(version));
  }
  const std::uint64_t count = get_u64(in);
  std::vector<std::size_t> shape(3);
  for (auto& d : shape) {
    const std::uint64_t v = get_u64(in);
    if (v >= kMaxDim) throw std::runtime_error("feature grid dimension out of range");
    d = static_cast<std::size_t>(v);
  }
  if (count >= kMaxDim) throw std::runtime_error("feature grid count out of range");
  std::vector<Tensor> frames;
  for (std::uint64_t i = 0; i < count; ++i) {
    Tensor t(shape);
    for (double& v : t.values()) v = get_f64(in);
    frames.push_back(std::move(t));
  }
  return frames;
}

std::vector<Tensor> load_feature_grids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature grids " + path);
  return load_feature_grids(in);
}

}  // namespace transtrack::toynet
