#include "dgpmp/learn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

namespace dgpmp::learn {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'P', 'M', 'P', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& os, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, sizeof(U));
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  is.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(U)))
    throw InvalidArgument("truncated checkpoint");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_string(std::ostream& os, const std::string& s) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto len = get_le<std::uint32_t>(is);
  if (len > (1u << 26)) throw InvalidArgument("implausible string length in checkpoint");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (is.gcount() != static_cast<std::streamsize>(len)) throw InvalidArgument("truncated checkpoint");
  return s;
}

void put_tensors(std::ostream& os, const std::vector<Tensor>& ts) {
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    put_string(os, t.name);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_le<std::int32_t>(os, d);
    put_le<std::uint64_t>(os, t.data.size());
    for (double v : t.data) put_le<double>(os, v);
  }
}

std::vector<Tensor> get_tensors(std::istream& is) {
  const auto count = get_le<std::uint32_t>(is);
  std::vector<Tensor> ts;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name = get_string(is);
    const auto ndim = get_le<std::uint32_t>(is);
    if (ndim > 8) throw InvalidArgument("implausible tensor rank in checkpoint");
    std::uint64_t vol = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      t.shape.push_back(get_le<std::int32_t>(is));
      if (t.shape.back() < 0) throw InvalidArgument("negative tensor dimension");
      vol *= static_cast<std::uint64_t>(t.shape.back());
    }
    const auto n = get_le<std::uint64_t>(is);
    if (n != vol) throw InvalidArgument("tensor '" + t.name + "' size does not match its shape");
    t.data.resize(n);
    for (auto& v : t.data) v = get_le<double>(is);
    ts.push_back(std::move(t));
  }
  return ts;
}

}  // namespace

nlohmann::json to_json(const NetworkSpec& s) {
  return {{"image_size", s.image_size},
          {"n_states", s.n_states},
          {"conv_filters", s.conv_filters},
          {"fc_hidden", s.fc_hidden},
          {"conv_stride", s.conv_stride},
          {"normalization", s.normalization},
          {"dropout", s.dropout},
          {"traj_scale", s.traj_scale},
          {"sdf_scale", s.sdf_scale},
          {"log_sigma_min", s.log_sigma_min},
          {"log_sigma_max", s.log_sigma_max},
          {"output_bias_init", s.output_bias_init}};
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  NetworkSpec s;
  s.image_size = j.value("image_size", s.image_size);
  s.n_states = j.value("n_states", s.n_states);
  s.conv_filters = j.value("conv_filters", s.conv_filters);
  s.fc_hidden = j.value("fc_hidden", s.fc_hidden);
  s.conv_stride = j.value("conv_stride", s.conv_stride);
  s.normalization = j.value("normalization", s.normalization);
  s.dropout = j.value("dropout", s.dropout);
  s.traj_scale = j.value("traj_scale", s.traj_scale);
  s.sdf_scale = j.value("sdf_scale", s.sdf_scale);
  s.log_sigma_min = j.value("log_sigma_min", s.log_sigma_min);
  s.log_sigma_max = j.value("log_sigma_max", s.log_sigma_max);
  s.output_bias_init = j.value("output_bias_init", s.output_bias_init);
  s.validate();
  return s;
}

void write_checkpoint(std::ostream& os, const Network& net) {
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, kVersion);
  put_string(os, to_json(net.spec()).dump());
  put_tensors(os, net.params());
  put_tensors(os, net.buffers());
}

Network read_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || !std::equal(magic, magic + 8, kMagic))
    throw InvalidArgument("not a network checkpoint");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kVersion)
    throw InvalidArgument("unsupported checkpoint version " + std::to_string(version));
  NetworkSpec spec = network_spec_from_json(nlohmann::json::parse(get_string(is)));
  auto params = get_tensors(is);
  auto buffers = get_tensors(is);
  return Network(std::move(spec), std::move(params), std::move(buffers));
}

void save_checkpoint(const std::string& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, net);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace dgpmp::learn
