#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hyssra/errors.hpp"
#include "hyssra/neural_core/dense_net.hpp"

namespace hyssra::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr std::array<char, 4> kCheckpointMagic{'H', 'S', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void write_raw(std::ostream& out, T value) {
  const auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  out.write(bytes.data(), bytes.size());
}

template <class T>
T read_raw(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  in.read(bytes.data(), bytes.size());
  if (!in) throw InputError("checkpoint: truncated stream");
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

/// Layout (little-endian): magic "HSNN", u32 version, u32 L, u32 widths[L+1],
/// u8 activations[L], u64 P, f64 params[P].
inline void write_net(std::ostream& out, const DenseNet& net) {
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_raw<std::uint32_t>(out, kCheckpointVersion);
  detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_count()));
  for (int w : net.widths()) detail::write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  for (Activation a : net.activations()) detail::write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(a));
  detail::write_raw<std::uint64_t>(out, net.parameter_count());
  for (double p : net.parameters()) detail::write_raw<double>(out, p);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

inline DenseNet read_net(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw InputError("checkpoint: bad magic");
  const auto version = detail::read_raw<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto layers = detail::read_raw<std::uint32_t>(in);
  if (layers == 0 || layers > 1024) throw InputError("checkpoint: implausible layer count");
  std::vector<int> widths(layers + 1);
  for (auto& w : widths) w = static_cast<int>(detail::read_raw<std::uint32_t>(in));
  std::vector<Activation> acts(layers);
  for (auto& a : acts) {
    const auto tag = detail::read_raw<std::uint8_t>(in);
    if (tag > static_cast<std::uint8_t>(Activation::kTanh)) throw InputError("checkpoint: unknown activation tag");
    a = static_cast<Activation>(tag);
  }
  DenseNet net(std::move(widths), std::move(acts));
  const auto count = detail::read_raw<std::uint64_t>(in);
  if (count != net.parameter_count()) throw InputError("checkpoint: parameter count does not match widths");
  for (double& p : net.parameters()) p = detail::read_raw<double>(in);
  return net;
}

inline void save_net(const std::filesystem::path& path, const DenseNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  write_net(out, net);
}

inline DenseNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open " + path.string());
  return read_net(in);
}

}  // namespace hyssra::nn
