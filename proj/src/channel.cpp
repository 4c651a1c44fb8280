#include "capa/channel.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

namespace capa {

cplx kernel(const Vec3& r, const Vec3& s, double wavelength, double impedance) {
  const double dy = r[1] - s[1];
  const double dist = distance(r, s);
  if (dist == 0.0) {
    throw SingularityError("kernel: source and observation points coincide (R = 0)");
  }
  // Reduce the phase in cycles first; 2 pi R / lambda is large at full scale.
  const double cycles = std::fmod(dist / wavelength, 1.0);
  const double phase = -2.0 * std::numbers::pi * cycles;
  const double projection = 1.0 - dy * dy / (dist * dist);
  const double amplitude = impedance / (2.0 * wavelength * dist) * projection;
  // -j * e^{j phase} = sin(phase) - j cos(phase)
  return {amplitude * std::sin(phase), -amplitude * std::cos(phase)};
}

cplx masked_kernel(int k, const Vec3& r, const Vec3& s, const Scenario& scenario) {
  if (k < 0 || k >= scenario.num_users()) {
    throw std::out_of_range("masked_kernel: user index out of range");
  }
  if (!scenario.users[k].contains(r) || !scenario.bs.contains(s)) return {0.0, 0.0};
  return kernel(r, s, scenario.wavelength, scenario.impedance);
}

ChannelSet build_channel_set(const Scenario& scenario) {
  return build_channel_set(scenario, 10.0 * scenario.wavelength);
}

ChannelSet build_channel_set(const Scenario& scenario, double min_separation) {
  scenario.validate();
  ChannelSet out;
  out.bs_grid = tensor_grid(scenario.bs.center, scenario.bs.lx, scenario.bs.ly,
                            scenario.bs_order);
  out.pi_b = Eigen::Map<const VectorR>(out.bs_grid.combined_weights.data(),
                                       static_cast<Eigen::Index>(out.bs_grid.size()));
  const auto n_t = static_cast<Eigen::Index>(out.bs_grid.size());

  for (int k = 0; k < scenario.num_users(); ++k) {
    const Aperture& ap = scenario.users[k];
    QuadGrid grid = tensor_grid(ap.center, ap.lx, ap.ly, scenario.user_order);
    const auto n_r = static_cast<Eigen::Index>(grid.size());
    MatrixC h(n_r, n_t);
    for (Eigen::Index i = 0; i < n_r; ++i) {
      const Vec3& r = grid.points[i];
      for (Eigen::Index j = 0; j < n_t; ++j) {
        const Vec3& s = out.bs_grid.points[j];
        if (distance(r, s) < min_separation) {
          throw SingularityError("build_channel_set: user " + std::to_string(k) +
                                 " sample lies within the minimum separation of the BS");
        }
        h(i, j) = kernel(r, s, scenario.wavelength, scenario.impedance);
      }
    }
    out.h.push_back(std::move(h));
    out.pi_u.push_back(Eigen::Map<const VectorR>(grid.combined_weights.data(), n_r));
    out.user_grids.push_back(std::move(grid));
  }
  return out;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "channel dump assumes a little-endian host");

constexpr char kMagic[8] = {'C', 'A', 'P', 'A', 'C', 'H', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("read_channel_set: truncated file");
  return value;
}

}  // namespace

void write_channel_set(const ChannelSet& channels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_channel_set: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(channels.num_users()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(channels.num_tx()));
  for (Eigen::Index j = 0; j < channels.num_tx(); ++j) put<double>(out, channels.pi_b(j));
  for (int k = 0; k < channels.num_users(); ++k) {
    const MatrixC& h = channels.h[k];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(h.rows()));
    for (Eigen::Index i = 0; i < h.rows(); ++i) put<double>(out, channels.pi_u[k](i));
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        put<float>(out, static_cast<float>(h(i, j).real()));
        put<float>(out, static_cast<float>(h(i, j).imag()));
      }
    }
  }
  if (!out) throw std::runtime_error("write_channel_set: write failed");
}

ChannelSet read_channel_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_channel_set: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_channel_set: bad magic");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("read_channel_set: unsupported version " +
                             std::to_string(version));
  }
  const auto num_users = get<std::uint32_t>(in);
  const auto n_t = static_cast<Eigen::Index>(get<std::uint32_t>(in));
  ChannelSet out;
  out.pi_b.resize(n_t);
  for (Eigen::Index j = 0; j < n_t; ++j) out.pi_b(j) = get<double>(in);
  for (std::uint32_t k = 0; k < num_users; ++k) {
    const auto n_r = static_cast<Eigen::Index>(get<std::uint32_t>(in));
    VectorR pi_u(n_r);
    for (Eigen::Index i = 0; i < n_r; ++i) pi_u(i) = get<double>(in);
    MatrixC h(n_r, n_t);
    for (Eigen::Index i = 0; i < n_r; ++i) {
      for (Eigen::Index j = 0; j < n_t; ++j) {
        const float re = get<float>(in);
        const float im = get<float>(in);
        h(i, j) = {re, im};
      }
    }
    out.h.push_back(std::move(h));
    out.pi_u.push_back(std::move(pi_u));
  }
  return out;
}

}  // namespace capa
