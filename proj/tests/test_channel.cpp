#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "capa/channel.hpp"
#include "doctest.h"

using namespace capa;

namespace {

constexpr double kEta = 120.0 * std::numbers::pi;

Vec3 random_point(std::mt19937_64& rng, double span, double z0) {
  std::uniform_real_distribution<double> u(-span, span);
  return {u(rng), u(rng), z0 + u(rng)};
}

}  // namespace

TEST_CASE("kernel: boresight spot value") {
  const cplx h = kernel({0.0, 0.0, 25.0}, {0.0, 0.0, 0.0}, 0.125, kEta);
  // eta / (2 lambda R) = 120 pi / 6.25 = 19.2 pi, phase exp(-j 400 pi) = 1
  const cplx want{0.0, -60.31857895};
  CHECK(std::abs(h - want) / std::abs(want) < 1e-9);
  CHECK(std::abs(h.imag() + 19.2 * std::numbers::pi) < 1e-9 * 60.0);
}

TEST_CASE("kernel: symmetry and magnitude") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Vec3 r = random_point(rng, 2.0, 5.0);
    const Vec3 s = random_point(rng, 2.0, 0.0);
    const cplx a = kernel(r, s, 0.125, kEta);
    const cplx b = kernel(s, r, 0.125, kEta);
    CHECK(std::abs(a - b) <= 1e-14 * std::abs(a));
    const double R = distance(r, s);
    const double dy = r[1] - s[1];
    const double mag = kEta / (2.0 * 0.125 * R) * std::abs(1.0 - dy * dy / (R * R));
    CHECK(std::abs(std::abs(a) - mag) <= 1e-12 * mag);
  }
}

TEST_CASE("kernel: polarization null and singularity") {
  CHECK(std::abs(kernel({0.0, 3.0, 0.0}, {0.0, 0.0, 0.0}, 0.125, kEta)) < 1e-15);
  CHECK_THROWS_AS(kernel({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, 0.125, kEta), SingularityError);
}

TEST_CASE("kernel: far-field halving at boresight") {
  for (double z : {5.0, 25.0, 101.3}) {
    const double a = std::abs(kernel({0, 0, z}, {0, 0, 0}, 0.125, kEta));
    const double b = std::abs(kernel({0, 0, 2 * z}, {0, 0, 0}, 0.125, kEta));
    CHECK(std::abs(b / a - 0.5) < 1e-9);
  }
}

TEST_CASE("masked_kernel") {
  const Scenario s = desk_scenario(1);
  const Vec3 r = s.users[1].center;
  const Vec3 b = s.bs.center;
  CHECK(masked_kernel(1, r, b, s) == kernel(r, b, s.wavelength, s.impedance));
  CHECK(masked_kernel(1, {r[0] + 0.1, r[1], r[2]}, b, s) == cplx{0.0, 0.0});
  CHECK(masked_kernel(1, r, {0.3, 0.0, 0.0}, s) == cplx{0.0, 0.0});
  CHECK(masked_kernel(0, r, b, s) == cplx{0.0, 0.0});
}

TEST_CASE("build_channel_set: single node") {
  Scenario s = desk_scenario(2);
  s.users.resize(1);
  s.bs_order = 1;
  s.user_order = 1;
  const ChannelSet ch = build_channel_set(s);
  REQUIRE(ch.h[0].rows() == 1);
  REQUIRE(ch.h[0].cols() == 1);
  CHECK(ch.h[0](0, 0) == kernel(s.users[0].center, s.bs.center, s.wavelength, s.impedance));
  CHECK(ch.pi_b(0) == doctest::Approx(s.bs.area()));
}

TEST_CASE("build_channel_set: weights and entries") {
  Scenario s = desk_scenario(1);
  s.bs.lx = s.bs.ly = 2.0;
  s.user_order = 6;
  const ChannelSet ch = build_channel_set(s);
  CHECK(std::abs(ch.pi_b.sum() - 4.0) < 4e-10);
  for (int k = 0; k < s.num_users(); ++k) {
    CHECK(std::abs(ch.pi_u[k].sum() - s.users[k].area()) < 1e-10 * s.users[k].area());
    CHECK(ch.h[k].rows() == 36);
    CHECK(ch.h[k].cols() == 100);
    CHECK(ch.h[k].allFinite());
    CHECK(ch.h[k](7, 42) ==
          kernel(ch.user_grids[k].points[7], ch.bs_grid.points[42], s.wavelength, s.impedance));
    for (std::size_t i = 0; i < ch.user_grids[k].size(); ++i) {
      CHECK(ch.pi_u[k](static_cast<Eigen::Index>(i)) == ch.user_grids[k].combined_weights[i]);
    }
  }
}

TEST_CASE("build_channel_set: energy matches a scalar double loop") {
  const Scenario s = desk_scenario(3);
  const ChannelSet ch = build_channel_set(s);
  for (int k = 0; k < s.num_users(); ++k) {
    const double matrix_form =
        (ch.pi_u[k].transpose() * ch.h[k].cwiseAbs2() * ch.pi_b).value();
    // independent path: integrate |h|^2 over s for each r, then over r
    const QuadGrid gb = tensor_grid(s.bs.center, s.bs.lx, s.bs.ly, s.bs_order);
    const QuadGrid gu =
        tensor_grid(s.users[k].center, s.users[k].lx, s.users[k].ly, s.user_order);
    std::vector<cplx> outer(gu.size());
    for (std::size_t i = 0; i < gu.size(); ++i) {
      std::vector<cplx> inner(gb.size());
      for (std::size_t j = 0; j < gb.size(); ++j) {
        inner[j] = std::norm(kernel(gu.points[i], gb.points[j], s.wavelength, s.impedance));
      }
      outer[i] = integrate(gb, inner);
    }
    const double loop_form = integrate(gu, outer).real();
    CHECK(std::abs(matrix_form - loop_form) < 1e-12 * loop_form);
  }
}

TEST_CASE("build_channel_set: separation guard") {
  Scenario s = desk_scenario(1);
  s.users[0].center = {0.0, 0.0, 0.5};
  CHECK_THROWS_AS(build_channel_set(s), SingularityError);
  CHECK_NOTHROW(build_channel_set(s, 0.1));
}

TEST_CASE("build_channel_set: deterministic") {
  const Scenario s = desk_scenario(4);
  const ChannelSet a = build_channel_set(s);
  const ChannelSet b = build_channel_set(s);
  for (int k = 0; k < s.num_users(); ++k) CHECK(a.h[k] == b.h[k]);
  CHECK(a.pi_b == b.pi_b);
}

TEST_CASE("channel dump round trip") {
  const Scenario s = desk_scenario(1);
  const ChannelSet ch = build_channel_set(s);
  const auto path = std::filesystem::temp_directory_path() / "capa_channel_test.bin";
  write_channel_set(ch, path);
  const ChannelSet back = read_channel_set(path);
  REQUIRE(back.num_users() == ch.num_users());
  CHECK(back.pi_b == ch.pi_b);
  for (int k = 0; k < ch.num_users(); ++k) {
    CHECK(back.pi_u[k] == ch.pi_u[k]);
    const double scale = ch.h[k].cwiseAbs().maxCoeff();
    CHECK((back.h[k] - ch.h[k]).cwiseAbs().maxCoeff() < 1e-6 * scale);
  }
  std::filesystem::remove(path);

  const auto bad = std::filesystem::temp_directory_path() / "capa_channel_bad.bin";
  {
    std::ofstream(bad, std::ios::binary) << "NOTACHANNEL";
  }
  CHECK_THROWS(read_channel_set(bad));
  std::filesystem::remove(bad);
}
