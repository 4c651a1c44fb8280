#include <cmath>
#include <filesystem>
#include <fstream>

#include "capa/scenario.hpp"
#include "capa/scenario_io.hpp"
#include "doctest.h"

using namespace capa;

TEST_CASE("local_to_global") {
  Vec3 ro{1.0, 2.0, 20.0};
  CHECK(local_to_global({0.0, 0.0, 0.0}, ro) == ro);
  auto g = local_to_global({0.1, -0.1, 0.0}, ro);
  CHECK(g[0] == doctest::Approx(1.1));
  CHECK(g[1] == doctest::Approx(1.9));
  CHECK(g[2] == 20.0);
  for (int a = 0; a < 3; ++a) CHECK(g[a] - ro[a] == doctest::Approx(std::array{0.1, -0.1, 0.0}[a]));
}

TEST_CASE("place_users: bounds and determinism") {
  auto a = place_users(3, 5.0, 20.0, 30.0, 11);
  auto b = place_users(3, 5.0, 20.0, 30.0, 11);
  CHECK(a == b);
  REQUIRE(a.size() == 3);
  for (const auto& p : a) {
    CHECK(std::abs(p[0]) < 5.0);
    CHECK(std::abs(p[1]) < 5.0);
    CHECK(p[2] >= 20.0);
    CHECK(p[2] < 30.0);
  }
  CHECK(place_users(3, 5.0, 20.0, 30.0, 12) != a);
  for (const auto& p : place_users(4, 1.0, 25.0, 25.0, 3)) CHECK(p[2] == 25.0);
}

TEST_CASE("stream_count") {
  CHECK(stream_count(2.0, 2.0, 2.0, 2.0, 0.125) == 1089);
  CHECK(stream_count(2.0, 2.0, 0.5, 0.5, 0.125) == 81);
  CHECK(stream_count(0.125, 0.125, 0.125, 0.125, 0.125) == 9);
  // monotone in each side
  int prev = 0;
  for (double l = 0.05; l < 1.0; l += 0.05) {
    const int d = stream_count(2.0, 2.0, l, 0.5, 0.125);
    CHECK(d >= prev);
    prev = d;
  }
}

TEST_CASE("user_quadrature_order") {
  CHECK(user_quadrature_order(10, 2.0, 0.5) == 40);
  CHECK(user_quadrature_order(6, 0.5, 0.125) == 24);
  CHECK(user_quadrature_order(7, 1.0, 1.0) == 7);
}

TEST_CASE("desk scenario defaults") {
  auto s = desk_scenario(1);
  CHECK(s.num_users() == 3);
  CHECK(s.bs.lx == 0.5);
  CHECK(s.users[0].lx == 0.125);
  CHECK(s.wavelength == 0.125);
  CHECK(s.streams == 2);
  CHECK(s.bs_order == 10);
  CHECK(s.user_order == 10);
  CHECK(s.budget == 1000.0);
  CHECK(s.noise_variance == 5.6e-3);
  for (const auto& u : s.users) {
    CHECK(std::abs(u.center[0]) < 1.0);
    CHECK(u.center[2] > 2.0);
    CHECK(u.center[2] < 3.0);
  }
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("validate names the field") {
  auto s = desk_scenario(1);
  s.noise_variance = 0.0;
  try {
    s.validate();
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("noise_variance") != std::string::npos);
  }
  s = desk_scenario(1);
  s.users.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = desk_scenario(1);
  s.users[1].center[2] = -1.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("json round trip") {
  auto s = desk_scenario(5);
  s.budget = 123.456789;
  s.impedance = 376.730313668;
  auto back = scenario_from_json(scenario_to_json(s));
  CHECK(back == s);

  auto dir = std::filesystem::temp_directory_path() / "capa_scenario_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "s.json";
  write_scenario(s, path);
  CHECK(read_scenario(path) == s);
}

TEST_CASE("json placement and defaults") {
  auto j = nlohmann::json::parse(R"({
    "bs": {"center": [0, 0, 0], "lx": 2.0, "ly": 2.0},
    "placement": {"count": 3, "xy_half_range": 5, "z_min": 20, "z_max": 30,
                  "lx": 0.5, "ly": 0.5},
    "seed": 4
  })");
  auto s = scenario_from_json(j);
  CHECK(s.num_users() == 3);
  CHECK(s.streams == 81);
  CHECK(s.user_order == 40);
  auto centers = place_users(3, 5.0, 20.0, 30.0, 4);
  for (int k = 0; k < 3; ++k) CHECK(s.users[k].center == centers[k]);
}

TEST_CASE("json errors") {
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(R"({"wavelength": 0.1})")),
                  ConfigError);
  CHECK_THROWS_AS(scenario_from_json(nlohmann::json::parse(
                      R"({"users": [{"center": [0,0,2], "lx": 0.1, "ly": 0.1}],
                          "budget": "lots"})")),
                  ConfigError);
  CHECK_THROWS_AS(read_scenario("/nonexistent/capa.json"), ConfigError);

  auto dir = std::filesystem::temp_directory_path() / "capa_scenario_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "broken.json";
  std::ofstream(path) << "{\n  \"budget\": 10,\n  oops\n}\n";
  try {
    read_scenario(path);
    FAIL("expected throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
