#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "tokenscreen/config.hpp"

using namespace tokenscreen;
using nlohmann::json;

namespace {

std::string write_tmp(const std::string& text) {
  static int counter = 0;
  auto path = std::filesystem::temp_directory_path() /
              ("ts_config_" + std::to_string(++counter) + ".json");
  std::ofstream out(path);
  out << text;
  return path.string();
}

bool throws_with(const std::string& text, const std::string& needle) {
  try {
    parse_config(json::parse(text));
  } catch (const config_error& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("minimal config fills every default") {
  auto cfg = parse_config(json::parse(R"({"schema_version": 1})"));
  CHECK(cfg.entropy.kind == "quadratic-binary");
  CHECK(cfg.entropy.alpha == 2.0);
  CHECK(cfg.prior == Vec{0.5, 0.5});
  CHECK(cfg.chi == 0.125);
  CHECK(cfg.types.kind == "uniform");
  CHECK(cfg.grids.type_count == 401);
  CHECK(cfg.grids.time_step == 1e-3);
  CHECK(cfg.grids.horizon == -1.0);
  CHECK(cfg.tolerances.eps_cap == 1e-7);
  CHECK(cfg.seed == 1);
  CHECK(cfg.out_dir == ".");

  CHECK(cfg.make_prior()[1] == 0.5);
  CHECK(cfg.make_types().cdf(1.5) == Catch::Approx(0.5).margin(1e-14));
  CHECK(cfg.make_entropy().value(Vec{0.5, 0.5}) == 0.0);
}

TEST_CASE("full config round trips through a file") {
  std::string path = write_tmp(R"({
    "schema_version": 1,
    "entropy": {"kind": "shannon"},
    "prior": [0.25, 0.25, 0.5],
    "chi": 0.4,
    "types": {"kind": "tabulated", "r": [1.0, 1.5, 2.0], "cdf": [0.0, 0.5, 1.0]},
    "grids": {"time_step": 0.002, "type_count": 51, "horizon": 12.0},
    "tolerances": {"eps_iso": 1e-6, "eps_cap": 1e-8, "eps_event": 1e-9, "quadrature": 1e-11},
    "seed": 42,
    "output": {"dir": "artifacts"}
  })");
  auto cfg = load_config(path);
  std::remove(path.c_str());

  CHECK(cfg.entropy.kind == "shannon");
  CHECK(cfg.prior.size() == 3);
  CHECK(cfg.chi == 0.4);
  CHECK(cfg.types.kind == "tabulated");
  CHECK(cfg.types.r.size() == 3);
  CHECK(cfg.grids.time_step == 0.002);
  CHECK(cfg.grids.type_count == 51);
  CHECK(cfg.grids.horizon == 12.0);
  CHECK(cfg.tolerances.quadrature == 1e-11);
  CHECK(cfg.seed == 42);
  CHECK(cfg.out_dir == "artifacts");

  CHECK(cfg.make_types().cdf(1.25) == Catch::Approx(0.25).margin(1e-12));
  CHECK(cfg.make_entropy().value(Vec{0.25, 0.25, 0.5}) < 0.0);
}

TEST_CASE("unknown keys are rejected with their dotted path") {
  CHECK(throws_with(R"({"schema_version": 1, "bogus": 3})", "root.bogus"));
  CHECK(throws_with(R"({"schema_version": 1, "types": {"kind": "uniform", "weird": 1}})",
                    "types.weird"));
  CHECK(throws_with(R"({"schema_version": 1, "grids": {"step": 0.1}})", "grids.step"));
  CHECK(throws_with(R"({"schema_version": 1, "output": {"file": "x"}})", "output.file"));
}

TEST_CASE("schema version is mandatory and pinned") {
  CHECK(throws_with(R"({})", "schema_version"));
  CHECK(throws_with(R"({"schema_version": 2})", "unsupported"));
  CHECK(throws_with(R"({"schema_version": 1.5})", "unsupported"));
}

TEST_CASE("field validation addresses the offending path") {
  CHECK(throws_with(R"({"schema_version": 1, "chi": "lots"})", "root.chi"));
  CHECK(throws_with(R"({"schema_version": 1, "chi": 0.0})", "chi"));
  CHECK(throws_with(R"({"schema_version": 1, "entropy": {"kind": "huffman"}})",
                    "entropy.kind"));
  CHECK(throws_with(R"({"schema_version": 1, "entropy": {"alpha": 1.0}})", "entropy.alpha"));
  CHECK(throws_with(R"({"schema_version": 1, "prior": [0.5]})", "prior"));
  CHECK(throws_with(R"({"schema_version": 1, "prior": [0.7, 0.2]})", "prior"));
  CHECK(throws_with(R"({"schema_version": 1, "prior": [-0.5, 1.5]})", "prior"));
  CHECK(throws_with(R"({"schema_version": 1, "prior": [0.2, 0.3, 0.5]})", "prior"));
  CHECK(throws_with(R"({"schema_version": 1, "types": {"kind": "uniform", "lo": 2.0, "hi": 1.0}})",
                    "types"));
  CHECK(throws_with(R"({"schema_version": 1, "types": {"kind": "tabulated", "r": [1, 2], "cdf": [0]}})",
                    "types"));
  CHECK(throws_with(R"({"schema_version": 1, "grids": {"type_count": 2}})",
                    "grids.type_count"));
  CHECK(throws_with(R"({"schema_version": 1, "grids": {"type_count": 10.5}})",
                    "grids.type_count"));
  CHECK(throws_with(R"({"schema_version": 1, "grids": {"time_step": 0}})",
                    "grids.time_step"));
  CHECK(throws_with(R"({"schema_version": 1, "grids": {"horizon": -2}})", "grids.horizon"));
  CHECK(throws_with(R"({"schema_version": 1, "tolerances": {"eps_cap": 0}})", "tolerances"));
  CHECK(throws_with(R"({"schema_version": 1, "seed": -4})", "seed"));
  CHECK(throws_with(R"({"schema_version": 1, "seed": 1.5})", "seed"));
}

TEST_CASE("malformed json reports a parse error") {
  std::string path = write_tmp("{\"schema_version\": 1,");
  CHECK_THROWS_AS(load_config(path), config_error);
  try {
    load_config(path);
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("parse error") != std::string::npos);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config("/nonexistent/nowhere.json"), config_error);
}

TEST_CASE("shipped example configs load and build their scenarios") {
  // written relative to the build directory by the test harness layout
  for (const char* name : {"leading", "skewed", "shannon"}) {
    auto path = std::filesystem::path("..") / "configs" / (std::string(name) + ".json");
    if (!std::filesystem::exists(path)) continue;  // out-of-tree build layouts
    auto cfg = load_config(path.string());
    CHECK(cfg.schema_version == 1);
    CHECK_NOTHROW(cfg.make_entropy());
    CHECK_NOTHROW(cfg.make_prior());
    CHECK_NOTHROW(cfg.make_types());
  }
}
