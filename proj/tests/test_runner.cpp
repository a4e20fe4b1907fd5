#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vaislab/runner.hpp"

using namespace vaislab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vaislab_test_runner_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run(const std::string& command, const std::string& config, const fs::path& out) {
  RunOptions o;
  o.out_dir = out.string();
  std::ostringstream log;
  return run_command(command, parse_config_text(config), o, log);
}

const char* kCoarse = R"("grid": {"radial": 9, "angular": 12, "residual_radial": 3, "residual_angular": 4})";

}  // namespace

TEST_CASE("config defaults and echo") {
  const auto c = parse_config_text("{}");
  CHECK(c.base.kind == "projective");
  CHECK(c.contraction.q == 0.5);
  CHECK(c.k_list.empty());
  CHECK(c.m_max == 2);
  // the echo parses back to the same config
  const auto again = parse_config(resolved_json(c));
  CHECK(config_hash(again) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  CHECK(config_hash(parse_config_text(R"({"seed": 2})")) != config_hash(c));

  const auto w = parse_config_text(R"({"base": {"kind": "weighted-line", "weights": [1, 2]}, "k_list": [2, 4]})");
  CHECK(config_hash(parse_config(resolved_json(w))) == config_hash(w));
  CHECK(w.make_bundle().atlas().is_orbifold());
}

TEST_CASE("config schema violations") {
  const char* bad[] = {
      "[1, 2]",
      "{not json",
      R"({"bundel": {}})",
      R"({"bundle": {"eps": 0.1}})",
      R"({"bundle": {"epsilon": "0.1"}})",
      R"({"k_list": []})",
      R"({"k_list": [5, 5]})",
      R"({"k_list": [0]})",
      R"({"m_max": 3})",
      R"({"contraction": {"q": 1.5}})",
      R"({"tolerances": {"identity": 0}})",
      R"({"base": {"kind": "weighted-line", "weights": [2, 4]}})",
      R"({"base": {"kind": "sphere"}})",
      R"({"criteria": {"window": [40, 5]}})",
      R"({"deform": {"sigma": [-1]}})",
      R"({"deform": {"type_II": {"kind": "re-ratio", "f": 1}}})",
      R"({"grid": {"exclusion_radius": 1.0}})",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }
  try {
    parse_config_text(R"({"grid": {"radial": 9, "angualr": 4}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("grid.angualr") != std::string::npos);
  }
}

TEST_CASE("exit codes") {
  const fs::path out = scratch("exit");
  CHECK(run("converge", "{}", out).exit_code == kExitConfig);  // missing k list
  CHECK(run("frobnicate", "{}", out).exit_code == kExitConfig);
  CHECK(run("converge", R"({"base": {"kind": "weighted-line", "weights": [1, 2]}, "k_list": [3]})", out).exit_code ==
        kExitConfig);
  CHECK(run("lee-approx", "{}", out).exit_code == kExitConfig);

  const auto r = run("embed", R"({"base": {"kind": "weighted-line", "weights": [1, 2]}, "embed": {"k": 1}})", out);
  CHECK(r.exit_code == kExitNumerical);
  CHECK(r.message.find("base-point") != std::string::npos);

  const auto bad = run("verify", R"({"bundle": {"epsilon": 5.0}})", out);
  CHECK(bad.exit_code == kExitNumerical);

  RunOptions o;
  std::ostringstream log;
  CHECK(run_command_file("verify", (out / "missing.json").string(), o, log).exit_code == kExitConfig);
  fs::remove_all(out);
}

TEST_CASE("lee-approx table") {
  const fs::path out = scratch("lee");
  const auto r = run("lee-approx", R"({"lee": {"coords": [1.4142135623730951], "tol": 1e-4, "max_denominator": 100}})",
                     out);
  CHECK(r.exit_code == kExitPass);
  const std::string csv = slurp(out / "lee.csv");
  CHECK(csv.rfind("step,denominator,numerators,a,alpha,error\n", 0) == 0);
  CHECK(csv.find("\n5,70,99,") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "lee.json"));
  CHECK(j["config_hash"] == config_hash(parse_config(j["config"])));
  CHECK(j["sequence"].back()["denominator"] == 70);
  fs::remove_all(out);
}

TEST_CASE("verify and deform report residual records") {
  const fs::path out = scratch("verify");
  const std::string cfg = std::string("{") + kCoarse + "}";
  CHECK(run("verify", cfg, out).exit_code == kExitPass);
  const auto j = nlohmann::json::parse(slurp(out / "verify.json"));
  for (const auto& rec : j["residuals"]) {
    CHECK(rec.contains("check"));
    CHECK(rec.contains("grid"));
    CHECK(rec["value"].get<double>() <= rec["tolerance"].get<double>());
    CHECK(rec["pass"] == true);
  }
  CHECK(run("deform", cfg, out).exit_code == kExitPass);
  const auto d = nlohmann::json::parse(slurp(out / "deform.json"));
  CHECK(d["deformations"].size() == 4);  // two homotheties, type I, type II
  fs::remove_all(out);
}

TEST_CASE("embed report") {
  const fs::path out = scratch("embed");
  const auto r = run("embed", std::string(R"({"bundle": {"epsilon": 0.1}, "embed": {"k": 3}, )") + kCoarse + "}", out);
  CHECK(r.exit_code == kExitPass);
  const auto j = nlohmann::json::parse(slurp(out / "embed.json"));
  for (const char* key : {"k", "N_k", "weights", "injective", "immersive", "pullback_identity_residual",
                          "equivariance_residual"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["N_k"] == 3);
  fs::remove_all(out);
}

TEST_CASE("property: reruns overwrite byte-identical artifacts") {
  const std::string cfg = std::string(R"({"bundle": {"epsilon": 0.1}, "k_list": [5, 10], "quadrature": {"radial": 32, "angular": 64}, )") +
                          kCoarse + "}";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  CHECK(run("converge", cfg, a).exit_code == kExitPass);
  CHECK(run("converge", cfg, b).exit_code == kExitPass);
  const std::string csv_a = slurp(a / "converge.csv");
  CHECK(csv_a == slurp(b / "converge.csv"));
  // rerun into the same directory (the JSON echo includes the output directory)
  const std::string json_a = slurp(a / "converge.json");
  CHECK(run("converge", cfg, a).exit_code == kExitPass);
  CHECK(slurp(a / "converge.csv") == csv_a);
  CHECK(slurp(a / "converge.json") == json_a);
  // more threads do not change the numbers
  RunOptions o;
  o.out_dir = b.string();
  o.jobs = 3;
  std::ostringstream log;
  CHECK(run_command("converge", parse_config_text(cfg), o, log).exit_code == kExitPass);
  CHECK(slurp(b / "converge.csv") == csv_a);
  fs::remove_all(a);
  fs::remove_all(b);
}
