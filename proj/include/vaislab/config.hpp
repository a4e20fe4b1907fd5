#pragma once

// Experiment configuration: a single JSON document. Every key is optional
// except where a command needs it; unknown keys and wrong types are rejected
// with ConfigError. `resolved_json` echoes the config with all defaults filled in.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vaislab/convergence.hpp"

namespace vaislab {

struct BaseConfig {
  std::string kind = "projective";  // projective | weighted-line
  int dimension = 1;
  std::array<int, 2> weights{1, 2};
};

struct BundleConfig {
  double epsilon = 0.0;
  double log_scale = 0.0;
  std::string perturbation = "mixed";  // mixed | radial
};

struct QuadratureConfig {
  int radial = 64;
  int angular = 128;
};

struct Tolerances {
  double identity = 1e-5;
  double lee_norm_variance = 1e-6;
  double gauduchon = 1e-5;
  double automorphy = 1e-8;
  double transverse = 1e-6;
  double closedness = 1e-5;
  double normalization = 1e-8;
  double resolution = 1e-8;
  double pullback = 1e-10;
  double equivariance = 1e-10;
  double type_II = 1e-8;
};

/// Basic function for type II deformations.
struct BasicFunctionConfig {
  std::string kind = "re-ratio";  // re-ratio: amplitude Re(z_i conj z_j)/|z|^2 | constant: amplitude
  double amplitude = 0.05;
  int i = 1;
  int j = 0;
};

struct DeformConfig {
  std::vector<double> sigma{2.0, 0.5};
  std::optional<double> type_I_a = 2.0;
  std::optional<BasicFunctionConfig> type_II = BasicFunctionConfig{};
};

struct EmbedConfig {
  int k = 2;
  int samples = 100;
};

struct LeeConfig {
  std::vector<double> coords;
  double tol = 1e-4;
  long long max_denominator = 100;
};

struct ExperimentConfig {
  std::string experiment = "experiment";
  BaseConfig base;
  BundleConfig bundle;
  ContractionSpec contraction;
  GridSpec grid;
  QuadratureConfig quadrature;
  std::vector<int> k_list;
  int m_max = 2;
  Tolerances tolerances;
  ConvergenceCriteria criteria;
  bool resolution_check = true;
  DeformConfig deform;
  EmbedConfig embed;
  LeeConfig lee;
  bool export_gram = false;
  std::string output_dir = "out";
  std::uint64_t seed = 1;

  HermitianBundle make_bundle() const;
  StudyOptions study_options() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

nlohmann::json resolved_json(const ExperimentConfig& c);
/// FNV-1a 64 of the compact resolved JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace vaislab
