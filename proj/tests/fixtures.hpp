#pragma once

#include <random>
#include <string>

#include "clairaut/clairaut.hpp"

namespace fixtures {

inline std::string model_path(const std::string& name) { return std::string(MODELS_DIR) + "/" + name + ".lag"; }

inline clairaut::LagrangianModel load(const std::string& name) { return clairaut::load_model(model_path(name)); }

/// Model, split from the default probes, and the transform built on them.
struct Built {
  clairaut::LagrangianModel model;
  clairaut::VariableSplit split;
  clairaut::ClairautTransform ct;

  explicit Built(clairaut::LagrangianModel m)
      : model(m), split(clairaut::split_variables(m, clairaut::generate_probes(m))), ct(model, split) {}
};

inline Built build(const std::string& name) { return Built(load(name)); }
inline Built build_text(const std::string& text) { return Built(clairaut::parse_model(text)); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace fixtures
