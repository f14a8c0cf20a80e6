#pragma once

#include <random>
#include <vector>

#include "odgen/core.hpp"
#include "odgen/data.hpp"
#include "odgen/denoiser.hpp"

namespace testing_helpers {

inline odgen::DenoiserConfig small_config(odgen::DenoiserMode mode) {
  odgen::DenoiserConfig c;
  c.mode = mode;
  c.layers = 2;
  c.channels = 8;
  c.heads = 2;
  c.time_dim = 8;
  c.cond_hidden = 8;
  c.cond_layers = 2;
  c.gat_layers = 1;
  c.knn = 3;
  c.ffn_multiplier = 2;
  return c;
}

inline odgen::data::CityData small_city(int n, std::uint64_t seed) {
  odgen::data::SyntheticCitySpec spec;
  spec.n = n;
  spec.seed = seed;
  return odgen::data::make_synthetic_city(spec);
}

inline odgen::Denoiser small_model(odgen::DenoiserMode mode, const odgen::CityCharacteristics& city,
                                   std::uint64_t seed = 7) {
  return odgen::Denoiser(small_config(mode), city.manifest(), odgen::InputScaler::fit({&city}), seed);
}

inline odgen::ag::Tensor random_tensor(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  odgen::ag::Tensor t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = n(rng);
  return t;
}

}  // namespace testing_helpers
