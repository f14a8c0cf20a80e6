#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "odgen/core.hpp"

namespace odgen::data {

struct SyntheticCitySpec {
  int n = 30;
  double extent = 10.0;
  // Population ~ round(lognormal(mu, sigma)), at least 1.
  double population_log_mean = 7.5;
  double population_log_sigma = 0.8;
  // POI count of category c in region i ~ Poisson(poi_rate * pop_i / 1000 * lognormal(0, poi_log_sigma)).
  int poi_categories = 4;
  double poi_rate = 2.0;
  double poi_log_sigma = 0.5;
  // Gravity generator and multiplicative log-normal noise.
  double gamma = 2e-3;
  double a = 0.7;
  double b = 0.7;
  double lambda = 1.6;
  double sigma = 0.4;
  // Each cell is zeroed with probability 1 - exp(-d * decay).
  double decay = 0.25;
  // Intra-region distance as a fraction of the distance to the nearest other region.
  double self_distance = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticCitySpec& s);
void from_json(const nlohmann::json& j, SyntheticCitySpec& s);

struct CityData {
  CityCharacteristics city;
  ODMatrix od;
};

// Manifest: population, poi_0 .. poi_{K-1}.
FeatureManifest synthetic_manifest(int poi_categories);

// Distances used by the generator: planar distances off the diagonal, the self distance on it.
Matrix effective_distances(const CityCharacteristics& city, double self_distance);

// Noise-free gravity means gamma m_i^a m_j^b d_eff^-lambda (population as mass).
Matrix synthetic_mean_flows(const CityCharacteristics& city, const SyntheticCitySpec& spec);

CityData make_synthetic_city(const SyntheticCitySpec& spec);

// Regions file: header `id,x,y,<feature names>`, one row per region.
CityCharacteristics load_regions(const std::string& path);
void save_regions(const std::string& path, const CityCharacteristics& city);

// OD file: header `origin,destination,flow`; absent pairs are 0.
ODMatrix load_od(const std::string& path, int n);
void save_od(const std::string& path, const ODMatrix& od);

// Adjacency file: header `origin,destination`, one row per edge.
void save_adjacency(const std::string& path, const AdjacencyMatrix& adj);
AdjacencyMatrix load_adjacency(const std::string& path, int n);

CityData load_city(const std::string& regions_path, const std::string& od_path);
void save_city(const std::string& regions_path, const std::string& od_path, const CityData& data);

}  // namespace odgen::data
