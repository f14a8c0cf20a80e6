#include "odgen/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "odgen/errors.hpp"

namespace odgen::data {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string where(const std::string& path, int line) { return path + ":" + std::to_string(line) + ": "; }

double parse_double(const std::string& s, const std::string& path, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    throw ValidationError(where(path, line) + "malformed number '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ValidationError(where(path, line) + "malformed number '" + s + "'");
  return v;
}

int parse_id(const std::string& s, const std::string& path, int line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::logic_error&) {
    throw ValidationError(where(path, line) + "malformed id '" + s + "'");
  }
  if (used != s.size() || v < 0 || v > std::numeric_limits<int>::max())
    throw ValidationError(where(path, line) + "malformed id '" + s + "'");
  return static_cast<int>(v);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  return out;
}

// Reads `origin,destination[,value]` rows into an N x N matrix, rejecting duplicates and unknown ids.
Matrix read_pairs(const std::string& path, int n, const std::vector<std::string>& header, bool with_value) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || split(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw ValidationError(where(path, 1) + "expected header '" + want + "'");
  }
  Matrix m = Matrix::Zero(n, n);
  std::set<std::pair<int, int>> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw ValidationError(where(path, lineno) + "expected " + std::to_string(header.size()) + " fields");
    const int o = parse_id(cells[0], path, lineno);
    const int d = parse_id(cells[1], path, lineno);
    if (o >= n || d >= n) throw ValidationError(where(path, lineno) + "unknown region id");
    if (!seen.emplace(o, d).second) throw ValidationError(where(path, lineno) + "duplicate origin-destination pair");
    double v = 1.0;
    if (with_value) {
      v = parse_double(cells[2], path, lineno);
      if (v < 0.0) throw ValidationError(where(path, lineno) + "negative flow");
    }
    m(o, d) = v;
  }
  return m;
}

}  // namespace

void SyntheticCitySpec::validate() const {
  if (n < 2) throw ValidationError("synthetic city needs N >= 2 regions (got " + std::to_string(n) + ")");
  if (!(extent > 0.0)) throw ValidationError("extent must be positive");
  if (!(population_log_sigma >= 0.0) || !std::isfinite(population_log_mean))
    throw ValidationError("invalid population parameters");
  if (poi_categories < 0) throw ValidationError("poi_categories must be non-negative");
  if (!(poi_rate > 0.0) || !(poi_log_sigma >= 0.0)) throw ValidationError("invalid POI parameters");
  if (!(gamma > 0.0) || !std::isfinite(a) || !std::isfinite(b) || !(lambda >= 0.0))
    throw ValidationError("invalid gravity parameters");
  if (!(sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  if (!(decay >= 0.0)) throw ValidationError("decay must be non-negative");
  if (!(self_distance > 0.0)) throw ValidationError("self_distance must be positive");
}

void to_json(nlohmann::json& j, const SyntheticCitySpec& s) {
  j = nlohmann::json{{"n", s.n},
                     {"extent", s.extent},
                     {"population_log_mean", s.population_log_mean},
                     {"population_log_sigma", s.population_log_sigma},
                     {"poi_categories", s.poi_categories},
                     {"poi_rate", s.poi_rate},
                     {"poi_log_sigma", s.poi_log_sigma},
                     {"gamma", s.gamma},
                     {"a", s.a},
                     {"b", s.b},
                     {"lambda", s.lambda},
                     {"sigma", s.sigma},
                     {"decay", s.decay},
                     {"self_distance", s.self_distance},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticCitySpec& s) {
  if (!j.is_object()) throw ValidationError("synthetic city spec must be an object");
  s.n = j.value("n", s.n);
  s.extent = j.value("extent", s.extent);
  s.population_log_mean = j.value("population_log_mean", s.population_log_mean);
  s.population_log_sigma = j.value("population_log_sigma", s.population_log_sigma);
  s.poi_categories = j.value("poi_categories", s.poi_categories);
  s.poi_rate = j.value("poi_rate", s.poi_rate);
  s.poi_log_sigma = j.value("poi_log_sigma", s.poi_log_sigma);
  s.gamma = j.value("gamma", s.gamma);
  s.a = j.value("a", s.a);
  s.b = j.value("b", s.b);
  s.lambda = j.value("lambda", s.lambda);
  s.sigma = j.value("sigma", s.sigma);
  s.decay = j.value("decay", s.decay);
  s.self_distance = j.value("self_distance", s.self_distance);
  s.seed = j.value("seed", s.seed);
  s.validate();
}

FeatureManifest synthetic_manifest(int poi_categories) {
  FeatureManifest m{"population"};
  for (int c = 0; c < poi_categories; ++c) m.push_back("poi_" + std::to_string(c));
  return m;
}

Matrix effective_distances(const CityCharacteristics& city, double self_distance) {
  Matrix d = city.distances();
  const int n = city.size();
  const double extent = d.maxCoeff();
  for (int i = 0; i < n; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (j != i && d(i, j) > 0.0) nearest = std::min(nearest, d(i, j));
    if (!std::isfinite(nearest)) nearest = extent > 0.0 ? extent : 1.0;
    d(i, i) = std::max(self_distance * nearest, 1e-3 * (extent > 0.0 ? extent : 1.0));
  }
  // Coincident distinct regions get the same floor as the diagonal.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && d(i, j) <= 0.0) d(i, j) = d(i, i);
  return d;
}

Matrix synthetic_mean_flows(const CityCharacteristics& city, const SyntheticCitySpec& spec) {
  const Matrix d = effective_distances(city, spec.self_distance);
  const Vector m = city.feature_matrix().col(city.feature_index("population"));
  const int n = city.size();
  Matrix mean(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mean(i, j) = spec.gamma * std::pow(m(i), spec.a) * std::pow(m(j), spec.b) * std::pow(d(i, j), -spec.lambda);
  return mean;
}

CityData make_synthetic_city(const SyntheticCitySpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coord(0.0, spec.extent);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = spec.n;
  std::vector<Region> regions(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Region& r = regions[static_cast<std::size_t>(i)];
    r.id = i;
    r.centroid.x = coord(rng);
    r.centroid.y = coord(rng);
  }
  for (Region& r : regions) {
    const double pop = std::round(std::exp(spec.population_log_mean + spec.population_log_sigma * normal(rng)));
    r.features.push_back(std::max(1.0, pop));
  }
  for (Region& r : regions) {
    for (int c = 0; c < spec.poi_categories; ++c) {
      const double rate = spec.poi_rate * r.features[0] / 1000.0 * std::exp(spec.poi_log_sigma * normal(rng));
      std::poisson_distribution<long long> poisson(rate);
      r.features.push_back(static_cast<double>(poisson(rng)));
    }
  }
  CityCharacteristics city(std::move(regions), synthetic_manifest(spec.poi_categories));

  const Matrix mean = synthetic_mean_flows(city, spec);
  const Matrix d = effective_distances(city, spec.self_distance);
  Matrix f(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) f(i, j) = std::round(mean(i, j) * std::exp(spec.sigma * normal(rng)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!(unit(rng) < std::exp(-d(i, j) * spec.decay))) f(i, j) = 0.0;
  if (!f.allFinite()) throw NumericalError("synthetic flows overflowed");
  return {std::move(city), ODMatrix(std::move(f))};
}

CityCharacteristics load_regions(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(where(path, 1) + "missing header");
  const std::vector<std::string> header = split(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "x" || header[2] != "y")
    throw ValidationError(where(path, 1) + "header must start with 'id,x,y'");
  FeatureManifest manifest(header.begin() + 3, header.end());
  for (const std::string& name : manifest)
    if (name.empty()) throw ValidationError(where(path, 1) + "empty feature name");
  if (std::set<std::string>(manifest.begin(), manifest.end()).size() != manifest.size())
    throw ValidationError(where(path, 1) + "duplicate feature name");

  std::vector<Region> regions;
  std::set<int> ids;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != header.size())
      throw ValidationError(where(path, lineno) + "expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(cells.size()));
    Region r;
    r.id = parse_id(cells[0], path, lineno);
    if (!ids.insert(r.id).second) throw ValidationError(where(path, lineno) + "duplicate region id");
    r.centroid.x = parse_double(cells[1], path, lineno);
    r.centroid.y = parse_double(cells[2], path, lineno);
    for (std::size_t k = 3; k < cells.size(); ++k) r.features.push_back(parse_double(cells[k], path, lineno));
    regions.push_back(std::move(r));
  }
  if (regions.size() < 2) throw ValidationError(path + ": a city needs at least 2 regions");
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) { return a.id < b.id; });
  for (std::size_t k = 0; k < regions.size(); ++k)
    if (regions[k].id != static_cast<int>(k))
      throw ValidationError(path + ": region ids must be contiguous from 0 (missing " + std::to_string(k) + ")");
  return CityCharacteristics(std::move(regions), std::move(manifest));
}

void save_regions(const std::string& path, const CityCharacteristics& city) {
  std::ofstream out = open_out(path);
  out << "id,x,y";
  for (const std::string& name : city.manifest()) out << ',' << name;
  out << '\n';
  for (const Region& r : city.regions()) {
    out << r.id << ',' << fmt(r.centroid.x) << ',' << fmt(r.centroid.y);
    for (double v : r.features) out << ',' << fmt(v);
    out << '\n';
  }
}

ODMatrix load_od(const std::string& path, int n) {
  return ODMatrix(read_pairs(path, n, {"origin", "destination", "flow"}, true));
}

void save_od(const std::string& path, const ODMatrix& od) {
  std::ofstream out = open_out(path);
  out << "origin,destination,flow\n";
  for (int i = 0; i < od.size(); ++i)
    for (int j = 0; j < od.size(); ++j)
      if (od(i, j) != 0.0) out << i << ',' << j << ',' << fmt(od(i, j)) << '\n';
}

void save_adjacency(const std::string& path, const AdjacencyMatrix& adj) {
  std::ofstream out = open_out(path);
  out << "origin,destination\n";
  for (int i = 0; i < adj.size(); ++i)
    for (int j = 0; j < adj.size(); ++j)
      if (adj(i, j)) out << i << ',' << j << '\n';
}

AdjacencyMatrix load_adjacency(const std::string& path, int n) {
  return AdjacencyMatrix(read_pairs(path, n, {"origin", "destination"}, false));
}

CityData load_city(const std::string& regions_path, const std::string& od_path) {
  CityCharacteristics city = load_regions(regions_path);
  ODMatrix od = load_od(od_path, city.size());
  return {std::move(city), std::move(od)};
}

void save_city(const std::string& regions_path, const std::string& od_path, const CityData& data) {
  save_regions(regions_path, data.city);
  save_od(od_path, data.od);
}

}  // namespace odgen::data
