#include "odgen/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "odgen/errors.hpp"

namespace odgen {

using ag::Tensor;
using ag::Var;
using nlohmann::json;

namespace {

constexpr int kCheckpointVersion = 1;
constexpr double kMasked = -1e30;

std::vector<int> repeat_index(int count, int value) { return std::vector<int>(static_cast<std::size_t>(count), value); }

// Row i*N + j -> i.
std::vector<int> origin_index(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(i) * n + j] = i;
  return idx;
}

// Row i*N + j -> j.
std::vector<int> destination_index(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) idx[static_cast<std::size_t>(i) * n + j] = j;
  return idx;
}

double signed_log(double x) { return x < 0.0 ? -std::log1p(-x) : std::log1p(x); }

bool all_finite(const Tensor& t) { return t.allFinite(); }

}  // namespace

std::string to_string(DenoiserMode mode) { return mode == DenoiserMode::Topology ? "topology" : "flow"; }

DenoiserMode denoiser_mode_from_string(const std::string& s) {
  if (s == "topology") return DenoiserMode::Topology;
  if (s == "flow") return DenoiserMode::Flow;
  throw ValidationError("unknown denoiser mode: " + s);
}

void DenoiserConfig::validate() const {
  if (layers < 1) throw ValidationError("denoiser needs at least one layer");
  if (channels < 1 || heads < 1 || channels % heads != 0)
    throw ValidationError("channels must be a positive multiple of heads");
  if (time_dim < 2 || time_dim % 2 != 0) throw ValidationError("time_dim must be even and >= 2");
  if (cond_hidden < 1 || cond_layers < 1) throw ValidationError("condition MLP sizes must be positive");
  if (gat_layers < 0 || knn < 1) throw ValidationError("GAT settings must be positive");
  if (ffn_multiplier < 1) throw ValidationError("ffn_multiplier must be positive");
}

void to_json(json& j, const DenoiserConfig& c) {
  j = json{{"mode", to_string(c.mode)},          {"layers", c.layers},
           {"channels", c.channels},             {"heads", c.heads},
           {"time_dim", c.time_dim},             {"cond_hidden", c.cond_hidden},
           {"cond_layers", c.cond_layers},       {"gat_layers", c.gat_layers},
           {"knn", c.knn},                       {"ffn_multiplier", c.ffn_multiplier},
           {"node_augmentation", c.node_augmentation}};
}

void from_json(const json& j, DenoiserConfig& c) {
  DenoiserConfig d;
  c.mode = denoiser_mode_from_string(j.value("mode", to_string(d.mode)));
  c.layers = j.value("layers", d.layers);
  c.channels = j.value("channels", d.channels);
  c.heads = j.value("heads", d.heads);
  c.time_dim = j.value("time_dim", d.time_dim);
  c.cond_hidden = j.value("cond_hidden", d.cond_hidden);
  c.cond_layers = j.value("cond_layers", d.cond_layers);
  c.gat_layers = j.value("gat_layers", d.gat_layers);
  c.knn = j.value("knn", d.knn);
  c.ffn_multiplier = j.value("ffn_multiplier", d.ffn_multiplier);
  c.node_augmentation = j.value("node_augmentation", d.node_augmentation);
}

InputScaler InputScaler::fit(const std::vector<const CityCharacteristics*>& cities) {
  if (cities.empty()) throw ValidationError("scaler needs at least one city");
  const int f = cities.front()->feature_dim();
  InputScaler s;
  s.feature_mean.assign(static_cast<std::size_t>(f), 0.0);
  s.feature_std.assign(static_cast<std::size_t>(f), 1.0);
  std::vector<double> sum(static_cast<std::size_t>(f), 0.0);
  std::vector<double> sq(static_cast<std::size_t>(f), 0.0);
  double count = 0.0;
  double dist_sum = 0.0;
  double dist_count = 0.0;
  for (const CityCharacteristics* c : cities) {
    if (c->manifest() != cities.front()->manifest()) throw ValidationError("feature manifest mismatch between cities");
    for (const Region& r : c->regions()) {
      for (int k = 0; k < f; ++k) {
        const double v = signed_log(r.features[static_cast<std::size_t>(k)]);
        sum[static_cast<std::size_t>(k)] += v;
        sq[static_cast<std::size_t>(k)] += v * v;
      }
      count += 1.0;
    }
    const Matrix& d = c->distances();
    for (int i = 0; i < c->size(); ++i)
      for (int j = 0; j < c->size(); ++j)
        if (i != j) {
          dist_sum += d(i, j);
          dist_count += 1.0;
        }
  }
  for (int k = 0; k < f; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const double mean = sum[uk] / count;
    const double var = std::max(sq[uk] / count - mean * mean, 0.0);
    s.feature_mean[uk] = mean;
    s.feature_std[uk] = var > 1e-16 ? std::sqrt(var) : 1.0;
  }
  s.distance_scale = (dist_count > 0.0 && dist_sum > 0.0) ? dist_sum / dist_count : 1.0;
  return s;
}

Matrix InputScaler::transform_features(const Matrix& raw) const {
  if (raw.cols() != static_cast<Eigen::Index>(feature_mean.size()))
    throw ValidationError("feature dimension does not match the fitted scaler");
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.rows(); ++i)
    for (Eigen::Index k = 0; k < raw.cols(); ++k)
      out(i, k) = (signed_log(raw(i, k)) - feature_mean[static_cast<std::size_t>(k)]) /
                  feature_std[static_cast<std::size_t>(k)];
  return out;
}

void to_json(json& j, const InputScaler& s) {
  j = json{{"feature_mean", s.feature_mean}, {"feature_std", s.feature_std}, {"distance_scale", s.distance_scale}};
}

void from_json(const json& j, InputScaler& s) {
  s.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  s.feature_std = j.at("feature_std").get<std::vector<double>>();
  s.distance_scale = j.at("distance_scale").get<double>();
  if (s.feature_mean.size() != s.feature_std.size()) throw ValidationError("scaler arrays differ in length");
}

Vector eigenvector_centrality(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  const Matrix sym = adjacency + adjacency.transpose();
  if (n == 0 || sym.cwiseAbs().maxCoeff() == 0.0) return Vector::Zero(n);
  // Shifting by I keeps the dominant eigenvector and stops the iteration from oscillating on
  // bipartite graphs (stars, for example).
  const Matrix shifted = sym + Matrix::Identity(n, n);
  Vector x = Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  for (int it = 0; it < 100; ++it) {
    Vector y = shifted * x;
    const double norm = y.norm();
    if (norm == 0.0) return Vector::Zero(n);
    y /= norm;
    const double delta = (y - x).norm();
    x = std::move(y);
    if (delta < 1e-8) break;
  }
  return x;
}

Matrix node_property_features(const AdjacencyMatrix& adj) {
  const int n = adj.size();
  const double denom = std::max(n - 1, 1);
  Matrix out(n, 3);
  out.col(0) = adj.values().colwise().sum().transpose() / denom;
  out.col(1) = adj.values().rowwise().sum() / denom;
  out.col(2) = eigenvector_centrality(adj.values());
  return out;
}

Matrix node_property_features(const AdjacencyMatrix& mask, const Matrix& weights) {
  const int n = mask.size();
  if (weights.rows() != n || weights.cols() != n) throw ValidationError("weights must match the mask shape");
  Matrix out(n, 5);
  out.leftCols(3) = node_property_features(mask);
  const Matrix w = weights.cwiseProduct(mask.values());
  Vector in = w.colwise().sum().transpose();
  Vector outs = w.rowwise().sum();
  const double in_max = n > 0 ? in.maxCoeff() : 0.0;
  const double out_max = n > 0 ? outs.maxCoeff() : 0.0;
  out.col(3) = in_max > 0.0 ? Vector(in / in_max) : Vector::Zero(n);
  out.col(4) = out_max > 0.0 ? Vector(outs / out_max) : Vector::Zero(n);
  return out;
}

std::vector<std::vector<int>> knn_graph(const Matrix& distances, int k) {
  const int n = static_cast<int>(distances.rows());
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<int> others;
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::stable_sort(others.begin(), others.end(),
                     [&](int a, int b) { return distances(i, a) < distances(i, b); });
    if (static_cast<int>(others.size()) > k) others.resize(static_cast<std::size_t>(k));
    out[static_cast<std::size_t>(i)] = std::move(others);
  }
  return out;
}

Tensor sinusoidal_embedding(int t, int dim) {
  Tensor e(1, dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    e(0, k) = std::sin(t * freq);
    e(0, half + k) = std::cos(t * freq);
  }
  return e;
}

Denoiser::Denoiser(DenoiserConfig config, FeatureManifest manifest, InputScaler scaler, std::uint64_t seed)
    : config_(config), manifest_(std::move(manifest)), scaler_(std::move(scaler)) {
  config_.validate();
  if (scaler_.feature_mean.size() != manifest_.size())
    throw ValidationError("scaler and manifest disagree on the feature count");
  build(seed);
}

void Denoiser::build(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int c = config_.channels;
  const int f = static_cast<int>(manifest_.size());
  auto& p = params_;

  if (config_.mode == DenoiserMode::Topology) {
    for (int l = 0; l < config_.cond_layers; ++l) {
      const int in = l == 0 ? f : config_.cond_hidden;
      const int out = l == config_.cond_layers - 1 ? c : config_.cond_hidden;
      cond_mlp_.push_back(nn::Linear::create(p, "cond.mlp" + std::to_string(l), in, out, rng));
    }
  } else {
    auto make_encoder = [&](const std::string& name) {
      RoleEncoder enc;
      enc.input = nn::Linear::create(p, name + ".input", f, c, rng);
      for (int l = 0; l < config_.gat_layers; ++l) {
        const std::string prefix = name + ".gat" + std::to_string(l);
        Gat g;
        g.proj = nn::Linear::create(p, prefix + ".proj", c, c, rng, false);
        g.attn_src = p.add_uniform(prefix + ".attn_src", c, 1, c, rng);
        g.attn_dst = p.add_uniform(prefix + ".attn_dst", c, 1, c, rng);
        enc.layers.push_back(g);
      }
      return enc;
    };
    origin_enc_ = make_encoder("cond.origin");
    destination_enc_ = make_encoder("cond.destination");
    node_cond_proj_ = nn::Linear::create(p, "cond.node", 2 * c, c, rng);
  }
  edge_origin_ = nn::Linear::create(p, "cond.edge_origin", c, c, rng, false);
  edge_destination_ = nn::Linear::create(p, "cond.edge_destination", c, c, rng, false);
  edge_distance_ = nn::Linear::create(p, "cond.edge_distance", 2, c, rng);

  time1_ = nn::Linear::create(p, "time.fc1", config_.time_dim, c, rng);
  time2_ = nn::Linear::create(p, "time.fc2", c, c, rng);
  time_edge_ = nn::Linear::create(p, "time.edge", c, c, rng);

  node_in_ = nn::Linear::create(p, "input.node", config_.node_property_dim(), c, rng);
  edge_in_ = nn::Linear::create(p, "input.edge", config_.edge_input_dim(), c, rng);
  auto make_fusion = [&](const std::string& name) {
    Fusion fu;
    fu.query = nn::Linear::create(p, name + ".query", c, c, rng, false);
    fu.key = nn::Linear::create(p, name + ".key", c, c, rng, false);
    fu.value = nn::Linear::create(p, name + ".value", c, c, rng, false);
    fu.out = nn::Linear::create(p, name + ".out", 2 * c, c, rng);
    return fu;
  };
  node_fusion_ = make_fusion("fusion.node");
  edge_fusion_ = make_fusion("fusion.edge");
  token_origin_ = nn::Linear::create(p, "fusion.token_origin", c, c, rng, false);
  token_destination_ = nn::Linear::create(p, "fusion.token_destination", c, c, rng, false);

  const int hidden = c * config_.ffn_multiplier;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    Layer L;
    L.q = nn::Linear::create(p, prefix + ".q", c, c, rng, false);
    L.k = nn::Linear::create(p, prefix + ".k", c, c, rng, false);
    L.v = nn::Linear::create(p, prefix + ".v", c, c, rng, false);
    L.edge_bias = nn::Linear::create(p, prefix + ".edge_bias", c, config_.heads, rng, false);
    L.out_h = nn::Linear::create(p, prefix + ".out_h", c, c, rng, false);
    L.out_e = nn::Linear::create(p, prefix + ".out_e", config_.heads, c, rng, false);
    L.norm_h1 = nn::LayerNorm::create(p, prefix + ".norm_h1", c);
    L.norm_e1 = nn::LayerNorm::create(p, prefix + ".norm_e1", c);
    L.ffn_h1 = nn::Linear::create(p, prefix + ".ffn_h1", c, hidden, rng);
    L.ffn_h2 = nn::Linear::create(p, prefix + ".ffn_h2", hidden, c, rng);
    L.ffn_e1 = nn::Linear::create(p, prefix + ".ffn_e1", c, hidden, rng);
    L.ffn_e2 = nn::Linear::create(p, prefix + ".ffn_e2", hidden, c, rng);
    L.norm_h2 = nn::LayerNorm::create(p, prefix + ".norm_h2", c);
    L.norm_e2 = nn::LayerNorm::create(p, prefix + ".norm_e2", c);
    layers_.push_back(L);
  }
  readout_ = nn::Linear::create(p, "readout", c, config_.edge_output_dim(), rng);
}

void Denoiser::check_city(const CityCharacteristics& city) const {
  if (city.manifest() != manifest_) {
    throw ValidationError("city feature manifest (" + std::to_string(city.feature_dim()) +
                          " features) does not match the model manifest (" +
                          std::to_string(manifest_.size()) + " features)");
  }
}

Var Denoiser::encode_role(const RoleEncoder& enc, const Var& x, const Tensor& neighbor_mask) const {
  Var h = ag::silu(enc.input(x));
  const Var mask = ag::constant(neighbor_mask);
  for (const Gat& g : enc.layers) {
    const Var z = g.proj(h);
    const Var scores = ag::leaky_relu(ag::outer_sum(ag::matmul(z, g.attn_src), ag::matmul(z, g.attn_dst)), 0.2);
    const Var attn = ag::softmax_rows(ag::add(scores, mask));
    h = ag::add(h, ag::silu(ag::matmul(attn, z)));
  }
  return h;
}

ConditionEmbedding Denoiser::build_condition_embedding(const CityCharacteristics& city) const {
  check_city(city);
  const int n = city.size();
  const Var x = ag::constant(scaler_.transform_features(city.feature_matrix()));

  Var origin;
  Var destination;
  Var node_cond;
  if (config_.mode == DenoiserMode::Topology) {
    Var h = x;
    for (std::size_t l = 0; l < cond_mlp_.size(); ++l) {
      h = cond_mlp_[l](h);
      if (l + 1 < cond_mlp_.size()) h = ag::silu(h);
    }
    origin = destination = node_cond = h;
  } else {
    Tensor mask = Tensor::Constant(n, n, kMasked);
    const auto neighbors = knn_graph(city.distances(), config_.knn);
    for (int i = 0; i < n; ++i) {
      mask(i, i) = 0.0;
      for (int j : neighbors[static_cast<std::size_t>(i)]) mask(i, j) = 0.0;
    }
    origin = encode_role(origin_enc_, x, mask);
    destination = encode_role(destination_enc_, x, mask);
    const Var both[] = {origin, destination};
    node_cond = node_cond_proj_(ag::concat_cols(both));
  }

  Tensor dist(static_cast<Eigen::Index>(n) * n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double d = city.distances()(i, j) / scaler_.distance_scale;
      dist(static_cast<Eigen::Index>(i) * n + j, 0) = d;
      dist(static_cast<Eigen::Index>(i) * n + j, 1) = std::log1p(d);
    }
  Var edge = ag::add(ag::gather_rows(edge_origin_(origin), origin_index(n)),
                     ag::gather_rows(edge_destination_(destination), destination_index(n)));
  edge = ag::add(edge, edge_distance_(ag::constant(std::move(dist))));
  return {node_cond, edge, n};
}

ConditionEmbedding Denoiser::null_condition(int n) const {
  const int c = config_.channels;
  return {ag::constant(Tensor::Zero(n, c)), ag::constant(Tensor::Zero(static_cast<Eigen::Index>(n) * n, c)), n};
}

Var Denoiser::Fusion::operator()(const Var& x, const std::vector<Token>& tokens) const {
  const Var q = query(x);
  const double inv = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  std::vector<Var> scores;
  std::vector<Var> values;
  for (const Token& tok : tokens) {
    Var k = key(tok.base);
    Var v = value(tok.base);
    if (!tok.index.empty()) {
      k = ag::gather_rows(k, tok.index);
      v = ag::gather_rows(v, tok.index);
    }
    scores.push_back(ag::scale(ag::rowwise_dot(q, k), inv));
    values.push_back(std::move(v));
  }
  const Var w = ag::softmax_rows(ag::concat_cols(scores));
  Var att = ag::mul_col(values[0], ag::slice_cols(w, 0, 1));
  for (std::size_t s = 1; s < values.size(); ++s)
    att = ag::add(att, ag::mul_col(values[s], ag::slice_cols(w, static_cast<Eigen::Index>(s), 1)));
  const Var parts[] = {x, att};
  return out(ag::concat_cols(parts));
}

GraphState Denoiser::graph_transformer_layer(const GraphState& state, int layer, AttentionTrace* trace) const {
  const Layer& L = layers_.at(static_cast<std::size_t>(layer));
  const int n = state.n;
  const int heads = config_.heads;
  const int dk = config_.channels / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));

  const Var q = L.q(state.H);
  const Var k = L.k(state.H);
  const Var v = L.v(state.H);
  const Var bias = L.edge_bias(state.E);  // N^2 x heads

  std::vector<Var> messages;
  std::vector<Var> flat_scores;
  for (int h = 0; h < heads; ++h) {
    const Var qh = ag::slice_cols(q, h * dk, dk);
    const Var kh = ag::slice_cols(k, h * dk, dk);
    const Var vh = ag::slice_cols(v, h * dk, dk);
    const Var bh = ag::reshape(ag::slice_cols(bias, h, 1), n, n);
    const Var scores = ag::add(ag::scale(ag::matmul_nt(qh, kh), inv), bh);
    const Var weights = ag::softmax_rows(scores);
    messages.push_back(ag::matmul(weights, vh));
    flat_scores.push_back(ag::reshape(scores, static_cast<Eigen::Index>(n) * n, 1));
    if (trace) {
      trace->scores.push_back(scores.value());
      trace->weights.push_back(weights.value());
    }
  }
  const Var node_msg = L.out_h(ag::concat_cols(messages));
  const Var edge_msg = L.out_e(ag::concat_cols(flat_scores));
  if (trace) {
    trace->node_message = node_msg.value();
    trace->edge_message = edge_msg.value();
  }

  Var h1 = L.norm_h1(ag::add(state.H, node_msg));
  Var e1 = L.norm_e1(ag::add(state.E, edge_msg));
  Var h2 = L.norm_h2(ag::add(h1, L.ffn_h2(ag::silu(L.ffn_h1(h1)))));
  Var e2 = L.norm_e2(ag::add(e1, L.ffn_e2(ag::silu(L.ffn_e1(e1)))));
  if (!all_finite(h2.value()) || !all_finite(e2.value()))
    throw NumericalError("non-finite activation in graph transformer layer " + std::to_string(layer));
  return {h2, e2, n};
}

Var Denoiser::time_embedding(int t) const {
  const Var s = ag::constant(sinusoidal_embedding(t, config_.time_dim));
  return time2_(ag::silu(time1_(s)));
}

Var Denoiser::forward(const DenoiserInput& input, int t, const ConditionEmbedding& cond) const {
  const int n = input.n;
  const auto n2 = static_cast<Eigen::Index>(n) * n;
  if (input.edge_features.rows() != n2 || input.edge_features.cols() != config_.edge_input_dim())
    throw ValidationError("edge features must be N^2 x " + std::to_string(config_.edge_input_dim()));
  if (input.node_properties.rows() != n || input.node_properties.cols() != config_.node_property_dim())
    throw ValidationError("node properties must be N x " + std::to_string(config_.node_property_dim()) +
                          " for " + to_string(config_.mode) + " mode");
  if (cond.n != n) throw ValidationError("condition embedding built for a different city size");
  if (t < 1) throw ValidationError("denoiser step must be >= 1");

  const Var temb = time_embedding(t);
  const Var node_props = ag::constant(config_.node_augmentation ? input.node_properties
                                                                : Tensor::Zero(n, config_.node_property_dim()));

  const Var node_x = node_in_(node_props);
  const std::vector<Fusion::Token> node_tokens = {
      {ag::add(cond.node_cond, ag::gather_rows(temb, repeat_index(n, 0))), {}},
      {ag::add(ag::mean_rows(cond.node_cond), temb), repeat_index(n, 0)},
  };
  GraphState state;
  state.n = n;
  state.H = node_fusion_(node_x, node_tokens);

  const Var edge_x = edge_in_(ag::constant(input.edge_features));
  const std::vector<Fusion::Token> edge_tokens = {
      {cond.edge_cond, {}},
      {token_origin_(cond.node_cond), origin_index(n)},
      {token_destination_(cond.node_cond), destination_index(n)},
      {time_edge_(temb), repeat_index(static_cast<int>(n2), 0)},
  };
  state.E = edge_fusion_(edge_x, edge_tokens);

  for (int l = 0; l < config_.layers; ++l) state = graph_transformer_layer(state, l);
  return readout_(state.E);
}

json Denoiser::to_json() const {
  json params = json::array();
  for (const auto& e : params_.entries()) {
    const Tensor& v = e.var.value();
    params.push_back({{"name", e.name},
                      {"shape", {v.rows(), v.cols()}},
                      {"data", std::vector<double>(v.data(), v.data() + v.size())}});
  }
  return json{{"format", "odgen-denoiser"}, {"version", kCheckpointVersion}, {"config", config_},
              {"manifest", manifest_},     {"scaler", scaler_},               {"params", params}};
}

Denoiser Denoiser::from_json(const json& j) {
  if (j.value("format", std::string{}) != "odgen-denoiser") throw ValidationError("not a denoiser checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw ValidationError("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  Denoiser d(j.at("config").get<DenoiserConfig>(), j.at("manifest").get<FeatureManifest>(),
             j.at("scaler").get<InputScaler>(), 0);
  const auto& saved = j.at("params");
  const auto& entries = d.params_.entries();
  if (saved.size() != entries.size())
    throw ValidationError("checkpoint holds " + std::to_string(saved.size()) + " tensors, model expects " +
                          std::to_string(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& s = saved[k];
    Var var = entries[k].var;
    const std::string name = s.at("name").get<std::string>();
    if (name != entries[k].name) throw ValidationError("checkpoint tensor '" + name + "' where '" + entries[k].name + "' expected");
    const auto shape = s.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != var.rows() || shape[1] != var.cols())
      throw ValidationError("shape mismatch for checkpoint tensor " + name);
    const auto data = s.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != var.value().size())
      throw ValidationError("data length mismatch for checkpoint tensor " + name);
    std::copy(data.begin(), data.end(), var.mutable_value().data());
  }
  return d;
}

void Denoiser::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  out << to_json().dump();
}

Denoiser Denoiser::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read checkpoint " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed checkpoint " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace odgen
