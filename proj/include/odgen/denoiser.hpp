#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "odgen/autograd.hpp"
#include "odgen/core.hpp"
#include "odgen/nn.hpp"

namespace odgen {

enum class DenoiserMode { Topology, Flow };

std::string to_string(DenoiserMode mode);
DenoiserMode denoiser_mode_from_string(const std::string& s);

struct DenoiserConfig {
  DenoiserMode mode = DenoiserMode::Topology;
  int layers = 2;
  int channels = 64;
  int heads = 4;
  int time_dim = 128;
  int cond_hidden = 64;
  int cond_layers = 2;
  int gat_layers = 2;
  int knn = 8;
  int ffn_multiplier = 2;
  bool node_augmentation = true;

  int edge_input_dim() const { return 2; }
  int edge_output_dim() const { return mode == DenoiserMode::Topology ? 2 : 1; }
  int node_property_dim() const { return mode == DenoiserMode::Topology ? 3 : 5; }
  void validate() const;
};

void to_json(nlohmann::json& j, const DenoiserConfig& c);
void from_json(const nlohmann::json& j, DenoiserConfig& c);

// Signed-log + z-score transform of region features, plus the distance unit. Fitted on the
// training cities and carried inside every checkpoint so target cities see the same transform.
struct InputScaler {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  double distance_scale = 1.0;

  static InputScaler fit(const std::vector<const CityCharacteristics*>& cities);
  Matrix transform_features(const Matrix& raw) const;
};

void to_json(nlohmann::json& j, const InputScaler& s);
void from_json(const nlohmann::json& j, InputScaler& s);

// Per node: in-degree/(N-1), out-degree/(N-1), eigenvector centrality of A + A^T.
Matrix node_property_features(const AdjacencyMatrix& adj);
// Adds in-strength and out-strength of `weights` restricted to `mask`, each divided by its maximum.
Matrix node_property_features(const AdjacencyMatrix& mask, const Matrix& weights);
// Dominant eigenvector of the symmetrized matrix by shifted power iteration (100 iterations,
// tolerance 1e-8, unit L2 norm). All-zero input gives a zero vector.
Vector eigenvector_centrality(const Matrix& adjacency);

// k nearest other regions of each region by distance, ties broken by index.
std::vector<std::vector<int>> knn_graph(const Matrix& distances, int k);

struct GraphState {
  ag::Var H;  // N x C node states
  ag::Var E;  // N^2 x C edge states, row i*N + j
  int n = 0;
};

struct ConditionEmbedding {
  ag::Var node_cond;  // N x C
  ag::Var edge_cond;  // N^2 x C
  int n = 0;
};

// Inputs of one denoising evaluation at a given step.
struct DenoiserInput {
  ag::Tensor edge_features;  // N^2 x 2: one-hot state (topology) or [F_t, mask] (flow)
  ag::Tensor node_properties;  // N x P
  int n = 0;
};

// Attention internals of one layer, exposed for inspection and tests.
struct AttentionTrace {
  std::vector<ag::Tensor> scores;   // per head, N x N pre-softmax a_ij
  std::vector<ag::Tensor> weights;  // per head, N x N softmax rows
  ag::Tensor node_message;          // N x C, O_h applied to concatenated head messages
  ag::Tensor edge_message;          // N^2 x C, O_e applied to concatenated head scores
};

class Denoiser {
 public:
  Denoiser(DenoiserConfig config, FeatureManifest manifest, InputScaler scaler, std::uint64_t seed);
  // Parameters are shared handles; copying would alias them.
  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;
  Denoiser(Denoiser&&) = default;
  Denoiser& operator=(Denoiser&&) = default;

  const DenoiserConfig& config() const { return config_; }
  const FeatureManifest& manifest() const { return manifest_; }
  const InputScaler& scaler() const { return scaler_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ConditionEmbedding build_condition_embedding(const CityCharacteristics& city) const;
  // Null condition for condition dropout: zero node and edge embeddings.
  ConditionEmbedding null_condition(int n) const;

  GraphState graph_transformer_layer(const GraphState& state, int layer, AttentionTrace* trace = nullptr) const;

  // Returns N^2 x 2 class logits (topology) or N^2 x 1 noise estimates (flow).
  ag::Var forward(const DenoiserInput& input, int t, const ConditionEmbedding& cond) const;

  ag::Var time_embedding(int t) const;

  nlohmann::json to_json() const;
  static Denoiser from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Denoiser load(const std::string& path);

 private:
  struct Fusion {
    nn::Linear query, key, value, out;
    struct Token {
      ag::Var base;
      std::vector<int> index;  // empty: base already has one row per query
    };
    ag::Var operator()(const ag::Var& x, const std::vector<Token>& tokens) const;
  };
  struct Layer {
    nn::Linear q, k, v, edge_bias, out_h, out_e;
    nn::LayerNorm norm_h1, norm_e1, norm_h2, norm_e2;
    nn::Linear ffn_h1, ffn_h2, ffn_e1, ffn_e2;
  };
  struct Gat {
    nn::Linear proj;
    ag::Var attn_src, attn_dst;
  };
  struct RoleEncoder {
    nn::Linear input;
    std::vector<Gat> layers;
  };

  void build(std::uint64_t seed);
  void check_city(const CityCharacteristics& city) const;
  ag::Var encode_role(const RoleEncoder& enc, const ag::Var& x, const ag::Tensor& neighbor_mask) const;

  DenoiserConfig config_;
  FeatureManifest manifest_;
  InputScaler scaler_;
  nn::ParamStore params_;

  // Condition embedders.
  std::vector<nn::Linear> cond_mlp_;          // topology
  RoleEncoder origin_enc_, destination_enc_;   // flow
  nn::Linear node_cond_proj_;                 // flow: concat(origin, destination) -> C
  nn::Linear edge_origin_, edge_destination_, edge_distance_;

  nn::Linear time1_, time2_, time_edge_;
  nn::Linear node_in_, edge_in_;
  Fusion node_fusion_, edge_fusion_;
  nn::Linear token_origin_, token_destination_;
  std::vector<Layer> layers_;
  nn::Linear readout_;
};

// Sinusoidal embedding of a step index, length `dim` (even): [sin(t w_k), cos(t w_k)].
ag::Tensor sinusoidal_embedding(int t, int dim);

}  // namespace odgen
