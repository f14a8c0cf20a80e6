#include <doctest.h>

#include <filesystem>

#include "odgen/errors.hpp"
#include "odgen/pipeline.hpp"
#include "odgen/topo_diffusion.hpp"
#include "test_helpers.hpp"

using namespace odgen;

namespace {

CascadeConfig tiny_config(std::uint64_t seed) {
  CascadeConfig c;
  c.steps = 40;
  c.topology = testing_helpers::small_config(DenoiserMode::Topology);
  c.flow = testing_helpers::small_config(DenoiserMode::Flow);
  c.flow.layers = 3;
  c.topology_train.epochs = 30;
  c.flow_train.epochs = 30;
  c.topology_train.early_stop = c.flow_train.early_stop = false;
  c.seed = seed;
  return c;
}

AdjacencyMatrix adj(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return AdjacencyMatrix(m);
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("mask union") {
    CHECK(mask_union(adj({{1, 0}, {0, 0}}), adj({{0, 0}, {0, 1}})) == adj({{1, 0}, {0, 1}}));
    CHECK(mask_union(adj({{1, 1}, {0, 0}}), adj({{1, 0}, {0, 0}})) == adj({{1, 1}, {0, 0}}));
    const AdjacencyMatrix z = AdjacencyMatrix::zeros(3);
    CHECK(mask_union(z, z) == z);
    CHECK_THROWS_AS(mask_union(z, AdjacencyMatrix::zeros(2)), ValidationError);
  }

  TEST_CASE("config defaults, flags and serialization") {
    CascadeConfig c;
    CHECK(c.steps == 1000);
    CHECK(c.topology.layers == 2);
    CHECK(c.flow.layers == 3);
    CHECK(c.topology.channels == 64);
    CHECK(c.flow.channels == 64);
    CHECK(c.topology_train.adam.learning_rate == 3e-4);
    CHECK(c.effective_topology().node_augmentation);
    c.use_node_augmentation_topology = false;
    CHECK_FALSE(c.effective_topology().node_augmentation);
    CHECK(c.effective_flow().node_augmentation);
    c.use_node_augmentation_flow = false;
    CHECK_FALSE(c.effective_flow().node_augmentation);
    c.seed = 99;
    c.topology_train.epochs = 17;
    const CascadeConfig back = nlohmann::json(c).get<CascadeConfig>();
    CHECK(nlohmann::json(back) == nlohmann::json(c));
    CHECK(back.schedule().alpha_bar_at(500) == c.schedule().alpha_bar_at(500));
    CascadeConfig bad;
    bad.steps = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("flow masks with and without collaborative training") {
    const auto city = testing_helpers::small_city(8, 3);
    const AdjacencyMatrix truth = to_adjacency(city.od);
    CascadeConfig c = tiny_config(1);
    c.use_collaborative_training = false;
    const CascadeTraining off = train_cascade(city.city, city.od, c);
    REQUIRE(off.flow_masks.size() == 1);
    CHECK(off.flow_masks[0] == truth);
    c.use_collaborative_training = true;
    const CascadeTraining on = train_cascade(city.city, city.od, c);
    CHECK(((on.flow_masks[0].values() - truth.values()).array() >= 0.0).all());
    CHECK(on.topology.losses.size() == 30);
    CHECK(on.flow.losses.size() == 30);
  }

  TEST_CASE("end to end: support, determinism and reload") {
    const auto city = testing_helpers::small_city(20, 4);
    const CascadeTraining trained = train_cascade(city.city, city.od, tiny_config(5));
    const CascadeTraining again = train_cascade(city.city, city.od, tiny_config(5));
    CHECK(trained.topology.losses == again.topology.losses);
    CHECK(trained.flow.losses == again.flow.losses);

    std::mt19937_64 r1(11), r2(11);
    const GeneratedOD a = generate_od(city.city, trained.cascade, r1);
    const GeneratedOD b = generate_od(city.city, again.cascade, r2);
    CHECK(a.od == b.od);
    CHECK(a.adjacency == b.adjacency);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j) {
        if (a.od(i, j) > 0) CHECK(a.adjacency(i, j));
        CHECK(a.od(i, j) == std::round(a.od(i, j)));
      }

    const std::string dir = (std::filesystem::temp_directory_path() / "odgen_pipeline_run").string();
    std::filesystem::remove_all(dir);
    save_cascade(dir, trained.cascade);
    const TrainedCascade loaded = load_cascade(dir);
    CHECK(loaded.flow_scaler.f_max == trained.cascade.flow_scaler.f_max);
    std::mt19937_64 r3(11);
    const GeneratedOD c = generate_od(city.city, loaded, r3);
    CHECK(c.od == a.od);
    CHECK(c.adjacency == a.adjacency);
    std::filesystem::remove_all(dir);

    // Generation on an unseen city of a different size.
    const auto other = testing_helpers::small_city(9, 8);
    std::mt19937_64 r4(2);
    CHECK(generate_od(other.city, trained.cascade, r4).od.size() == 9);
  }

  TEST_CASE("majority vote over several topology samples") {
    const auto city = testing_helpers::small_city(10, 6);
    CascadeTraining t = train_cascade(city.city, city.od, tiny_config(2));
    t.cascade.config.adjacency_samples = 3;
    std::mt19937_64 rng(4), replay(4);
    const AdjacencyMatrix vote = generate_topology(city.city, t.cascade, rng);
    const DiscreteTransition trans = make_uniform_transitions(t.cascade.config.schedule(), 2);
    Matrix sum = Matrix::Zero(10, 10);
    for (int k = 0; k < 3; ++k) sum += topo::generate_adjacency(city.city, t.cascade.topology, trans, replay).values();
    CHECK(vote.values() == (sum.array() >= 2.0).cast<double>().matrix());
  }

  TEST_CASE("manifest mismatch and bad inputs") {
    const auto city = testing_helpers::small_city(8, 3);
    const CascadeTraining t = train_cascade(city.city, city.od, tiny_config(1));
    std::vector<Region> regions = city.city.regions();
    for (Region& r : regions) r.features.pop_back();
    FeatureManifest m = city.city.manifest();
    m.pop_back();
    const CityCharacteristics wrong(regions, m);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(generate_od(wrong, t.cascade, rng), ValidationError);
    CHECK_THROWS_AS(train_cascade(std::vector<SourceCity>{}, tiny_config(1)), ValidationError);
    const auto small = testing_helpers::small_city(5, 1);
    CHECK_THROWS_AS(train_cascade(std::vector<SourceCity>{{&city.city, &small.od}}, tiny_config(1)), ValidationError);
  }
}
