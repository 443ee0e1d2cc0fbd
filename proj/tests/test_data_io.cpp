#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "test_util.hpp"
#include "tvmix/data_io.hpp"
#include "tvmix/errors.hpp"

using namespace tvmix;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("tvmix_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int counter() {
    static int c = 0;
    return c++;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

FittedModel small_model(std::uint64_t seed) {
  SplitMix64 rng(seed);
  FittedModel model;
  model.components = test_util::random_components(3, 1, rng);
  model.field = VectorFieldParams::glorot({4, 8, 3}, seed);
  model.alpha0 = test_util::random_simplex(3, rng);
  model.kernel_sigmas = {1.5, 2.0, 2.5};
  return model;
}

}  // namespace

TEST_CASE("scenario mixture means and variance on the grid endpoints") {
  const GroundTruth truth = GroundTruth::scenario(1);
  const ComponentSet at0 = truth.components_at(0.0);
  CHECK(at0.means(0, 0) == doctest::Approx(-2.0));
  CHECK(at0.means(1, 0) == doctest::Approx(0.0));
  CHECK(at0.means(2, 0) == doctest::Approx(5.0));
  CHECK(truth.variance(0.0) == doctest::Approx(1.0));

  const ComponentSet at1 = truth.components_at(1.0);
  CHECK(at1.means(0, 0) == doctest::Approx(18.0));
  CHECK(at1.means(1, 0) == doctest::Approx(16.0));
  CHECK(at1.means(2, 0) == doctest::Approx(11.0));
  CHECK(truth.variance(1.0) == doctest::Approx(2.0));

  // d >= 2 replicates the coordinates.
  const GroundTruth wide = GroundTruth::scenario(4);
  const ComponentSet w1 = wide.components_at(0.5);
  for (int j = 0; j < 4; ++j) CHECK(w1.means(0, j) == doctest::Approx(8.0));
}

TEST_CASE("simulate_scenario moment check and determinism") {
  const auto [data, truth] = simulate_scenario(1, 100000, 2, 12345);
  REQUIRE(data.block_count() == 2);
  CHECK(data.times[0] == 0.0);
  CHECK(data.times[1] == 1.0);

  // Mixture mean at t = 0 is (-2 + 0 + 5)/3 = 1; block sd of the mixture.
  const Eigen::ArrayXd block = data.blocks[0].col(0).array();
  const double mean = block.mean();
  const double var = (block - mean).square().mean();
  // Mixture variance = within (1) + between (E m^2 - (E m)^2).
  const double between = (4.0 + 0.0 + 25.0) / 3.0 - 1.0;
  CHECK(std::abs(mean - 1.0) <= 3.0 * std::sqrt((1.0 + between) / 100000.0));
  CHECK(std::abs(var - (1.0 + between)) < 0.2);

  const auto [again, t2] = simulate_scenario(1, 100000, 2, 12345);
  CHECK(again.blocks[0] == data.blocks[0]);
  const auto [other, t3] = simulate_scenario(1, 100, 2, 999);
  CHECK(other.blocks[0] != data.blocks[0].topRows(100));

  CHECK_THROWS_AS(simulate_scenario(0, 10, 2, 1), InvalidInput);
  CHECK_THROWS_AS(simulate_scenario(1, 10, 1, 1), InvalidInput);
}

TEST_CASE("csv minimal file and rescaling") {
  TempDir dir;
  const std::string path = dir.file("tiny.csv");
  {
    std::ofstream out(path);
    out << "subject,t,x1\n";
    out << "a,3,1.5\n";
    out << "a,7,2.5\n";
    out << "b,10,0.25\n";
    out << "b,20,0.75\n";
  }
  const CsvLoadResult res = load_csv(path);
  REQUIRE(res.subjects.size() == 2);
  CHECK(res.rows_total == 4);
  CHECK(res.rows_rejected == 0);
  CHECK(res.subjects[0].subject_id == "a");
  CHECK(res.subjects[0].times == std::vector<double>{0.0, 1.0});
  CHECK(res.subjects[1].times == std::vector<double>{0.0, 1.0});
  CHECK(res.subjects[0].blocks[0](0, 0) == 1.5);
}

TEST_CASE("csv duplicate times merge into one block") {
  TempDir dir;
  const std::string path = dir.file("dup.csv");
  {
    std::ofstream out(path);
    out << "subject,t,x1,x2\n";
    out << "s,0,1,10\n";
    out << "s,0,2,20\n";
    out << "s,1,3,30\n";
  }
  const CsvLoadResult res = load_csv(path);
  REQUIRE(res.subjects.size() == 1);
  REQUIRE(res.subjects[0].block_count() == 2);
  CHECK(res.subjects[0].blocks[0].rows() == 2);
  CHECK(res.subjects[0].blocks[0](1, 1) == 20.0);
}

TEST_CASE("csv rejects degenerate time axes without dropping rows silently") {
  TempDir dir;
  const std::string path = dir.file("degen.csv");
  {
    std::ofstream out(path);
    out << "subject,t,x1\n";
    out << "only,5,1\n";
    out << "only,5,2\n";
    out << "ok,0,1\n";
    out << "ok,1,2\n";
  }
  const CsvLoadResult res = load_csv(path);
  CHECK(res.subjects.size() == 1);
  CHECK(res.rows_total == 4);
  CHECK(res.rows_rejected == 2);
  REQUIRE(res.reject_messages.size() == 1);
  CHECK(res.reject_messages[0].find("degenerate time axis") != std::string::npos);

  std::size_t kept = 0;
  for (const auto& s : res.subjects) kept += s.total_samples();
  CHECK(kept + res.rows_rejected == res.rows_total);
}

TEST_CASE("csv parse errors carry line numbers") {
  TempDir dir;
  const std::string bad_header = dir.file("h.csv");
  {
    std::ofstream out(bad_header);
    out << "id,t,x1\na,0,1\n";
  }
  CHECK_THROWS_AS(load_csv(bad_header), DataError);

  const std::string bad_cell = dir.file("c.csv");
  {
    std::ofstream out(bad_cell);
    out << "subject,t,x1\na,0,1\na,1,oops\n";
  }
  try {
    load_csv(bad_cell);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  const std::string bad_width = dir.file("w.csv");
  {
    std::ofstream out(bad_width);
    out << "subject,t,x1\na,0,1,9\n";
  }
  CHECK_THROWS_AS(load_csv(bad_width), DataError);
}

TEST_CASE("csv round-trip is lossless") {
  SplitMix64 rng(87);
  for (int rep = 0; rep < 5; ++rep) {
    const int d = 1 + static_cast<int>(rng.next_index(3));
    const int blocks = 2 + static_cast<int>(rng.next_index(4));
    PanelDataset data;
    data.dim = d;
    data.subject_id = "r" + std::to_string(rep);
    for (int i = 0; i < blocks; ++i) {
      // Grid spans [0, 1] so rescaling on reload is the identity.
      data.times.push_back(static_cast<double>(i) / (blocks - 1));
      const int n = 1 + static_cast<int>(rng.next_index(5));
      Eigen::MatrixXd block(n, d);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < d; ++j) block(r, j) = 1e3 * rng.next_normal();
      data.blocks.push_back(block);
    }

    TempDir dir;
    const std::string path = dir.file("roundtrip.csv");
    write_csv(data, path);
    const CsvLoadResult res = load_csv(path);
    REQUIRE(res.subjects.size() == 1);
    const PanelDataset& back = res.subjects[0];
    CHECK(back.times == data.times);
    for (int i = 0; i < blocks; ++i) CHECK(back.blocks[i] == data.blocks[i]);

    // And the re-written file is byte-identical.
    const std::string path2 = dir.file("again.csv");
    write_csv(back, path2);
    CHECK(slurp(path) == slurp(path2));
  }
}

TEST_CASE("model save/load round-trip") {
  TempDir dir;
  const FittedModel model = small_model(5);
  const std::string p1 = dir.file("m1.json");
  const std::string p2 = dir.file("m2.json");
  save_model(model, p1);
  const FittedModel back = load_model(p1);
  save_model(back, p2);
  CHECK(slurp(p1) == slurp(p2));

  CHECK(back.components.means == model.components.means);
  for (int s = 0; s < 3; ++s)
    CHECK(back.components.chol[s] == model.components.chol[s]);
  CHECK(back.field.params == model.field.params);
  CHECK(back.alpha0 == model.alpha0);
  CHECK(back.kernel_sigmas == model.kernel_sigmas);

  SplitMix64 rng(6);
  for (int i = 0; i < 10; ++i) {
    const double t = rng.next_double();
    CHECK((predict_weights(back, t) - predict_weights(model, t))
              .lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("model load rejects corrupt or mismatched documents") {
  TempDir dir;
  const std::string garbage = dir.file("bad.json");
  {
    std::ofstream out(garbage);
    out << "{ not valid json";
  }
  CHECK_THROWS_AS(load_model(garbage), DataError);

  const std::string wrong = dir.file("wrong.json");
  {
    std::ofstream out(wrong);
    out << "{\"schema_version\": 999}";
  }
  CHECK_THROWS_AS(load_model(wrong), DataError);

  CHECK_THROWS_AS(load_model(dir.file("missing.json")), DataError);
}

TEST_CASE("bootstrap resample block identities") {
  SplitMix64 rng(44);
  PanelDataset data;
  data.dim = 1;
  data.times = {0.0, 0.5, 1.0};
  Eigen::MatrixXd one(1, 1);
  one << 3.25;
  data.blocks.push_back(one);
  Eigen::MatrixXd many(40, 1);
  for (int i = 0; i < 40; ++i) many(i, 0) = rng.next_normal();
  data.blocks.push_back(many);
  data.blocks.push_back(2.0 * many);

  const PanelDataset a = bootstrap_resample(data, 1);
  CHECK(a.blocks[0] == one);  // singleton block is fixed
  CHECK(a.blocks[1].rows() == 40);
  CHECK(a.times == data.times);

  const PanelDataset b = bootstrap_resample(data, 1);
  CHECK(a.blocks[1] == b.blocks[1]);  // deterministic per seed
  const PanelDataset c = bootstrap_resample(data, 2);
  CHECK(a.blocks[1] != c.blocks[1]);  // different seeds differ (w.p. ~1)
}

TEST_CASE("bootstrap resample has unit expected multiplicity") {
  // Each point's expected multiplicity under resampling is 1; average over
  // many seeds and compare within 3 standard errors.
  PanelDataset data;
  data.dim = 1;
  data.times = {0.0};
  const int n = 10;
  Eigen::MatrixXd block(n, 1);
  for (int i = 0; i < n; ++i) block(i, 0) = i;  // distinct markers
  data.blocks.push_back(block);

  const int seeds = 10000;
  double count_first = 0.0;  // multiplicity of marker 0
  for (int s = 0; s < seeds; ++s) {
    const PanelDataset r = bootstrap_resample(data, 1000 + s);
    count_first += (r.blocks[0].array() == 0.0).count();
  }
  const double mean = count_first / seeds;
  // multiplicity ~ Binomial(n, 1/n): variance ~ (1 - 1/n).
  const double se = std::sqrt((1.0 - 1.0 / n) / seeds);
  CHECK(std::abs(mean - 1.0) <= 3.0 * se);
}
