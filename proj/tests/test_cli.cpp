#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef TVMIX_CLI_PATH
#error "TVMIX_CLI_PATH must point at the built binary"
#endif

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("tvmix_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(TVMIX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("simulate is deterministic and shaped by --d") {
  TempDir dir;
  CHECK(run("simulate --d 1 --n-t 50 --grid 5 --replicates 2 --seed 7 --out " +
            dir.sub("a")) == 0);
  CHECK(run("simulate --d 1 --n-t 50 --grid 5 --replicates 2 --seed 7 --out " +
            dir.sub("b")) == 0);
  CHECK(slurp(dir.sub("a") + "/scenario_rep000.csv") ==
        slurp(dir.sub("b") + "/scenario_rep000.csv"));
  CHECK(slurp(dir.sub("a") + "/scenario_rep001.csv") ==
        slurp(dir.sub("b") + "/scenario_rep001.csv"));
  CHECK(fs::exists(dir.sub("a") + "/manifest.json"));

  CHECK(run("simulate --d 10 --n-t 3 --grid 2 --seed 1 --out " + dir.sub("wide")) == 0);
  const auto rows = read_csv(dir.sub("wide") + "/scenario_rep000.csv");
  CHECK(rows[0].size() == 12);  // subject, t, x1..x10
  CHECK(rows[1].size() == 12);
}

TEST_CASE("fit, predict and bootstrap round trip through files") {
  TempDir dir;
  REQUIRE(run("simulate --d 1 --n-t 80 --grid 5 --replicates 1 --seed 11 --out " +
              dir.sub("sim")) == 0);
  REQUIRE(run("fit --input " + dir.sub("sim") + "/scenario_rep000.csv"
              " --k 3 --outer-rounds 6 --epochs 150 --seed 2 --out " +
              dir.sub("fit")) == 0);
  CHECK(fs::exists(dir.sub("fit") + "/model_sim.json"));
  CHECK(fs::exists(dir.sub("fit") + "/fit_report.json"));

  // Input file untouched by downstream commands.
  const std::string input_before = slurp(dir.sub("sim") + "/scenario_rep000.csv");

  REQUIRE(run("predict --model " + dir.sub("fit") + "/model_sim.json"
              " --t-grid 101 --density-grid -14:30:201 --out " +
              dir.sub("pred")) == 0);
  const auto weights = read_csv(dir.sub("pred") + "/weights.csv");
  CHECK(weights.size() == 102);  // header + 101 rows
  for (std::size_t r = 1; r < weights.size(); ++r) {
    REQUIRE(weights[r].size() == 4);
    double total = 0.0;
    for (int s = 1; s <= 3; ++s) {
      const double w = std::stod(weights[r][s]);
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }

  // Exported density integrates to ~1 per time (trapezoid on the export grid).
  const auto density = read_csv(dir.sub("pred") + "/density.csv");
  REQUIRE(density.size() == 1 + 101 * 201);
  for (int block = 0; block < 101; block += 25) {
    double mass = 0.0;
    double prev_x = 0.0, prev_f = 0.0;
    for (int i = 0; i < 201; ++i) {
      const auto& row = density[1 + block * 201 + i];
      const double x = std::stod(row[1]);
      const double f = std::stod(row[2]);
      if (i > 0) mass += 0.5 * (x - prev_x) * (f + prev_f);
      prev_x = x;
      prev_f = f;
    }
    CHECK(std::abs(mass - 1.0) < 1e-4);
  }

  REQUIRE(run("bootstrap --input " + dir.sub("sim") + "/scenario_rep000.csv"
              " --model " + dir.sub("fit") + "/model_sim.json"
              " --times 0,1 --bootstrap-b 60 --level 0.1 --x-grid -14:30:64"
              " --seed 9 --out " +
              dir.sub("boot")) == 0);
  for (const std::string name : {"bands_t0.csv", "bands_t1.csv"}) {
    const auto rows = read_csv(dir.sub("boot") + "/" + name);
    REQUIRE(rows.size() == 65);
    for (std::size_t r = 1; r < rows.size(); ++r)
      CHECK(std::stod(rows[r][1]) <= std::stod(rows[r][3]));  // lower <= upper
  }

  // Determinism of the bootstrap per seed.
  REQUIRE(run("bootstrap --input " + dir.sub("sim") + "/scenario_rep000.csv"
              " --model " + dir.sub("fit") + "/model_sim.json"
              " --times 0,1 --bootstrap-b 60 --level 0.1 --x-grid -14:30:64"
              " --seed 9 --out " +
              dir.sub("boot2")) == 0);
  CHECK(slurp(dir.sub("boot") + "/bands_t0.csv") ==
        slurp(dir.sub("boot2") + "/bands_t0.csv"));

  CHECK(slurp(dir.sub("sim") + "/scenario_rep000.csv") == input_before);
}

TEST_CASE("exit codes: usage 2, data 3") {
  TempDir dir;
  CHECK(run("definitely-not-a-command") == 2);
  CHECK(run("fit --out " + dir.sub("x")) == 2);       // missing required --input
  CHECK(run("fit --input " + dir.sub("missing.csv") + " --out " + dir.sub("y")) == 3);

  {
    std::ofstream bad(dir.sub("bad.csv"));
    bad << "subject,t,x1\na,0,notanumber\n";
  }
  CHECK(run("fit --input " + dir.sub("bad.csv") + " --out " + dir.sub("z")) == 3);

  // Prediction outside the time domain fails with a usage error.
  REQUIRE(run("simulate --d 1 --n-t 30 --grid 3 --seed 1 --out " + dir.sub("sim")) == 0);
  REQUIRE(run("fit --input " + dir.sub("sim") + "/scenario_rep000.csv"
              " --k 2 --outer-rounds 3 --epochs 50 --seed 1 --out " +
              dir.sub("fit")) == 0);
  CHECK(run("predict --model " + dir.sub("fit") + "/model_sim.json"
            " --times 0.5,1.5 --out " +
            dir.sub("pred")) == 2);
}

TEST_CASE("multi-subject fit with shared components") {
  TempDir dir;
  // Two subjects drawn from the same scenario, concatenated.
  REQUIRE(run("simulate --d 1 --n-t 40 --grid 4 --replicates 2 --seed 21 --out " +
              dir.sub("sim")) == 0);
  {
    std::ifstream a(dir.sub("sim") + "/scenario_rep000.csv");
    std::ifstream b(dir.sub("sim") + "/scenario_rep001.csv");
    std::ofstream merged(dir.sub("panel.csv"));
    std::string line;
    std::getline(a, line);
    merged << line << "\n";
    while (std::getline(a, line)) merged << "p1" << line.substr(3) << "\n";
    std::getline(b, line);  // skip second header
    while (std::getline(b, line)) merged << "p2" << line.substr(3) << "\n";
  }
  REQUIRE(run("fit --input " + dir.sub("panel.csv") +
              " --k 2 --outer-rounds 4 --epochs 80 --share-components"
              " --seed 5 --out " +
              dir.sub("fit")) == 0);
  CHECK(fs::exists(dir.sub("fit") + "/model_p1.json"));
  CHECK(fs::exists(dir.sub("fit") + "/model_p2.json"));

  // Shared components: the "means" block of both model files must agree.
  const std::string m1 = slurp(dir.sub("fit") + "/model_p1.json");
  const std::string m2 = slurp(dir.sub("fit") + "/model_p2.json");
  const auto means_of = [](const std::string& doc) {
    const auto at = doc.find("\"means\"");
    return doc.substr(at, doc.find(']', doc.find(']', at) + 1) - at);
  };
  CHECK(means_of(m1) == means_of(m2));
}
