#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "ncmac/cli.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/io.hpp"

using namespace ncmac;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ncmac_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::ostringstream o, e;
  const int rc = cli::run(args, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  return rc;
}

JointConstellation orthogonal_pair() {
  return testing::make_constellation(2, {{testing::e(2, 0, std::sqrt(2.0)), testing::e(2, 1, std::sqrt(2.0))}});
}

}  // namespace

TEST_CASE("constellation round trip") {
  Rng rng(1);
  JointConstellation c = testing::random_constellation(4, {1, 2}, {4, 2}, 3.7, rng);
  c.users[0].bits = 2;
  c.users[1].bits = 1;
  const auto path = scratch("roundtrip.json").string();
  save_constellation(path, c, {"J:0.5", 30.0, 7});
  ConstellationMetadata meta;
  const JointConstellation d = load_constellation(path, &meta);
  REQUIRE(d.users.size() == 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(d.users[k].power == c.users[k].power);
    CHECK(d.users[k].bits == c.users[k].bits);
    for (std::size_t n = 0; n < c.users[k].size(); ++n) CHECK(d.users[k].symbols[n] == c.users[k].symbols[n]);
  }
  CHECK(meta.criterion == "J:0.5");
  CHECK(*meta.seed == 7);
}

TEST_CASE("loader errors") {
  Rng rng(2);
  JointConstellation c = testing::random_constellation(3, {1, 1}, {2, 2}, 1.0, rng);
  nlohmann::json j = constellation_to_json(c);
  j["powers"][1] = 1.01;
  CHECK_THROWS_WITH_AS(constellation_from_json(j), doctest::Contains("user 2"), InvalidInput);

  nlohmann::json k = constellation_to_json(c);
  k.erase("bits");
  try {
    constellation_from_json(k);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/bits");
  }
  nlohmann::json m = constellation_to_json(c);
  m["users"][0][1][2].erase(0);
  try {
    constellation_from_json(m);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/users/0/1/2");
  }
  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(load_constellation(bad.string()), SchemaError);
}

TEST_CASE("snr grid") {
  CHECK(cli::parse_grid("0:5:20") == std::vector<double>{0, 5, 10, 15, 20});
  CHECK(cli::parse_grid("16") == std::vector<double>{16});
  CHECK(cli::parse_grid("0:0.1:0.3").size() == 4);
  CHECK_THROWS_AS(cli::parse_grid("0:-1:5"), InvalidInput);
  CHECK_THROWS_AS(cli::parse_grid("a:b"), InvalidInput);
  CHECK(cli::db_to_linear(20.0) == doctest::Approx(100.0));
}

TEST_CASE("cli metrics and pep on the orthogonal pair") {
  const auto path = scratch("orth.json").string();
  save_constellation(path, orthogonal_pair());
  std::string out;
  REQUIRE(run_cli({"metrics", "--in", path, "--kinds", "b,J:0.5"}, &out) == 0);
  std::istringstream is(out);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header == "id,kind,param,value,argpair");
  CHECK(row.rfind("orth,b,,", 0) == 0);
  const double b = std::stod(row.substr(8, row.find(',', 8) - 8));
  CHECK(b == doctest::Approx(2 * std::log(3.0)).epsilon(1e-14));

  REQUIRE(run_cli({"pep", "--in", path, "--pair", "0,1", "--N", "1", "--method", "closed"}, &out) == 0);
  const auto j = nlohmann::json::parse(out);
  CHECK(std::abs(j["value"].get<double>() - 0.25) < 1e-12);
}

TEST_CASE("cli simulate is deterministic") {
  const auto path = scratch("orth_sim.json").string();
  save_constellation(path, orthogonal_pair());
  const auto a = scratch("a.csv").string(), b = scratch("b.csv").string();
  const std::vector<std::string> base{"simulate", "--in", path, "--N", "1", "--snr-db", "0:5:10", "--trials", "20000",
                                      "--target-errors", "100", "--seed", "5", "--out"};
  auto args = base;
  args.push_back(a);
  REQUIRE(run_cli(args) == 0);
  args = base;
  args.push_back(b);
  args.insert(args.begin(), {"--threads", "2"});
  REQUIRE(run_cli(args) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("snr_db,trials,errors,ser,stderr\n", 0) == 0);
}

TEST_CASE("cli construct and optimize") {
  const auto path = scratch("pilot.json").string();
  REQUIRE(run_cli({"construct", "--type", "pilot", "--T", "3", "--K", "2", "--M", "1", "--bits", "2", "--snr-db", "10",
               "--out", path}) == 0);
  const JointConstellation c = load_constellation(path);
  CHECK(c.size() == 16);
  CHECK(c.config.P == doctest::Approx(10.0));

  const auto opt = scratch("opt.json").string(), trace = scratch("trace.csv").string();
  std::string out;
  REQUIRE(run_cli({"optimize", "--criterion", "d", "--T", "3", "--K", "2", "--M", "1", "--bits", "1", "--snr-db", "10",
               "--init", "random:2", "--max-iters", "30", "--out", opt, "--trace", trace},
              &out) == 0);
  CHECK_NOTHROW(load_constellation(opt));
  CHECK(slurp(trace).rfind("iter,objective,gradnorm,step\n", 0) == 0);

  for (const char* type : {"random-ustm", "partition", "precode-1", "precode-2"}) {
    CAPTURE(type);
    CHECK(run_cli({"construct", "--type", type, "--T", "4", "--K", "2", "--M", "1", "--bits", "2", "--snr-db", "10",
               "--ustm", "random", "--out", path}) == 0);
    CHECK(load_constellation(path).size() == 16);
  }
}

TEST_CASE("cli power") {
  Rng rng(3);
  const auto path = scratch("two_user.json").string();
  save_constellation(path, testing::random_constellation(3, {1, 1}, {2, 2}, 10.0, rng));
  for (const char* mode : {"cubic", "golden", "nelder"}) {
    std::string out;
    REQUIRE(run_cli({"power", "--in", path, "--mode", mode, "--metric", "d"}, &out) == 0);
    const auto j = nlohmann::json::parse(out);
    CHECK(j.contains("theta_or_powers"));
    CHECK(j["value"].get<double>() > 0.0);
  }
}

TEST_CASE("cli errors") {
  std::string out, err;
  CHECK(run_cli({"metrics", "--in", "x.json", "--bogus"}, &out, &err) != 0);
  CHECK(run_cli({}, &out, &err) != 0);
  CHECK(run_cli({"metrics", "--in", scratch("missing.json").string()}, &out, &err) == 1);
  CHECK(err.find("error:") != std::string::npos);
  CHECK(run_cli({"simulate", "--help"}, &out, &err) == 0);
  for (const char* flag : {"--in", "--N", "--snr-db", "--trials", "--target-errors", "--seed", "--out"})
    CHECK(out.find(flag) != std::string::npos);
}
