#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "warpsol_cli/cli.hpp"

using nlohmann::ordered_json;

namespace {

struct Run {
  int exit_code = 0;
  std::string out;
  std::string err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.exit_code = warpsol::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

ordered_json parse_out(const Run& r) { return ordered_json::parse(r.out); }

// RAII temp file holding config text for the --config path.
class TempFile {
public:
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path_ = "warpsol_cli_test_" + std::to_string(counter++) + ".json";
    std::ofstream(path_) << contents;
  }
  ~TempFile() { std::remove(path_.c_str()); }
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

const char* kGaussianConfig = R"json({
  "mode": "verify",
  "metric": {"dimension": 3, "exponent": "0",
             "lower": [-15, -15, -15], "upper": [15, 15, 15], "inset": 0.2},
  "soliton": {"warping": "1", "potential": "(x1^2 + x2^2 + x3^2)/4",
              "lambda": 0.4, "rho": 0.1, "fiber_dimension": 2, "fiber_mu": 0.5},
  "sampling": {"points": 120, "seed": 7}
})json";

}  // namespace

TEST_CASE("verify on a gallery example: exit 0 and stable json shape") {
  const Run r = run_cli({"verify", "--example", "hyperbolic_traceless",
                         "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json doc = parse_out(r);

  const std::vector<std::string> expected_keys{"config", "residuals", "constants",
                                               "probes", "verdict", "meta"};
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  CHECK(keys == expected_keys);

  CHECK(doc["verdict"] == "pass");
  CHECK(doc["meta"]["schema"] == warpsol::cli::kReportSchema);
  CHECK(doc["residuals"]["base_equation"]["sup"].get<double>() <= 1e-6);
  CHECK(doc["constants"]["declared_rho"].get<double>() ==
        doctest::Approx(1.0 / 3.0));
  CHECK(doc["probes"].contains("scalar_bound"));
}

TEST_CASE("json reports are byte identical modulo timing") {
  auto stripped = [](const Run& r) {
    ordered_json doc = parse_out(r);
    doc.erase("meta");
    return doc.dump();
  };
  const std::vector<std::string> args{"verify", "--example", "cosh_traceless",
                                      "--points", "150", "--seed", "31",
                                      "--format", "json"};
  const Run a = run_cli(args);
  const Run b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(stripped(a) == stripped(b));

  // a different seed must change the sampled residual statistics
  std::vector<std::string> other = args;
  other[6] = "32";
  CHECK(stripped(a) != stripped(run_cli(other)));
}

TEST_CASE("config file drives a full verify run") {
  const TempFile cfg(kGaussianConfig);
  const Run r = run_cli({"verify", "--config", cfg.path(), "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json doc = parse_out(r);
  CHECK(doc["verdict"] == "pass");
  CHECK(doc["config"]["soliton"]["rho"].get<double>() == doctest::Approx(0.1));
  CHECK(doc["residuals"]["catino"]["sup"].get<double>() <= 1e-12);
  CHECK(doc["probes"]["scalar_bound"]["flag"] == "consistent");
}

TEST_CASE("flags override config values") {
  const TempFile cfg(kGaussianConfig);
  const Run r = run_cli({"verify", "--config", cfg.path(), "--points", "80",
                         "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json doc = parse_out(r);
  CHECK(doc["config"]["sampling"]["points"].get<int>() == 80);
  CHECK(doc["residuals"]["points"].get<int>() == 80);
}

TEST_CASE("a broken declaration exits 1 with verdict fail") {
  const TempFile cfg(R"json({
    "mode": "verify",
    "metric": {"dimension": 3, "exponent": "0",
               "lower": [-15, -15, -15], "upper": [15, 15, 15], "inset": 0.2},
    "soliton": {"warping": "1", "potential": "(x1^2 + x2^2 + x3^2)/4",
                "lambda": 0.4, "rho": 0.2, "fiber_dimension": 2, "fiber_mu": 0.5},
    "sampling": {"points": 60, "seed": 7}
  })json");
  const Run r = run_cli({"verify", "--config", cfg.path(), "--format", "json"});
  CHECK(r.exit_code == 1);
  const ordered_json doc = parse_out(r);
  CHECK(doc["verdict"] == "fail");
  CHECK(doc["residuals"]["all_within_tolerance"] == false);
}

TEST_CASE("configuration problems exit 2 with a message on stderr") {
  SUBCASE("unknown example") {
    const Run r = run_cli({"verify", "--example", "klein_bottle"});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("unknown example") != std::string::npos);
    CHECK(r.out.empty());
  }
  SUBCASE("missing config file") {
    const Run r = run_cli({"verify", "--config", "does_not_exist.json"});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("cannot open") != std::string::npos);
  }
  SUBCASE("malformed json") {
    const TempFile cfg("{not json");
    const Run r = run_cli({"verify", "--config", cfg.path()});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("not valid JSON") != std::string::npos);
  }
  SUBCASE("expression error carries a byte offset") {
    const TempFile cfg(R"json({
      "mode": "verify",
      "metric": {"dimension": 2, "exponent": "1 + sin(x1)",
                 "lower": [-1, -1], "upper": [1, 1]},
      "soliton": {"warping": "1", "potential": "0", "lambda": 0, "rho": 0.1}
    })json");
    const Run r = run_cli({"verify", "--config", cfg.path()});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("unknown function 'sin'") != std::string::npos);
    CHECK(r.err.find("byte 4") != std::string::npos);
  }
  SUBCASE("warping must stay positive") {
    const TempFile cfg(R"json({
      "mode": "verify",
      "metric": {"dimension": 2, "exponent": "0",
                 "lower": [-2, -2], "upper": [2, 2], "inset": 0.2},
      "soliton": {"warping": "x1", "potential": "0",
                  "lambda_expr": "0", "fiber_dimension": 1, "fiber_mu": 0}
    })json");
    const Run r = run_cli({"verify", "--config", cfg.path()});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("not positive") != std::string::npos);
  }
  SUBCASE("no subcommand and no mode") {
    const Run r = run_cli({"--example", "cosh_traceless"});
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("no mode") != std::string::npos);
  }
}

TEST_CASE("gallery mode emits four verified reports") {
  const Run r = run_cli({"gallery", "--points", "120", "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json doc = parse_out(r);
  REQUIRE(doc["reports"].size() == 4);
  for (const auto& rep : doc["reports"]) {
    CHECK(rep["verdict"] == "pass");
    CHECK(rep["residuals"]["all_within_tolerance"] == true);
  }
  CHECK(doc["verdict"] == "pass");
}

TEST_CASE("arclength probe reports the incompleteness integral") {
  const Run r = run_cli({"arclength", "--example", "halfspace_steady",
                         "--ray", "last-axis", "--from", "1", "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json a = parse_out(r)["probes"]["arclength"];
  CHECK(a["converged"] == true);
  CHECK(std::abs(a["value"].get<double>() - 1.0) <= 1e-6);
  CHECK(a["flag"].get<std::string>().find("incomplete") != std::string::npos);
}

TEST_CASE("volume probe accepts an explicit weight expression") {
  const TempFile cfg(kGaussianConfig);
  const Run r = run_cli({"volume", "--config", cfg.path(), "--radii", "8",
                         "--samples", "48", "--weight",
                         "(x1^2 + x2^2 + x3^2)/4", "--format", "json"});
  REQUIRE(r.exit_code == 0);
  const ordered_json v = parse_out(r)["probes"]["volume"];
  const double target = std::pow(4.0 * std::acos(-1.0), 1.5);
  CHECK(std::abs(v["estimates"][0]["value"].get<double>() - target) / target <= 0.01);
}

TEST_CASE("text format prints fixed-width rows with nine significant digits") {
  const Run r = run_cli({"verify", "--example", "schouten_linear"});
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("verdict") != std::string::npos);
  CHECK(r.out.find("0.166666667") != std::string::npos);  // declared rho = 1/6
  CHECK(r.out.find("constants.alpha") != std::string::npos);
}

TEST_CASE("--output writes the report to a file") {
  const std::string path = "warpsol_cli_test_report.json";
  const Run r = run_cli({"verify", "--example", "cosh_traceless", "--points",
                         "60", "--format", "json", "--output", path});
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.empty());
  std::ifstream in(path);
  REQUIRE(in.good());
  ordered_json doc;
  in >> doc;
  CHECK(doc["verdict"] == "pass");
  std::remove(path.c_str());
}

TEST_CASE("config file can carry the mode") {
  const TempFile cfg(kGaussianConfig);  // mode: verify inside the file
  const Run r = run_cli({"--config", cfg.path(), "--format", "json"});
  REQUIRE(r.exit_code == 0);
  CHECK(parse_out(r)["config"]["mode"] == "verify");
}
