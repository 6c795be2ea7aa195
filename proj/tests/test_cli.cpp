#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "qutrit_cli_test";

int run(const std::string &args) {
  const std::string cmd = std::string("SOURCE_DATE_EPOCH=1700000000 ") + QUTRIT_CLI + " " +
                          args + " > " + (kWork / "stdout.txt").string() + " 2> " +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json load(const fs::path &p) { return json::parse(slurp(p)); }

std::string stderr_text() { return slurp(kWork / "stderr.txt"); }

struct Fresh {
  Fresh() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

std::vector<std::vector<std::string>> csv_rows(const fs::path &p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#')
      continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');)
      cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("curves") {
  Fresh f;
  const fs::path out = kWork / "curves";
  REQUIRE(run("--out " + out.string() + " curves --p-grid 0,0.25,1") == 0);
  const auto rows = csv_rows(out / "curves.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"p", "negativity", "discord",
                                            "mutual_information", "classical_correlation"});
  CHECK(rows[1][1] == "0");
  CHECK(std::stod(rows[1][2]) <= 1e-6);
  CHECK(rows[2][1] == "0");
  CHECK(std::stod(rows[2][2]) == doctest::Approx(1.0 / 6).epsilon(1e-6));
  CHECK(std::stod(rows[3][1]) == doctest::Approx(1.0));
  CHECK(std::stod(rows[3][2]) == doctest::Approx(std::log2(3.0)).epsilon(1e-6));

  const std::string text = slurp(out / "curves.csv");
  CHECK(text.rfind("# command: curves\n", 0) == 0);
  CHECK(text.find("# seed: 1\n") != std::string::npos);
  const json diag = load(out / "curves_diagnostics.json");
  CHECK(diag["points"].size() == 3);
  CHECK(diag["manifest"]["command"] == "curves");

  SUBCASE("identical runs give identical files") {
    const fs::path again = kWork / "again";
    REQUIRE(run("--out " + again.string() + " curves --p-grid 0,0.25,1") == 0);
    // The manifest names the output directory; everything else must match.
    auto body = [](const std::string &s) { return s.substr(s.find("# created")); };
    CHECK(body(slurp(again / "curves.csv")) == body(text));
  }
  SUBCASE("range grid") {
    const fs::path r = kWork / "range";
    REQUIRE(run("--out " + r.string() + " curves --p-grid 0:0.1:0.05") == 0);
    CHECK(csv_rows(r / "curves.csv").size() == 4);
  }
}

TEST_CASE("curves input errors") {
  Fresh f;
  const fs::path out = kWork / "bad";
  CHECK(run("--out " + out.string() + " curves --p-grid ''") == 1);
  CHECK(stderr_text().find("empty") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "curves.csv"));
  CHECK(run("--out " + out.string() + " curves --p-grid 0.5,1.5") == 1);
  CHECK(run("--out " + out.string() + " curves --p-grid 0.5,abc") == 1);
  CHECK_FALSE(fs::exists(out / "curves.csv"));
  CHECK(run("curves --bogus") == 1);
  CHECK(run("") == 1);
}

TEST_CASE("roundtrip and reconstruct") {
  Fresh f;
  const fs::path out = kWork / "rt";
  REQUIRE(run("--out " + out.string() + " roundtrip --p 0.94 --noise-sigma 0 --monte-carlo 1") == 0);
  const json rep = load(out / "report.json");
  const json &res = rep["results"];
  CHECK(res["fidelity_to_target"].get<double>() >= 1 - 1e-5);
  CHECK(res["p_hat"]["mean"].get<double>() == doctest::Approx(0.94).epsilon(1e-5));
  CHECK(res["p_hat"]["stddev"].get<double>() == 0.0);
  CHECK(res["mean_state"].size() == 9);
  CHECK(res["mean_state"][0].size() == 9);
  CHECK(res["mean_state"][0][0].size() == 2);
  CHECK(rep["manifest"]["command"] == "roundtrip");

  SUBCASE("noisy run with calibrated error bars") {
    const fs::path noisy = kWork / "noisy";
    REQUIRE(run("--seed 4 --out " + noisy.string() +
                " roundtrip --element-sigma 0.01 --monte-carlo 30") == 0);
    const json r = load(noisy / "report.json")["results"];
    CHECK(r["fidelity_to_target"].get<double>() >= 0.95);
    CHECK(r["p_hat"]["stddev"].get<double>() > 0.0);
    CHECK(r["stddev_real"].size() == 9);

    const fs::path re = kWork / "re";
    REQUIRE(run("--seed 4 --out " + re.string() + " reconstruct " +
                (noisy / "record.json").string() + " " + (noisy / "model.json").string() +
                " --monte-carlo 30") == 0);
    CHECK(load(re / "report.json")["results"] == r);
  }
  SUBCASE("determinism") {
    const fs::path a = kWork / "a", b = kWork / "b";
    REQUIRE(run("--seed 9 --out " + a.string() + " roundtrip --noise-sigma 0.001 --monte-carlo 10") == 0);
    REQUIRE(run("--seed 9 --out " + b.string() + " roundtrip --noise-sigma 0.001 --monte-carlo 10") == 0);
    json ja = load(a / "report.json"), jb = load(b / "report.json");
    ja["manifest"].erase("output_dir");
    jb["manifest"].erase("output_dir");
    CHECK(ja == jb);
    CHECK(slurp(a / "model.json").substr(0, 40) == slurp(b / "model.json").substr(0, 40));
  }
  SUBCASE("error paths") {
    CHECK(run("roundtrip --monte-carlo 0") == 1);
    CHECK(stderr_text().find("at least one Monte Carlo member") != std::string::npos);
    CHECK(run("roundtrip --p 1.2") == 1);
    CHECK(run("roundtrip --noise-sigma 0.1 --element-sigma 0.1") == 1);

    json rec = load(out / "record.json");
    rec["values"].erase(rec["values"].size() - 1);
    const fs::path short_rec = kWork / "short.json";
    std::ofstream(short_rec) << rec.dump();
    CHECK(run("reconstruct " + short_rec.string() + " " + (out / "model.json").string()) == 1);
    CHECK(stderr_text().find("needs 15 entries, got 14") != std::string::npos);

    rec = load(out / "record.json");
    rec["sigmas"][0] = -1.0;
    const fs::path neg = kWork / "neg.json";
    std::ofstream(neg) << rec.dump();
    CHECK(run("reconstruct " + neg.string() + " " + (out / "model.json").string()) == 1);
    CHECK(stderr_text().find("sigmas[0]") != std::string::npos);

    const fs::path nuclear = kWork / "nuclear.json";
    std::ofstream(nuclear) << R"({"kind": "nuclear-polarization", "values": [1,2,3,4], "sigmas": [1,1,1,1]})";
    CHECK(run("reconstruct " + nuclear.string() + " " + (out / "model.json").string()) == 1);
    CHECK(stderr_text().find("state-measurement") != std::string::npos);

    const fs::path syntax = kWork / "syntax.json";
    std::ofstream(syntax) << "{\n\"kind\": \"state-measurement\",\n\"values\": [1,,2]}";
    CHECK(run("reconstruct " + syntax.string() + " " + (out / "model.json").string()) == 1);
    CHECK(stderr_text().find("syntax.json:3:") != std::string::npos);

    // A readout model that cannot separate |4> from |5> is a numerical failure.
    const fs::path degenerate = kWork / "degenerate.json";
    std::ofstream(degenerate) << R"({"rates": [0.8, 0.8, 0.8, 1.0, 1.0, 0.9, 0.7, 0.7, 0.7]})";
    CHECK(run("reconstruct " + (out / "record.json").string() + " " + degenerate.string()) == 2);

    const fs::path cfg = kWork / "cfg.json";
    std::ofstream(cfg) << R"({"nv": {"p_e": 2}})";
    CHECK(run("--config " + cfg.string() + " roundtrip") == 1);
  }
}

TEST_CASE("config file drives the run") {
  Fresh f;
  const fs::path cfg = kWork / "cfg.json";
  std::ofstream(cfg) << R"({"pl_model": {"rates": [0.71, 0.66, 0.74, 1.0, 0.93, 0.85, 0.69, 0.62, 0.77]}})";
  const fs::path out = kWork / "cfgrun";
  REQUIRE(run("--config " + cfg.string() + " --out " + out.string() +
              " roundtrip --p 0.5 --monte-carlo 2") == 0);
  CHECK(load(out / "model.json")["rates"][0].get<double>() == 0.71);
  CHECK(load(out / "report.json")["manifest"]["config_path"] == cfg.string());
}
