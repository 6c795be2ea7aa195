#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>

#include "qutrit/io.hpp"

using namespace qutrit;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / "qutrit_io_test";
  fs::create_directories(d);
  return d;
}

fs::path write_file(const std::string &name, const std::string &text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

// Files carry 12 significant digits.
bool close12(const std::array<double, 9> &a, const std::array<double, 9> &b) {
  for (int i = 0; i < 9; ++i)
    if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(b[i])))
      return false;
  return true;
}

std::string message_of(const std::function<void()> &f) {
  try {
    f();
  } catch (const std::exception &e) {
    return e.what();
  }
  return "";
}

} // namespace

TEST_CASE("config parsing") {
  const io::AppConfig d = io::config_from_json(json::object());
  CHECK(d.nv.D == nv::NvConfig{}.D);
  CHECK(d.pl_model.rates == tomo::PLModel::linear_ramp().rates);

  const json j = json::parse(R"({
    "nv": {"p_n": 0.95, "T2n_star": "inf", "dephasing_law": "exponential"},
    "optimizer": {"coarse_grid_points_per_axis": 5, "threads": 2},
    "pl_model": {"linear_ramp": {"top": 2.0, "step": 0.1}},
    "mle": {"weighting": "measurement-variance", "epsilon": 1e-5}
  })");
  const io::AppConfig c = io::config_from_json(j);
  CHECK(c.nv.p_n == 0.95);
  CHECK(std::isinf(c.nv.T2n_star));
  CHECK(c.nv.dephasing_law == nv::DephasingLaw::Exponential);
  CHECK(c.optimizer.coarse_grid_points_per_axis == 5);
  CHECK(c.optimizer.threads == 2);
  CHECK(c.pl_model.rate(4) == 2.0);
  CHECK(c.mle.weighting == tomo::MleWeighting::MeasurementVariance);
  CHECK(c.mle.epsilon == 1e-5);

  // Round trip through the writer.
  const io::AppConfig back = io::config_from_json(io::to_json(c));
  CHECK(back.nv.p_n == c.nv.p_n);
  CHECK(std::isinf(back.nv.T2n_star));
  CHECK(close12(back.pl_model.rates, c.pl_model.rates));
  CHECK(back.mle.weighting == c.mle.weighting);

  auto bad = [](const char *text) {
    return message_of([&] { io::config_from_json(json::parse(text)); });
  };
  CHECK(bad(R"({"nv": {"bogus": 1}})").find("nv.bogus") != std::string::npos);
  CHECK(bad(R"({"nv": {"p_e": "high"}})").find("nv.p_e") != std::string::npos);
  CHECK(bad(R"({"nv": {"p_e": 1.5}})").find("polarizations") != std::string::npos);
  CHECK(bad(R"({"optimizer": {"threads": 1.5}})").find("optimizer.threads") != std::string::npos);
  CHECK(bad(R"({"pl_model": {}})").find("pl_model") != std::string::npos);
  CHECK(bad(R"({"pl_model": {"rates": [1, 2]}})").find("9 entries") != std::string::npos);
  CHECK(bad(R"({"extra": {}})").find("extra") != std::string::npos);
  CHECK_THROWS_AS(io::config_from_json(json::parse(R"({"mle": {"weighting": "x"}})")),
                  ValidationError);
}

TEST_CASE("config files") {
  const fs::path good = write_file("good.json", R"({"nv": {"p_n": 0.9}})");
  CHECK(io::load_config(good).nv.p_n == 0.9);

  const fs::path broken = write_file("broken.json", "{\n  \"nv\": {\n    \"p_n\": 0.9,\n  }\n}\n");
  const std::string msg = message_of([&] { io::load_config(broken); });
  CHECK(msg.find("broken.json:4:") != std::string::npos);
  CHECK_THROWS_AS(io::load_config(broken), ValidationError);
  CHECK_THROWS_AS(io::load_config(scratch_dir() / "missing.json"), ValidationError);
}

TEST_CASE("record files") {
  json j = {{"kind", "state-measurement"},
            {"values", std::vector<double>(15, 0.9)},
            {"sigmas", std::vector<double>(15, 0.01)},
            {"target_p", 0.94}};
  const io::RecordFile rf = io::record_from_json(j);
  CHECK(rf.record.kind == tomo::RecordKind::StateMeasurement);
  CHECK(rf.target_p == 0.94);
  const io::RecordFile back = io::record_from_json(io::to_json(rf));
  CHECK(back.record.values == rf.record.values);
  CHECK(back.record.sigmas == rf.record.sigmas);

  json short_rec = j;
  short_rec["values"] = std::vector<double>(14, 0.9);
  const std::string msg = message_of([&] { io::record_from_json(short_rec); });
  CHECK(msg.find("values") != std::string::npos);
  CHECK(msg.find("needs 15 entries, got 14") != std::string::npos);

  json zero_sigma = j;
  zero_sigma["sigmas"][3] = 0.0;
  CHECK(message_of([&] { io::record_from_json(zero_sigma); }).find("sigmas[3]") !=
        std::string::npos);

  json wrong_type = j;
  wrong_type["values"][2] = "x";
  CHECK(message_of([&] { io::record_from_json(wrong_type); }).find("values[2]") !=
        std::string::npos);

  json wrong_kind = j;
  wrong_kind["kind"] = "spectrum";
  CHECK_THROWS_AS(io::record_from_json(wrong_kind), ValidationError);

  json nuclear = {{"kind", "nuclear-polarization"},
                  {"values", {1, 2, 3, 4}},
                  {"sigmas", {1, 1, 1, 1}},
                  {"manifest", {{"seed", 3}}}};
  CHECK(io::record_from_json(nuclear).record.values.size() == 4);

  const fs::path p = write_file("rec.json", j.dump());
  CHECK(io::load_record(p).record.values == rf.record.values);
}

TEST_CASE("model files") {
  const tomo::PLModel m = tomo::PLModel::linear_ramp();
  CHECK(close12(io::model_from_json(io::to_json(m)).rates, m.rates));
  CHECK_THROWS_AS(io::model_from_json(json{{"rates", std::vector<double>(9, 1.0)}}),
                  ValidationError);
  CHECK_THROWS_AS(io::model_from_json(json{{"rates", std::vector<double>(8, 1.0)}}),
                  ValidationError);
  CHECK_THROWS_AS(io::model_from_json(json{{"rate", std::vector<double>(9, 1.0)}}),
                  ValidationError);
}

TEST_CASE("numbers and matrices") {
  CHECK(io::round12(1.0 / 3) == 0.333333333333);
  CHECK(io::format12(1.0 / 3) == "0.333333333333");
  CHECK(io::format12(-0.0) == "0");
  CHECK(io::round12(0.0) == 0.0);

  ComplexMatrix m(2, 2);
  m << Complex(1, 2), Complex(3, -4), Complex(0.5, 0), Complex(0, 1.0 / 3);
  const json j = io::matrix_to_json(m);
  CHECK(j[0][1][0] == 3.0);
  CHECK(j[0][1][1] == -4.0);
  CHECK(j.dump().find("0.333333333333") != std::string::npos);
  const ComplexMatrix back = io::matrix_from_json(j);
  CHECK((back - m).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(io::matrix_from_json(json::parse("[[1, 2]]")), ValidationError);
  CHECK_THROWS_AS(io::matrix_from_json(json::parse("[[[1, 2]], [[1, 2], [3, 4]]]")),
                  ValidationError);
}

TEST_CASE("manifest and atomic writes") {
  setenv("SOURCE_DATE_EPOCH", "0", 1);
  const io::RunManifest m = io::make_manifest("curves", "cfg.json", 7, "out");
  unsetenv("SOURCE_DATE_EPOCH");
  CHECK(m.created == "1970-01-01T00:00:00Z");
  const json j = io::to_json(m);
  CHECK(j["seed"] == 7);
  CHECK(j["command"] == "curves");
  const std::string c = io::manifest_comment(m);
  CHECK(c.find("# seed: 7\n") != std::string::npos);
  CHECK(c.find("# command: curves\n") != std::string::npos);

  const fs::path p = scratch_dir() / "atomic.txt";
  io::write_atomic(p, "hello\n");
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "hello");
  CHECK_FALSE(fs::exists(scratch_dir() / "atomic.txt.tmp"));
  CHECK_THROWS_AS(io::write_atomic(scratch_dir() / "no" / "such" / "dir.txt", "x"),
                  ValidationError);
}
