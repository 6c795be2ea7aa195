#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qutrit/correlations.hpp"
#include "qutrit/io.hpp"
#include "qutrit/nv_model.hpp"
#include "qutrit/tomography.hpp"

namespace fs = std::filesystem;
using namespace qutrit;
using io::json;

namespace {

struct Globals {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

// Below this a record sigma means "noiseless".
constexpr double kNoiselessSigma = 1e-12;

io::AppConfig load(const Globals &g) {
  return g.config_path.empty() ? io::AppConfig{} : io::load_config(g.config_path);
}

fs::path output_dir(const Globals &g) {
  fs::path dir(g.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw ValidationError("output directory '" + g.out_dir + "' cannot be created");
  return dir;
}

std::string dump(const json &j) { return j.dump(2) + "\n"; }

// "a,b,c" or "start:stop:step".
std::vector<double> parse_grid(const std::string &text) {
  std::vector<double> grid;
  auto number = [&](const std::string &s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != s.size())
      throw ValidationError("--p-grid: '" + s + "' is not a number");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ':');)
      parts.push_back(part);
    if (parts.size() != 3)
      throw ValidationError("--p-grid: range form is start:stop:step");
    const double a = number(parts[0]), b = number(parts[1]), h = number(parts[2]);
    if (!(h > 0) || b < a)
      throw ValidationError("--p-grid: range needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
    for (long k = 0; k <= n; ++k)
      grid.push_back(std::min(a + k * h, b));
  } else {
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty())
        grid.push_back(number(part));
  }
  if (grid.empty())
    throw ValidationError("--p-grid: grid is empty");
  for (double p : grid)
    if (!(p >= 0 && p <= 1))
      throw ValidationError("--p-grid: p = " + io::format12(p) + " outside [0, 1]");
  return grid;
}

// --------------------------------------------------------------------------

int cmd_curves(const Globals &g, const std::string &grid_text) {
  const std::vector<double> grid = parse_grid(grid_text);
  const io::AppConfig cfg = load(g);
  const fs::path dir = output_dir(g);
  const io::RunManifest manifest = io::make_manifest("curves", g.config_path, g.seed, g.out_dir);

  std::ostringstream csv;
  csv << io::manifest_comment(manifest)
      << "p,negativity,discord,mutual_information,classical_correlation\n";
  json points = json::array();
  for (double p : grid) {
    const CorrelationReport r = quantum_discord(make_isotropic(p), cfg.optimizer);
    csv << io::format12(p) << "," << io::format12(r.negativity) << ","
        << io::format12(r.discord) << "," << io::format12(r.mutual_information) << ","
        << io::format12(r.classical_correlation) << "\n";
    json basis = json::array();
    for (double a : r.optimizer_basis.as_array())
      basis.push_back(io::round12(a));
    points.push_back({{"p", io::round12(p)},
                      {"optimizer_basis", basis},
                      {"optimizer_evaluations", r.optimizer_evals}});
  }
  json diag = {{"manifest", io::to_json(manifest)},
               {"optimizer", io::to_json(cfg)["optimizer"]},
               {"basis_parameter_order",
                json::array({"alpha", "beta", "gamma", "psi", "theta", "phi"})},
               {"points", points}};
  io::write_atomic(dir / "curves.csv", csv.str());
  io::write_atomic(dir / "curves_diagnostics.json", dump(diag));
  std::cout << "wrote " << (dir / "curves.csv").string() << " ("
            << grid.size() << " points)\n";
  return 0;
}

json raw_to_json(const tomo::RawStateEstimate &raw) {
  const auto x = raw.element_vector();
  json v = json::array(), s = json::array();
  for (int i = 0; i < 15; ++i) {
    v.push_back(io::round12(x(i)));
    s.push_back(io::round12(raw.sigmas[i]));
  }
  return {{"order", "rho_11..rho_99, re/im rho_15, re/im rho_59, re/im rho_19"},
          {"values", v},
          {"sigmas", s}};
}

// Shared by roundtrip and reconstruct: the analysis depends only on the
// record, the model, M and the seed.
json analyse(const io::RecordFile &rf, const tomo::PLModel &model, int M,
             std::uint64_t seed, const io::AppConfig &cfg) {
  if (rf.record.kind != tomo::RecordKind::StateMeasurement)
    throw ValidationError("record kind must be state-measurement, got " +
                          std::string(tomo::to_string(rf.record.kind)));
  if (M < 1)
    throw ValidationError("--monte-carlo: at least one Monte Carlo member required");

  const tomo::RawStateEstimate raw = tomo::solve_elements(rf.record, model);
  const tomo::MleResult central = tomo::mle_reconstruct(raw, cfg.mle);
  const tomo::EnsembleSummary ens = tomo::monte_carlo_reconstruct(
      rf.record, model, M, seed + 1, cfg.mle, cfg.optimizer.threads);

  std::vector<DensityMatrix> states;
  int converged = 0;
  for (const auto &m : ens.members) {
    states.push_back(m.state);
    converged += m.converged ? 1 : 0;
  }
  const tomo::PDistribution pd = tomo::estimate_p_ensemble(states, make_isotropic);
  const tomo::PEstimate p_mean = tomo::estimate_p(ens.mean, make_isotropic);

  json samples = json::array();
  for (double p : pd.samples)
    samples.push_back(io::round12(p));
  json out = {
      {"monte_carlo_members", M},
      {"raw_elements", raw_to_json(raw)},
      {"central_reconstruction",
       {{"state", io::matrix_to_json(central.state.matrix())},
        {"objective", io::round12(central.objective)},
        {"converged", central.converged}}},
      {"mean_state", io::matrix_to_json(ens.mean.matrix())},
      {"stddev_real", io::real_matrix_to_json(ens.stddev_re)},
      {"stddev_imag", io::real_matrix_to_json(ens.stddev_im)},
      {"members_converged", converged},
      {"p_hat",
       {{"mean", io::round12(pd.mean)},
        {"stddev", io::round12(pd.stddev)},
        {"of_mean_state", io::round12(p_mean.p_hat)},
        {"samples", samples}}},
  };
  if (rf.target_p) {
    const DensityMatrix target = make_isotropic(*rf.target_p);
    out["target_p"] = io::round12(*rf.target_p);
    out["fidelity_to_target"] = io::round12(fidelity(ens.mean, target));
    out["central_reconstruction"]["fidelity_to_target"] =
        io::round12(fidelity(central.state, target));
  }
  if (converged < M)
    std::cerr << "warning: " << M - converged << " of " << M
              << " reconstructions hit the iteration budget\n";
  return out;
}

void print_summary(const json &results) {
  std::cout << "p_hat = " << results["p_hat"]["mean"].get<double>() << " +- "
            << results["p_hat"]["stddev"].get<double>();
  if (results.contains("fidelity_to_target"))
    std::cout << ", fidelity to target = "
              << results["fidelity_to_target"].get<double>();
  std::cout << "\n";
}

struct RoundtripArgs {
  double p = 0.94;
  double noise_sigma = 0.0;
  double element_sigma = 0.0;
  int M = 100;
  bool realistic = false;
};

int cmd_roundtrip(const Globals &g, const RoundtripArgs &a) {
  if (!(a.p >= 0 && a.p <= 1))
    throw ValidationError("--p must lie in [0, 1]");
  if (a.M < 1)
    throw ValidationError("--monte-carlo: at least one Monte Carlo member required");
  if (a.noise_sigma < 0 || a.element_sigma < 0)
    throw ValidationError("noise sigmas must be >= 0");
  if (a.noise_sigma > 0 && a.element_sigma > 0)
    throw ValidationError("give either --noise-sigma or --element-sigma, not both");
  const io::AppConfig cfg = load(g);
  const fs::path dir = output_dir(g);
  // Round the model through its file form so reconstruct sees the same numbers.
  const tomo::PLModel model = io::model_from_json(io::to_json(cfg.pl_model));

  const auto prep = nv::prepare_isotropic(
      a.p, cfg.nv, a.realistic ? nv::PrepMode::Realistic : nv::PrepMode::Ideal);
  double sigma = a.noise_sigma;
  if (a.element_sigma > 0)
    sigma = tomo::calibrate_record_sigma(model, a.element_sigma);
  tomo::NoiseSpec noise{kNoiselessSigma, std::nullopt};
  if (sigma > 0)
    noise = {sigma, g.seed};
  const tomo::PLRecord simulated = tomo::simulate_measurement(prep.final_state, model, noise);
  const io::RecordFile rf = io::record_from_json(io::to_json(io::RecordFile{simulated, a.p}));

  const json results = analyse(rf, model, a.M, g.seed, cfg);
  const io::RunManifest manifest = io::make_manifest("roundtrip", g.config_path, g.seed, g.out_dir);
  json report = {{"manifest", io::to_json(manifest)},
                 {"parameters",
                  {{"p", io::round12(a.p)},
                   {"preparation", a.realistic ? "realistic" : "ideal"},
                   {"record_sigma", io::round12(noise.sigma)},
                   {"element_sigma_target", io::round12(a.element_sigma)}}},
                 {"prepared_state_fidelity",
                  io::round12(fidelity(prep.final_state, make_isotropic(a.p)))},
                 {"results", results}};
  json rec = io::to_json(rf);
  json mod = io::to_json(model);
  rec["manifest"] = io::to_json(manifest);
  mod["manifest"] = io::to_json(manifest);
  io::write_atomic(dir / "record.json", dump(rec));
  io::write_atomic(dir / "model.json", dump(mod));
  io::write_atomic(dir / "report.json", dump(report));
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  print_summary(results);
  return 0;
}

int cmd_reconstruct(const Globals &g, const std::string &record_path,
                    const std::string &model_path, int M) {
  const io::AppConfig cfg = load(g);
  const io::RecordFile rf = io::load_record(record_path);
  const tomo::PLModel model = io::load_model(model_path);
  const fs::path dir = output_dir(g);
  const json results = analyse(rf, model, M, g.seed, cfg);
  const io::RunManifest manifest =
      io::make_manifest("reconstruct", g.config_path, g.seed, g.out_dir);
  json report = {{"manifest", io::to_json(manifest)},
                 {"inputs", {{"record", record_path}, {"model", model_path}}},
                 {"results", results}};
  io::write_atomic(dir / "report.json", dump(report));
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
  print_summary(results);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Two-qutrit isotropic states: correlations, NV preparation and tomography"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON config (sections nv, optimizer, pl_model, mle)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();

  std::string grid = "0:1:0.05";
  auto *curves = app.add_subcommand("curves", "Negativity, discord, mutual information and "
                                              "classical correlation of isotropic states");
  curves->fallthrough();
  curves->add_option("--p-grid", grid, "Comma list or start:stop:step")->capture_default_str();

  RoundtripArgs rt;
  auto *roundtrip = app.add_subcommand(
      "roundtrip", "Prepare, simulate readout, reconstruct with Monte Carlo error bars");
  roundtrip->fallthrough();
  roundtrip->add_option("--p", rt.p, "Isotropic parameter")->capture_default_str();
  roundtrip->add_option("--noise-sigma", rt.noise_sigma,
                        "Per-readout Gaussian sigma (0 = noiseless)")
      ->capture_default_str();
  roundtrip->add_option("--element-sigma", rt.element_sigma,
                        "Calibrate the readout sigma to this RMS element error bar");
  roundtrip->add_option("--monte-carlo", rt.M, "Monte Carlo members")->capture_default_str();
  roundtrip->add_flag("--realistic", rt.realistic,
                      "Start from the configured polarizations instead of ideal ones");

  std::string record_path, model_path;
  int rec_M = 100;
  auto *reconstruct =
      app.add_subcommand("reconstruct", "Reconstruct from a record file and a PL model file");
  reconstruct->fallthrough();
  reconstruct->add_option("record", record_path, "Record JSON")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("model", model_path, "PL model JSON")->required()->check(CLI::ExistingFile);
  reconstruct->add_option("--monte-carlo", rec_M, "Monte Carlo members")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (curves->parsed())
      return cmd_curves(g, grid);
    if (roundtrip->parsed())
      return cmd_roundtrip(g, rt);
    return cmd_reconstruct(g, record_path, model_path, rec_M);
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
