#include "qutrit/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace qutrit::io {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void field_error(const std::string &where, const std::string &what) {
  throw ValidationError("field '" + where + "': " + what);
}

void reject_unknown(const json &obj, const std::string &where,
                    const std::set<std::string> &known) {
  if (!obj.is_object())
    field_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto &[key, _] : obj.items())
    if (!known.contains(key))
      field_error(where.empty() ? key : where + "." + key, "unknown key");
}

std::string join(const std::string &where, const std::string &key) {
  return where.empty() ? key : where + "." + key;
}

// JSON has no infinity; the strings "inf" / "infinity" stand in for it.
double number_at(const json &obj, const std::string &where, const std::string &key) {
  const json &v = obj.at(key);
  if (v.is_number())
    return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "infinity")
      return std::numeric_limits<double>::infinity();
  }
  field_error(join(where, key), "expected a number");
}

void read_number(const json &obj, const std::string &where, const std::string &key,
                 double &out) {
  if (obj.contains(key))
    out = number_at(obj, where, key);
}

void read_int(const json &obj, const std::string &where, const std::string &key,
              int &out) {
  if (!obj.contains(key))
    return;
  const json &v = obj.at(key);
  if (!v.is_number_integer())
    field_error(join(where, key), "expected an integer");
  out = v.get<int>();
}

std::vector<double> number_array(const json &obj, const std::string &where,
                                 const std::string &key) {
  if (!obj.contains(key))
    field_error(join(where, key), "missing");
  const json &v = obj.at(key);
  if (!v.is_array())
    field_error(join(where, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      field_error(join(where, key) + "[" + std::to_string(i) + "]",
                  "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

json number_or_inf(double x) {
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  return round12(x);
}

nv::NvConfig nv_from_json(const json &j) {
  const std::string w = "nv";
  reject_unknown(j, w,
                 {"D", "Q", "A", "omega_e", "omega_n", "rabi_mw", "rabi_rf", "T1e",
                  "T1n", "T2e_star", "T2n_star", "p_e", "p_n", "t_wait",
                  "dephasing_law"});
  nv::NvConfig c;
  read_number(j, w, "D", c.D);
  read_number(j, w, "Q", c.Q);
  read_number(j, w, "A", c.A);
  read_number(j, w, "omega_e", c.omega_e);
  read_number(j, w, "omega_n", c.omega_n);
  read_number(j, w, "rabi_mw", c.rabi_mw);
  read_number(j, w, "rabi_rf", c.rabi_rf);
  read_number(j, w, "T1e", c.T1e);
  read_number(j, w, "T1n", c.T1n);
  read_number(j, w, "T2e_star", c.T2e_star);
  read_number(j, w, "T2n_star", c.T2n_star);
  read_number(j, w, "p_e", c.p_e);
  read_number(j, w, "p_n", c.p_n);
  read_number(j, w, "t_wait", c.t_wait);
  if (j.contains("dephasing_law")) {
    const json &v = j.at("dephasing_law");
    if (v == "gaussian")
      c.dephasing_law = nv::DephasingLaw::Gaussian;
    else if (v == "exponential")
      c.dephasing_law = nv::DephasingLaw::Exponential;
    else
      field_error("nv.dephasing_law", "expected \"gaussian\" or \"exponential\"");
  }
  c.validate();
  return c;
}

OptimizerConfig optimizer_from_json(const json &j) {
  const std::string w = "optimizer";
  reject_unknown(j, w,
                 {"coarse_grid_points_per_axis", "refinement_restarts",
                  "convergence_tol", "max_iterations", "threads"});
  OptimizerConfig c;
  read_int(j, w, "coarse_grid_points_per_axis", c.coarse_grid_points_per_axis);
  read_int(j, w, "refinement_restarts", c.refinement_restarts);
  read_number(j, w, "convergence_tol", c.convergence_tol);
  read_int(j, w, "max_iterations", c.max_iterations);
  read_int(j, w, "threads", c.threads);
  c.validate();
  return c;
}

tomo::PLModel pl_model_section(const json &j) {
  reject_unknown(j, "pl_model", {"rates", "linear_ramp"});
  if (j.contains("rates") == j.contains("linear_ramp"))
    field_error("pl_model", "give exactly one of \"rates\" or \"linear_ramp\"");
  if (j.contains("rates"))
    return model_from_json(j);
  const json &r = j.at("linear_ramp");
  reject_unknown(r, "pl_model.linear_ramp", {"top", "step"});
  double top = 1.0, step = 0.04;
  read_number(r, "pl_model.linear_ramp", "top", top);
  read_number(r, "pl_model.linear_ramp", "step", step);
  return tomo::PLModel::linear_ramp(top, step);
}

tomo::MleOptions mle_from_json(const json &j) {
  const std::string w = "mle";
  reject_unknown(j, w,
                 {"weighting", "epsilon", "sigma_floor", "max_iterations",
                  "max_restarts"});
  tomo::MleOptions o;
  if (j.contains("weighting")) {
    const json &v = j.at("weighting");
    if (v == "estimated-element")
      o.weighting = tomo::MleWeighting::EstimatedElement;
    else if (v == "measurement-variance")
      o.weighting = tomo::MleWeighting::MeasurementVariance;
    else
      field_error("mle.weighting",
                  "expected \"estimated-element\" or \"measurement-variance\"");
  }
  read_number(j, w, "epsilon", o.epsilon);
  read_number(j, w, "sigma_floor", o.sigma_floor);
  read_int(j, w, "max_iterations", o.max_iterations);
  read_int(j, w, "max_restarts", o.max_restarts);
  if (!(o.epsilon > 0) || !(o.sigma_floor > 0))
    field_error("mle", "epsilon and sigma_floor must be > 0");
  if (o.max_iterations < 1 || o.max_restarts < 0)
    field_error("mle", "max_iterations must be >= 1 and max_restarts >= 0");
  return o;
}

std::string utc_timestamp() {
  std::time_t t;
  if (const char *sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde)
    t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  else
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

} // namespace

// ---------------------------------------------------------------------------

json read_json_file(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error &e) {
    // Convert the byte offset into a line and column.
    const std::size_t pos = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << path.string() << ":" << line << ":" << col << ": JSON syntax error";
    throw ValidationError(os.str());
  }
}

AppConfig config_from_json(const json &j) {
  reject_unknown(j, "", {"nv", "optimizer", "pl_model", "mle"});
  AppConfig c;
  if (j.contains("nv"))
    c.nv = nv_from_json(j.at("nv"));
  if (j.contains("optimizer"))
    c.optimizer = optimizer_from_json(j.at("optimizer"));
  if (j.contains("pl_model"))
    c.pl_model = pl_model_section(j.at("pl_model"));
  if (j.contains("mle"))
    c.mle = mle_from_json(j.at("mle"));
  return c;
}

AppConfig load_config(const fs::path &path) {
  const json j = read_json_file(path);
  try {
    return config_from_json(j);
  } catch (const ValidationError &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json to_json(const AppConfig &cfg) {
  const auto &n = cfg.nv;
  json nvj = {{"D", round12(n.D)},
              {"Q", round12(n.Q)},
              {"A", round12(n.A)},
              {"omega_e", round12(n.omega_e)},
              {"omega_n", round12(n.omega_n)},
              {"rabi_mw", round12(n.rabi_mw)},
              {"rabi_rf", round12(n.rabi_rf)},
              {"T1e", number_or_inf(n.T1e)},
              {"T1n", number_or_inf(n.T1n)},
              {"T2e_star", number_or_inf(n.T2e_star)},
              {"T2n_star", number_or_inf(n.T2n_star)},
              {"p_e", round12(n.p_e)},
              {"p_n", round12(n.p_n)},
              {"t_wait", round12(n.t_wait)},
              {"dephasing_law", n.dephasing_law == nv::DephasingLaw::Gaussian
                                    ? "gaussian"
                                    : "exponential"}};
  const auto &o = cfg.optimizer;
  json optj = {{"coarse_grid_points_per_axis", o.coarse_grid_points_per_axis},
               {"refinement_restarts", o.refinement_restarts},
               {"convergence_tol", round12(o.convergence_tol)},
               {"max_iterations", o.max_iterations},
               {"threads", o.threads}};
  const auto &m = cfg.mle;
  json mlej = {{"weighting", m.weighting == tomo::MleWeighting::EstimatedElement
                                 ? "estimated-element"
                                 : "measurement-variance"},
               {"epsilon", round12(m.epsilon)},
               {"sigma_floor", round12(m.sigma_floor)},
               {"max_iterations", m.max_iterations},
               {"max_restarts", m.max_restarts}};
  return {{"nv", nvj}, {"optimizer", optj}, {"pl_model", to_json(cfg.pl_model)},
          {"mle", mlej}};
}

// ---------------------------------------------------------------------------

RecordFile record_from_json(const json &j) {
  reject_unknown(j, "", {"kind", "values", "sigmas", "target_p", "manifest"});
  if (!j.contains("kind") || !j.at("kind").is_string())
    field_error("kind", "expected a string");
  RecordFile rf;
  rf.record.kind = tomo::record_kind_from_string(j.at("kind").get<std::string>());
  rf.record.values = number_array(j, "", "values");
  rf.record.sigmas = number_array(j, "", "sigmas");
  const std::size_t n = tomo::record_length(rf.record.kind);
  for (const char *key : {"values", "sigmas"}) {
    const auto &v = std::string(key) == "values" ? rf.record.values : rf.record.sigmas;
    if (v.size() != n)
      field_error(key, "kind " + std::string(tomo::to_string(rf.record.kind)) +
                           " needs " + std::to_string(n) + " entries, got " +
                           std::to_string(v.size()));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!(rf.record.sigmas[i] > 0))
      field_error("sigmas[" + std::to_string(i) + "]", "must be > 0");
  if (j.contains("target_p")) {
    const double p = number_at(j, "", "target_p");
    if (!(p >= 0 && p <= 1))
      field_error("target_p", "must lie in [0, 1]");
    rf.target_p = p;
  }
  rf.record.validate();
  return rf;
}

json to_json(const RecordFile &rf) {
  json values = json::array(), sigmas = json::array();
  for (double v : rf.record.values)
    values.push_back(round12(v));
  for (double s : rf.record.sigmas)
    sigmas.push_back(round12(s));
  json j = {{"kind", tomo::to_string(rf.record.kind)},
            {"values", values},
            {"sigmas", sigmas}};
  if (rf.target_p)
    j["target_p"] = round12(*rf.target_p);
  return j;
}

RecordFile load_record(const fs::path &path) {
  const json j = read_json_file(path);
  try {
    return record_from_json(j);
  } catch (const ValidationError &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

tomo::PLModel model_from_json(const json &j) {
  if (!j.is_object())
    field_error("<root>", "expected an object");
  for (const auto &[key, _] : j.items())
    if (key != "rates" && key != "manifest")
      field_error(key, "unknown key");
  const auto rates = number_array(j, "", "rates");
  if (rates.size() != 9)
    field_error("rates", "needs 9 entries, got " + std::to_string(rates.size()));
  tomo::PLModel m;
  std::copy(rates.begin(), rates.end(), m.rates.begin());
  m.validate();
  return m;
}

json to_json(const tomo::PLModel &model) {
  json rates = json::array();
  for (double r : model.rates)
    rates.push_back(round12(r));
  return {{"rates", rates}};
}

tomo::PLModel load_model(const fs::path &path) {
  const json j = read_json_file(path);
  try {
    return model_from_json(j);
  } catch (const ValidationError &e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double round12(double x) {
  if (!std::isfinite(x) || x == 0.0)
    return x == 0.0 ? 0.0 : x;
  return std::stod(format12(x));
}

std::string format12(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << (x == 0.0 ? 0.0 : x);
  return os.str();
}

json matrix_to_json(const ComplexMatrix &m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c)
      row.push_back(json::array({round12(m(r, c).real()), round12(m(r, c).imag())}));
    rows.push_back(row);
  }
  return rows;
}

ComplexMatrix matrix_from_json(const json &j) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError("matrix: expected an array of rows");
  const auto rows = static_cast<int>(j.size());
  const auto cols = static_cast<int>(j[0].size());
  ComplexMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != cols)
      throw ValidationError("matrix: row " + std::to_string(r) + " has the wrong length");
    for (int c = 0; c < cols; ++c) {
      const json &e = j[r][c];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ValidationError("matrix: element (" + std::to_string(r) + ", " +
                              std::to_string(c) + ") is not an [re, im] pair");
      m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

json real_matrix_to_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c)
      row.push_back(round12(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------

RunManifest make_manifest(std::string command, std::string config_path,
                          std::uint64_t seed, std::string output_dir) {
  return RunManifest{std::move(command), std::move(config_path), seed,
                     std::move(output_dir), utc_timestamp()};
}

json to_json(const RunManifest &m) {
  return {{"command", m.command},
          {"config_path", m.config_path},
          {"seed", m.seed},
          {"output_dir", m.output_dir},
          {"created", m.created}};
}

std::string manifest_comment(const RunManifest &m) {
  std::ostringstream os;
  os << "# command: " << m.command << "\n"
     << "# config_path: " << m.config_path << "\n"
     << "# seed: " << m.seed << "\n"
     << "# output_dir: " << m.output_dir << "\n"
     << "# created: " << m.created << "\n";
  return os.str();
}

void write_atomic(const fs::path &path, const std::string &content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw ValidationError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("cannot move output into place at '" + path.string() +
                          "': " + ec.message());
  }
}

} // namespace qutrit::io
