#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "qutrit/correlations.hpp"
#include "qutrit/nv_model.hpp"
#include "qutrit/tomography.hpp"

namespace qutrit::io {

using json = nlohmann::ordered_json;

/// Everything a run can be configured with. Sections of the config file:
/// "nv", "optimizer", "pl_model", "mle"; all optional, unknown keys rejected.
struct AppConfig {
  nv::NvConfig nv;
  OptimizerConfig optimizer;
  tomo::PLModel pl_model = tomo::PLModel::linear_ramp();
  tomo::MleOptions mle;
};

AppConfig config_from_json(const json &j);
/// Throws ValidationError with the file name and a line number for syntax
/// errors, or the offending field for schema errors.
AppConfig load_config(const std::filesystem::path &path);
json to_json(const AppConfig &cfg);

/// Parses a file as JSON; syntax errors become ValidationError with line and
/// column.
json read_json_file(const std::filesystem::path &path);

/// {"kind": ..., "values": [...], "sigmas": [...]} plus an optional
/// "target_p" carried through from a simulated run. A "manifest" key is
/// accepted and ignored.
struct RecordFile {
  tomo::PLRecord record;
  std::optional<double> target_p;
};

RecordFile record_from_json(const json &j);
json to_json(const RecordFile &rf);
RecordFile load_record(const std::filesystem::path &path);

/// {"rates": [L1..L9]}, optional "manifest" ignored.
tomo::PLModel model_from_json(const json &j);
json to_json(const tomo::PLModel &model);
tomo::PLModel load_model(const std::filesystem::path &path);

/// x rounded to 12 significant digits (what every output file stores).
double round12(double x);
/// 12-significant-digit text form used in CSV output.
std::string format12(double x);

/// Row-major array of rows of [re, im] pairs.
json matrix_to_json(const ComplexMatrix &m);
ComplexMatrix matrix_from_json(const json &j);
/// Row-major array of rows of reals.
json real_matrix_to_json(const Eigen::MatrixXd &m);

struct RunManifest {
  std::string command;
  std::string config_path; // empty when defaults were used
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string created; // UTC ISO 8601; SOURCE_DATE_EPOCH when set
};

RunManifest make_manifest(std::string command, std::string config_path,
                          std::uint64_t seed, std::string output_dir);
json to_json(const RunManifest &m);
/// "# key: value" lines for CSV headers.
std::string manifest_comment(const RunManifest &m);

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failed run never leaves a partial file behind.
void write_atomic(const std::filesystem::path &path, const std::string &content);

} // namespace qutrit::io
