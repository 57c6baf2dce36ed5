#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "smooth_insert/smooth_insert.hpp"

namespace si_cli {

namespace si = smooth_insert;
namespace fs = std::filesystem;
using si::json;

enum ExitCode : int {
  kOk = 0,
  kPrecondition = 2,
  kModulation = 3,
  kInvariant = 4,
  kResolution = 5,
};

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string input_b;
  std::string set_a;
  std::string set_b;
  std::string domain;
  fs::path out_dir = ".";
  std::string grid;
  double tol_ins = 1e-8;
  double tol_env = 1e-9;
  std::uint64_t seed = 1;
  bool emit_plot_data = false;
  std::string metric = "euclidean";
  std::string modulus = "linear:1";
  std::optional<double> radius;
  std::optional<double> rho;
  int barrier_pad = 0;
  bool strict = false;
  std::string demo;

  json to_json() const;
};

enum class LogLevel { quiet, info, debug };

/// Reads SMOOTH_INSERT_LOG (quiet|info|debug, default info).
LogLevel log_level_from_env();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

/// Collects artifacts written to the output directory, in order.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  void write(const std::string& name, const std::string& content);
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }
  /// Writes `checksums.sha256` covering everything written so far.
  void write_checksums();
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> digests_;
};

std::string sha256_hex(const std::string& data);

/// Field from .json or .csv.
si::ScalarField read_field_any(const std::string& path);

/// "NxM" (or "N", "NxMxL") into a shape.
std::vector<int> parse_grid(const std::string& text);

/// "box:lo0,hi0[,lo1,hi1...]" or "ball:c0[,c1...],R".
si::Domain parse_domain(const std::string& text);

/// Plot rows: coordinates then one column per field, valid samples of the first field only.
std::string fields_to_csv(const std::vector<std::string>& names, const std::vector<const si::ScalarField*>& fields);

int cmd_envelope(const RunConfig& cfg);
int cmd_insert(const RunConfig& cfg);
int cmd_separate(const RunConfig& cfg);
int cmd_distance(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);
int cmd_demo(const RunConfig& cfg);

/// Names accepted by `demo`.
const std::vector<std::string>& demo_names();

}  // namespace si_cli
