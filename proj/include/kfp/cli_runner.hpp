#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kfp/json_io.hpp"
#include "kfp/model.hpp"
#include "kfp/spectral_lab.hpp"

namespace kfp {

/// Process exit codes of the command-line front end.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failed_check = 1;  ///< ran to completion but a pass flag is false
inline constexpr int not_double_well = 2;
inline constexpr int imaginary_axis = 3;
inline constexpr int hypothesis_fails = 4;
inline constexpr int not_converged = 5;
inline constexpr int bad_fit = 6;
inline constexpr int config_error = 64;
inline constexpr int internal_error = 70;
}  // namespace exit_code

struct RunConfig {
  std::string model_name = "DW1";
  ModelSpec model;

  LabGridOptions grid;

  struct Solver {
    std::vector<cplx> shifts{cplx(-0.1)};  ///< units of h
    int count = 8;
    int basis = 0;
    double tol = 1e-10;
    double window = 2.0;           ///< spectrum command
    double lattice_window = 1.7;   ///< lattice comparison
    double lattice_radius = 2.0;
    double imaginary_bound = 0.0;  ///< 0 selects the lattice default
    double pairing_tol = 1e-6;
  } solver;

  struct Sweep {
    std::vector<double> h{0.14, 0.12, 0.10, 0.08, 0.07, 0.06};
    double slope_tolerance = 0.05;  ///< relative to the target 2 S_min
    double cutoff_radius = 0.2;
    double prefactor_factor = 1.5;
  } sweep;

  struct Hypotheses {
    double horizon = 10.0;
    int per_ring = 32;
    double ring_radius = 0.5;
    double ring_gap = 0.1;
    double threshold = 1e-3;
    double exclusion = 0.1;
    double max_constant = 1e3;
  } hypotheses;

  struct Resolvent {
    std::vector<double> h{0.1, 0.05};
    double radius = 2.0;
    int count = 8;
    double proximity = 10.0;
    double resolution = 4.0;
    double max_ratio = 1.5;
  } resolvent;

  struct Structure {
    double d1d0 = 1e-13;
    double kernel = 1e-12;
    double intertwining = 1e-12;
    double adjoint = 1e-12;
  } structure;

  double h = 0.1;
  int degree = 0;
  std::uint64_t seed = 42;
  std::string output = "out";

  /// Top-level sections that were absent and fell back to defaults.
  std::vector<std::string> defaults_used;

  SpectrumOptions spectrum_options() const;
  json to_json() const;
};

/// Defaults with the named registry model.
RunConfig default_run_config(const std::string& model = "DW1");

/// Parses and validates a config document. Throws ConfigError (with line and column when
/// the position is known) on syntax errors, unknown keys, bad types, non-positive
/// tolerances or an h list that is not strictly decreasing.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");

/// Output of one command: files (name, contents) to be written and an exit code.
struct CommandResult {
  int exit = exit_code::ok;
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
};

CommandResult cmd_analyze(const RunConfig& config);
CommandResult cmd_check(const RunConfig& config);
CommandResult cmd_spectrum(const RunConfig& config);
CommandResult cmd_splitting(const RunConfig& config);
CommandResult cmd_complex_verify(const RunConfig& config);
CommandResult cmd_resolvent(const RunConfig& config);

/// Writes `contents` to dir/name through a temporary file and a rename.
void write_atomic(const std::string& dir, const std::string& name, const std::string& contents);

/// Full front end: argument parsing, config loading, error-to-exit-code mapping and
/// output. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kfp
