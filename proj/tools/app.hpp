#ifndef CARLEMAN_TOOLS_APP_HPP
#define CARLEMAN_TOOLS_APP_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "carleman/config.hpp"

namespace carleman::app {

struct RunOptions {
  bool plot = false;
  int jobs = 1;
  std::string out_dir;  // empty: the config's output_dir
};

/// forward, verify-carleman, verify-poincare, verify-snapshot, verify-energy,
/// verify-stability, sweep-stability, reconstruct, all.
const std::vector<std::string>& commands();

/// Runs one command and returns the files written, in order. One-line
/// summaries go to `log`. Throws ConfigError / NumericalError.
std::vector<std::string> run(const std::string& command, const ExperimentConfig& config, const RunOptions& options,
                             std::ostream& log);

/// Whole CLI: parses argv, applies CARLEMAN_LAB_SEED, maps errors to exit
/// codes (0 ok, 2 configuration, 3 numerical).
int main(int argc, char** argv);

}  // namespace carleman::app

#endif
