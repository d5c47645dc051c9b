#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hetfit::cli {

enum ExitCode : int {
  kOk = 0,
  kIoFailure = 1,
  kUsage = 2,
  kValidation = 3,
  kNumerical = 4,
};

/// RCI: every file and flag is in real units. SCI: predict/surface inputs and
/// outputs are min-max scaled with the model's stored scaler.
enum class Mode { kRci, kSci };

struct Environment {
  Mode mode = Mode::kRci;
  std::filesystem::path out_dir = "hetfit-out";
  std::uint64_t seed = 42;
};

/// Runs one command line (args excludes the program name). Output goes to
/// `out`, diagnostics to `err`; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hetfit::cli
