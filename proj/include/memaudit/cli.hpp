#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace memaudit::cli {

enum ExitCode : int {
  kSuccess = 0,
  kMemorizationFlagged = 1,
  kUsageError = 2,
  kDataError = 3,
};

/// Runs the memaudit command line. `args` includes the program name.
/// Reports and progress never go to `out`; it only receives help text.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "label: 11739000/23478000 comparisons (50.0%), 2.35e+06/s, ETA 5s"
std::string format_progress(const std::string& label, std::uint64_t done, std::uint64_t total,
                            double elapsed_seconds);

/// Periodic status lines for a long correlation run.
class ProgressReporter {
 public:
  ProgressReporter(std::string label, std::uint64_t total, std::ostream& sink, bool quiet,
                   std::chrono::milliseconds interval);

  void update(std::uint64_t done);
  /// Emits the completion line unless it was already printed.
  void finish();

 private:
  using Clock = std::chrono::steady_clock;

  std::string label_;
  std::uint64_t total_;
  std::ostream& sink_;
  bool quiet_;
  std::chrono::milliseconds interval_;
  Clock::time_point start_;
  Clock::time_point last_;
  std::uint64_t done_ = 0;
  bool final_printed_ = false;
};

}  // namespace memaudit::cli
