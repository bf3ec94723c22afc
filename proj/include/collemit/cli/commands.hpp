#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "collemit/cli/config.hpp"

namespace collemit::cli {

enum class Format { Csv, Json, Both };

Format parse_format(const std::string& s);

struct GlobalOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  Format format = Format::Both;
};

/// Documented exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitNumericFailure = 3;

// Each command writes its artifacts into opts.out_dir and a short report to `log`.
void run_pattern(const Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_sweep(const Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_states(const Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_rydberg(const Config& cfg, const GlobalOptions& opts, std::ostream& log);
void run_chain(const Config& cfg, const GlobalOptions& opts, std::ostream& log);

/// Runs `fn` and maps exceptions to exit codes, printing the message to `err`.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    fn();
    return kExitOk;
  } catch (const ResourceLimit& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const ConvergenceFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumericFailure;
  }
}

}  // namespace collemit::cli
