#pragma once

// The CLI subcommands as callable functions. Each writes its artifacts under
// `out` and returns the process exit code:
//   0 success, 1 input/validation error, 2 infeasible or non-convergent,
//   3 verification failure.

#include "agesched/config.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace agesched {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 1,
    kExitInfeasible = 2,
    kExitVerifyFailed = 3,
};

/// Worker cap: AGE_SCHED_THREADS when set and positive, else the hardware
/// concurrency.
int thread_cap();

/// policy.csv, value.csv, result.json.
int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// sim.json and, with simulation.trace, trace.csv. `policy` is a benchmark
/// name (zero_wait, optimal_wait, dvs_pts, dvs_uts) or a policy.csv path.
int cmd_simulate(const RunConfig& cfg, const std::string& policy,
                 const std::filesystem::path& out, std::optional<std::uint64_t> seed,
                 std::ostream& log);

/// comparison.csv: one row per (p_bar, policy) for the six policies.
int cmd_compare(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// structure.json from the solve outputs in `out`.
int cmd_verify(const RunConfig& cfg, const std::filesystem::path& out, std::ostream& log);

/// Prints the fixed-size closed form as JSON.
int cmd_oracle(int b, double alpha, double p_bar, std::ostream& out);

} // namespace agesched
