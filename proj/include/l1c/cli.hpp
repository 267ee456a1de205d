#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "l1c/error.hpp"

namespace l1c {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitSolver = 3,
  kExitIO = 4,
};

int exit_code_for(ErrorCode code);

/// Runs the `l1colorize` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Fixed header of the compare metrics file.
inline constexpr const char* kCompareCsvHeader =
    "count,seed,mae_u_l1,mae_u_l2,mae_v_l1,mae_v_l2,psnr_l1,psnr_l2,j1_l1,j1_l2,seconds_l1,seconds_l2";

/// "%.10g", with "inf" / "-inf" / "nan" spelled out.
std::string format_csv_number(double v);

}  // namespace l1c
