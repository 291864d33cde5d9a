#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace skillkt::cli {

enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 2,
    exit_numeric = 3,
    exit_undefined_metric = 4
};

/// Runs one subcommand; `args` excludes the program name.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

/// key=value lines as --key=value arguments; blank lines, '#' comments and empty values are skipped.
std::vector<std::string> read_config_file(const std::filesystem::path& path);

/// Relative output paths resolve against $SKILLKT_OUTPUT_DIR when it is set.
std::filesystem::path output_path(const std::string& path);

} // namespace skillkt::cli
