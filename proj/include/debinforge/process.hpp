#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace debinforge::process {

struct Result {
    int exit_code = -1;
    bool timed_out = false;
    bool spawn_failed = false;
    // stdout and stderr interleaved.
    std::string output;

    bool ok() const { return !timed_out && !spawn_failed && exit_code == 0; }
};

struct Options {
    std::chrono::milliseconds timeout{120'000};
    std::filesystem::path working_directory;
    std::optional<std::string> stdin_data;
};

// argv[0] is resolved through PATH unless it contains a slash.
Result run(const std::vector<std::string>& argv, const Options& options = {});

std::optional<std::filesystem::path> find_executable(std::string_view name);

// Shell-style rendering for logs.
std::string command_line(const std::vector<std::string>& argv);

} // namespace debinforge::process
