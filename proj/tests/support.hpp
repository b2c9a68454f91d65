#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace testing {

inline std::filesystem::path fixture_dir() { return DEBINFORGE_FIXTURE_DIR; }
inline std::filesystem::path corpus_dir() { return fixture_dir() / "corpus"; }
inline std::filesystem::path cli_path() { return DEBINFORGE_CLI_PATH; }

// Fresh directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(std::string_view tag = "t")
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("debinforge-" + std::string(tag) + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

} // namespace testing
