#pragma once

#include <filesystem>
#include <string_view>

namespace debinforge {

// $DEBINFORGE_ASSET_DIR when set, otherwise the source tree's assets/ directory.
std::filesystem::path asset_dir();
std::filesystem::path asset_path(std::string_view relative);

} // namespace debinforge
