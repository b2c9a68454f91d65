#include "debinforge/assets.hpp"

#include <cstdlib>

namespace debinforge {

std::filesystem::path asset_dir()
{
    if (const char* env = std::getenv("DEBINFORGE_ASSET_DIR"); env && *env)
        return env;
    return DEBINFORGE_DEFAULT_ASSET_DIR;
}

std::filesystem::path asset_path(std::string_view relative)
{
    return asset_dir() / relative;
}

} // namespace debinforge
