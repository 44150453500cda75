#pragma once

#include "accel2grf/encode.hpp"

#include <filesystem>

namespace accel2grf::encode {

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

}  // namespace accel2grf::encode
