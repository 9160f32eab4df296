#pragma once

#include <cstdint>
#include <string>

namespace fite {

void write_png_rgb(const std::string& path, int width, int height, const uint8_t* rgb);
void write_png_gray(const std::string& path, int width, int height, const uint8_t* gray);

}  // namespace fite
