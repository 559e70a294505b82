#pragma once

#include <filesystem>
#include <vector>

#include "cycletrans/data.hpp"

namespace cycletrans {

/// Grayscale PNG (8 or 16 bit) as raw digital numbers.
ImageD read_png_gray(const std::filesystem::path& path);

/// Writes img rescaled from [lo, hi] onto the full 16-bit range.
void write_png_gray16(const std::filesystem::path& path, const ImageD& img, double lo,
                      double hi);

void write_png_gray8(const std::filesystem::path& path, const ImageD& img, double lo,
                     double hi);

/// Interleaved RGB rows, top to bottom.
void write_png_rgb8(const std::filesystem::path& path, int width, int height,
                    const std::vector<unsigned char>& rgb);

Volume read_nifti(const std::filesystem::path& path);

/// Writes a float64 single-file NIfTI-1 volume (gzipped when the path ends in
/// .gz); values round-trip bit-exactly.
void write_nifti(const std::filesystem::path& path, const Volume& v);

}  // namespace cycletrans
