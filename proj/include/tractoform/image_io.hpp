#pragma once

#include <string>

#include "tractoform/tracto_image.hpp"

namespace tractoform {

/// Stat byte written for derived maps that are not a fiber aggregate.
inline constexpr std::uint8_t kDerivedStatCode = 0xFF;

/// TFIM: "TFIM", u32 version (1), u32 channels C, u32 R, 16-byte feature name,
/// u8 stat code, C*R*R float32 row-major. The pixel map is not included.
void write_tfim(const std::string& path, const TractoImage& image);
TractoImage read_tfim(const std::string& path);

/// TFPM: "TFPM", u32 version (1), u32 channels C, u32 R, then per channel a
/// u32 entry count followed by (u32 fiber id, u32 row, u32 col) triples.
void write_tfpm(const std::string& path, const FiberPixelMap& map);
FiberPixelMap read_tfpm(const std::string& path);

/// "<stem>.tfpm" next to a TFIM path.
std::string companion_map_path(const std::string& tfim_path);

/// TFIM plus its companion TFPM, checked for matching shape.
TractoImage read_image_with_map(const std::string& tfim_path);

/// 8-bit binary PGM, min-max scaled; a constant grid is written as all 0.
void write_pgm(const std::string& path, const Grid& grid);

}  // namespace tractoform
