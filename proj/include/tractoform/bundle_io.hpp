#pragma once

#include <string>

#include "tractoform/fiber.hpp"

namespace tractoform {

/// TFBD: little-endian "TFBD", u32 version (1), u32 fiber count N, then per
/// fiber u32 point count P and P*3 float32 xyz, then u8 feature count and per
/// feature a 16-byte space-padded name and N float32 values in id order.
/// Fiber ids are implicit (file order), so loaded bundles have dense ids.
FiberBundle read_tfbd(const std::string& path);
void write_tfbd(const std::string& path, const FiberBundle& bundle);

/// {"fibers": [[[x,y,z], ...], ...], "mean_fa": [...], "mean_md": [...]};
/// the feature arrays are optional.
FiberBundle read_bundle_json(const std::string& path);

/// Dispatches on extension: ".json" goes to read_bundle_json, anything else to
/// read_tfbd.
FiberBundle read_bundle(const std::string& path);

}  // namespace tractoform
