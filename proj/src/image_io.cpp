#include "tractoform/image_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tractoform/detail/binary_io.hpp"
#include "tractoform/error.hpp"

namespace tractoform {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxResolution = 1u << 15;

}  // namespace

void write_tfim(const std::string& path, const TractoImage& image) {
    const auto side = static_cast<Eigen::Index>(image.resolution);
    for (const auto& ch : image.channels)
        if (ch.rows() != side || ch.cols() != side) throw InvalidArgument("write_tfim: channel shape does not match resolution");

    detail::BinaryWriter out(path);
    out.magic("TFIM");
    out.put<std::uint32_t>(kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(image.channels.size()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(image.resolution));
    out.name(image.feature);
    out.put<std::uint8_t>(image.stat ? static_cast<std::uint8_t>(*image.stat) : kDerivedStatCode);
    for (const auto& ch : image.channels)
        for (Eigen::Index r = 0; r < side; ++r)
            for (Eigen::Index c = 0; c < side; ++c) out.put<float>(static_cast<float>(ch(r, c)));
    out.close();
}

TractoImage read_tfim(const std::string& path) {
    detail::BinaryReader in(path, "TFIM");
    in.expect_magic("TFIM");
    in.expect_version(kVersion);
    const auto channels = in.get<std::uint32_t>();
    const auto side = in.get<std::uint32_t>();
    if (channels == 0 || channels > 16) in.fail("invalid channel count " + std::to_string(channels));
    if (side < 1 || side > kMaxResolution) in.fail("invalid resolution " + std::to_string(side));

    TractoImage image;
    image.resolution = side;
    image.feature = in.name();
    const auto code = in.get<std::uint8_t>();
    if (code == kDerivedStatCode)
        image.stat = std::nullopt;
    else if (code <= static_cast<std::uint8_t>(AggregationStat::Count))
        image.stat = static_cast<AggregationStat>(code);
    else
        in.fail("unknown stat code " + std::to_string(code));

    image.channels.assign(channels, Grid(side, side));
    for (auto& ch : image.channels)
        for (std::uint32_t r = 0; r < side; ++r)
            for (std::uint32_t c = 0; c < side; ++c) ch(r, c) = in.get<float>();
    in.expect_end();
    return image;
}

void write_tfpm(const std::string& path, const FiberPixelMap& map) {
    detail::BinaryWriter out(path);
    out.magic("TFPM");
    out.put<std::uint32_t>(kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(map.channels()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(map.resolution()));
    for (std::size_t c = 0; c < map.channels(); ++c) {
        const auto entries = map.entries(c);
        out.put<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
            out.put<std::uint32_t>(e.id);
            out.put<std::uint32_t>(e.pixel.row);
            out.put<std::uint32_t>(e.pixel.col);
        }
    }
    out.close();
}

FiberPixelMap read_tfpm(const std::string& path) {
    detail::BinaryReader in(path, "TFPM");
    in.expect_magic("TFPM");
    in.expect_version(kVersion);
    const auto channels = in.get<std::uint32_t>();
    const auto side = in.get<std::uint32_t>();
    if (channels == 0 || channels > 16) in.fail("invalid channel count " + std::to_string(channels));
    if (side < 1 || side > kMaxResolution) in.fail("invalid resolution " + std::to_string(side));

    FiberPixelMap map(channels, side);
    for (std::uint32_t c = 0; c < channels; ++c) {
        const auto count = in.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < count; ++i) {
            const auto id = in.get<std::uint32_t>();
            const auto row = in.get<std::uint32_t>();
            const auto col = in.get<std::uint32_t>();
            try {
                map.add(c, id, {row, col});
            } catch (const InvalidArgument& e) {
                in.fail(e.what());
            }
        }
    }
    in.expect_end();
    return map;
}

std::string companion_map_path(const std::string& tfim_path) {
    return std::filesystem::path(tfim_path).replace_extension(".tfpm").string();
}

TractoImage read_image_with_map(const std::string& tfim_path) {
    auto image = read_tfim(tfim_path);
    const auto map_path = companion_map_path(tfim_path);
    image.fiber_pixel_map = read_tfpm(map_path);
    if (image.fiber_pixel_map.channels() != image.channels.size() || image.fiber_pixel_map.resolution() != image.resolution)
        throw FormatError("pixel map '" + map_path + "' does not match image '" + tfim_path + "'");
    return image;
}

void write_pgm(const std::string& path, const Grid& grid) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
    const double lo = grid.size() ? grid.minCoeff() : 0.0;
    const double hi = grid.size() ? grid.maxCoeff() : 0.0;
    const double span = hi - lo;
    for (Eigen::Index r = 0; r < grid.rows(); ++r)
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            const double t = span > 0.0 ? (grid(r, c) - lo) / span : 0.0;
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
        }
    if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace tractoform
