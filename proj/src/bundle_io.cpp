#include "tractoform/bundle_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tractoform/detail/binary_io.hpp"
#include "tractoform/error.hpp"

namespace tractoform {

namespace {

constexpr std::uint32_t kVersion = 1;

FiberBundle checked_bundle(std::vector<Streamline> lines, FiberFeatures features, const std::string& path) {
    for (const auto& s : lines)
        if (s.is_zero_length())
            throw FormatError("bundle '" + path + "': fiber " + std::to_string(s.id()) + " is a zero-length fiber");
    try {
        return FiberBundle(std::move(lines), std::move(features), std::filesystem::path(path).filename().string());
    } catch (const InvalidArgument& e) {
        throw FormatError("bundle '" + path + "': " + e.what());
    }
}

}  // namespace

FiberBundle read_tfbd(const std::string& path) {
    detail::BinaryReader in(path, "TFBD");
    in.expect_magic("TFBD");
    in.expect_version(kVersion);
    const auto n = in.get<std::uint32_t>();

    std::vector<Streamline> lines;
    lines.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto p = in.get<std::uint32_t>();
        if (p < 2) in.fail("fiber " + std::to_string(i) + " has fewer than 2 points");
        std::vector<Point3> pts(p);
        for (auto& pt : pts) {
            const float x = in.get<float>(), y = in.get<float>(), z = in.get<float>();
            pt = Point3(x, y, z);
            if (!pt.allFinite()) in.fail("fiber " + std::to_string(i) + " has a non-finite coordinate");
        }
        lines.emplace_back(i, std::move(pts));
    }

    FiberFeatures features;
    const auto count = in.get<std::uint8_t>();
    for (std::uint8_t f = 0; f < count; ++f) {
        const auto name = in.name();
        std::vector<double>* target = nullptr;
        if (name == FiberFeatures::kMeanFa)
            target = &features.mean_fa;
        else if (name == FiberFeatures::kMeanMd)
            target = &features.mean_md;
        else
            in.fail("unknown feature '" + name + "'");
        if (!target->empty()) in.fail("duplicate feature '" + name + "'");
        target->reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) target->push_back(in.get<float>());
    }
    in.expect_end();
    return checked_bundle(std::move(lines), std::move(features), path);
}

void write_tfbd(const std::string& path, const FiberBundle& bundle) {
    if (!bundle.has_dense_ids()) throw InvalidArgument("TFBD stores dense fiber ids; renumber the bundle first");
    detail::BinaryWriter out(path);
    out.magic("TFBD");
    out.put<std::uint32_t>(kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(bundle.size()));
    for (const auto& s : bundle.streamlines()) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        for (const auto& p : s.points()) {
            out.put<float>(static_cast<float>(p.x()));
            out.put<float>(static_cast<float>(p.y()));
            out.put<float>(static_cast<float>(p.z()));
        }
    }
    const auto names = bundle.features().names();
    out.put<std::uint8_t>(static_cast<std::uint8_t>(names.size()));
    for (auto name : names) {
        out.name(name);
        for (double v : bundle.features().get(name)) out.put<float>(static_cast<float>(v));
    }
    out.close();
}

FiberBundle read_bundle_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open bundle JSON '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bundle JSON '" + path + "': " + e.what());
    }

    std::vector<Streamline> lines;
    FiberFeatures features;
    try {
        const auto& fibers = doc.at("fibers");
        for (std::size_t i = 0; i < fibers.size(); ++i) {
            std::vector<Point3> pts;
            for (const auto& p : fibers[i]) {
                if (p.size() != 3) throw FormatError("bundle JSON '" + path + "': point without 3 coordinates");
                pts.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
            }
            lines.emplace_back(static_cast<FiberId>(i), std::move(pts));
        }
        if (doc.contains("mean_fa")) features.mean_fa = doc["mean_fa"].get<std::vector<double>>();
        if (doc.contains("mean_md")) features.mean_md = doc["mean_md"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bundle JSON '" + path + "': " + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError("bundle JSON '" + path + "': " + e.what());
    }
    return checked_bundle(std::move(lines), std::move(features), path);
}

FiberBundle read_bundle(const std::string& path) {
    if (std::filesystem::path(path).extension() == ".json") return read_bundle_json(path);
    return read_tfbd(path);
}

}  // namespace tractoform
