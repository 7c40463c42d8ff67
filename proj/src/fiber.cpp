#include "tractoform/fiber.hpp"

#include <algorithm>
#include <cmath>

#include "tractoform/error.hpp"

namespace tractoform {

Streamline::Streamline(FiberId id, std::vector<Point3> points) : id_(id), points_(std::move(points)) {
    if (points_.size() < 2)
        throw InvalidArgument("fiber " + std::to_string(id_) + ": a streamline needs at least 2 points");
    for (const auto& p : points_)
        if (!p.allFinite()) throw InvalidArgument("fiber " + std::to_string(id_) + ": non-finite coordinate");
}

double Streamline::arc_length() const {
    double length = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) length += (points_[i] - points_[i - 1]).norm();
    return length;
}

bool Streamline::is_zero_length() const {
    return std::all_of(points_.begin(), points_.end(), [&](const Point3& p) { return p == points_.front(); });
}

std::span<const double> FiberFeatures::get(std::string_view name) const {
    const std::vector<double>* values = nullptr;
    if (name == kMeanFa)
        values = &mean_fa;
    else if (name == kMeanMd)
        values = &mean_md;
    else
        throw InvalidArgument("unknown feature '" + std::string(name) + "'");
    if (values->empty()) throw InvalidArgument("feature '" + std::string(name) + "' not present in bundle");
    return *values;
}

bool FiberFeatures::has(std::string_view name) const {
    return (name == kMeanFa && !mean_fa.empty()) || (name == kMeanMd && !mean_md.empty());
}

std::vector<std::string_view> FiberFeatures::names() const {
    std::vector<std::string_view> out;
    if (!mean_fa.empty()) out.push_back(kMeanFa);
    if (!mean_md.empty()) out.push_back(kMeanMd);
    return out;
}

std::string_view to_string(Hemisphere h) {
    switch (h) {
        case Hemisphere::Left: return "left";
        case Hemisphere::Right: return "right";
        case Hemisphere::Commissural: return "commissural";
    }
    return "?";
}

FiberBundle::FiberBundle(std::vector<Streamline> streamlines, FiberFeatures features, std::string provenance)
    : streamlines_(std::move(streamlines)), features_(std::move(features)), provenance_(std::move(provenance)) {
    const auto n = streamlines_.size();
    auto check = [&](const std::vector<double>& values, std::string_view name) {
        if (!values.empty() && values.size() != n)
            throw InvalidArgument("feature '" + std::string(name) + "' has " + std::to_string(values.size()) +
                                  " values for " + std::to_string(n) + " fibers");
    };
    check(features_.mean_fa, FiberFeatures::kMeanFa);
    check(features_.mean_md, FiberFeatures::kMeanMd);
    for (double fa : features_.mean_fa)
        if (!(fa >= 0.0 && fa <= 1.0)) throw InvalidArgument("mean_fa outside [0, 1]");
    for (double md : features_.mean_md)
        if (!(md >= 0.0) || !std::isfinite(md)) throw InvalidArgument("mean_md must be finite and non-negative");

    index_.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!index_.emplace(streamlines_[i].id(), i).second)
            throw InvalidArgument("duplicate fiber id " + std::to_string(streamlines_[i].id()));
}

std::optional<std::size_t> FiberBundle::index_of(FiberId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

bool FiberBundle::has_dense_ids() const {
    for (std::size_t i = 0; i < streamlines_.size(); ++i)
        if (streamlines_[i].id() != i) return false;
    return true;
}

FiberBundle FiberBundle::subset(std::span<const std::size_t> indices) const {
    std::vector<Streamline> lines;
    FiberFeatures feats;
    lines.reserve(indices.size());
    for (auto i : indices) {
        if (i >= size()) throw InvalidArgument("subset index out of range");
        lines.push_back(streamlines_[i]);
        if (!features_.mean_fa.empty()) feats.mean_fa.push_back(features_.mean_fa[i]);
        if (!features_.mean_md.empty()) feats.mean_md.push_back(features_.mean_md[i]);
    }
    return FiberBundle(std::move(lines), std::move(feats), provenance_);
}

FiberBundle FiberBundle::with_features(FiberFeatures features) const {
    return FiberBundle(streamlines_, std::move(features), provenance_);
}

FiberBundle FiberBundle::resampled(std::size_t n) const {
    std::vector<Streamline> lines;
    lines.reserve(size());
    for (const auto& s : streamlines_) lines.push_back(resample(s, n));
    return FiberBundle(std::move(lines), features_, provenance_);
}

std::optional<std::size_t> FiberBundle::uniform_point_count() const {
    if (streamlines_.empty()) return std::nullopt;
    const auto p = streamlines_.front().size();
    for (const auto& s : streamlines_)
        if (s.size() != p) return std::nullopt;
    return p;
}

Streamline resample(const Streamline& streamline, std::size_t n) {
    if (n < 2) throw InvalidArgument("resample: point count must be >= 2");
    const auto pts = streamline.points();

    std::vector<double> cumulative(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cumulative[i] = cumulative[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = cumulative.back();
    if (!(total > 0.0)) throw InvalidArgument("fiber " + std::to_string(streamline.id()) + ": zero-length fiber");

    std::vector<Point3> out;
    out.reserve(n);
    out.push_back(pts.front());
    std::size_t seg = 1;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(n - 1);
        while (seg + 1 < pts.size() && cumulative[seg] < target) ++seg;
        const double seg_len = cumulative[seg] - cumulative[seg - 1];
        const double t = seg_len > 0.0 ? (target - cumulative[seg - 1]) / seg_len : 0.0;
        out.push_back(pts[seg - 1] + t * (pts[seg] - pts[seg - 1]));
    }
    out.push_back(pts.back());
    return Streamline(streamline.id(), std::move(out));
}

Hemisphere classify_hemisphere(const Streamline& streamline, double tau) {
    if (!(tau >= 0.0)) throw InvalidArgument("hemisphere tolerance must be >= 0");
    double min_x = streamline[0].x();
    double max_x = min_x;
    for (const auto& p : streamline.points()) {
        min_x = std::min(min_x, p.x());
        max_x = std::max(max_x, p.x());
    }
    const bool left = max_x <= tau;
    const bool right = min_x >= -tau;
    if (left && !right) return Hemisphere::Left;
    if (right && !left) return Hemisphere::Right;
    return Hemisphere::Commissural;
}

const FiberBundle& HemisphereSplit::operator[](Hemisphere h) const {
    switch (h) {
        case Hemisphere::Left: return left;
        case Hemisphere::Right: return right;
        case Hemisphere::Commissural: break;
    }
    return commissural;
}

HemisphereSplit split_by_hemisphere(const FiberBundle& bundle, double tau) {
    std::vector<std::size_t> parts[kChannelCount];
    for (std::size_t i = 0; i < bundle.size(); ++i)
        parts[static_cast<std::size_t>(classify_hemisphere(bundle[i], tau))].push_back(i);
    return {bundle.subset(parts[0]), bundle.subset(parts[1]), bundle.subset(parts[2])};
}

}  // namespace tractoform
