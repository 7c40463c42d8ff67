#include "tractoform/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tractoform/bundle_io.hpp"
#include "tractoform/error.hpp"
#include "tractoform/parallel.hpp"
#include "tractoform/random.hpp"

namespace tractoform {

using nlohmann::json;

Point3 BundleGeometry::at(double t) const {
    if (kind == Kind::Straight) return start + t * (end - start);

    const Point3 chord = end - start;
    const double half = 0.5 * chord.norm();
    const Point3 normal = (bend - bend.dot(chord) / chord.squaredNorm() * chord).normalized();
    const Point3 mid = 0.5 * (start + end);
    const Point3 center = mid - std::sqrt(radius * radius - half * half) * normal;
    const Point3 u = (start - center).normalized();
    const Point3 w = (end - center).normalized();
    const double angle = std::acos(std::clamp(u.dot(w), -1.0, 1.0));
    // in-plane unit vector perpendicular to u, pointing toward w
    const Point3 v = (w - u.dot(w) * u).normalized();
    const double a = t * angle;
    return center + radius * (std::cos(a) * u + std::sin(a) * v);
}

void BundleGeometry::validate() const {
    const auto fail = [&](const std::string& why) { throw InvalidArgument("bundle geometry '" + name + "': " + why); };
    if (!start.allFinite() || !end.allFinite()) fail("non-finite endpoint");
    const Point3 chord = end - start;
    if (!(chord.norm() > 0.0)) fail("start and end coincide");
    if (!(fa_min >= 0.0 && fa_min <= fa_max && fa_max <= 1.0)) fail("FA band must satisfy 0 <= lo <= hi <= 1");
    if (!(md_min >= 0.0 && md_min <= md_max)) fail("MD band must satisfy 0 <= lo <= hi");
    if (kind == Kind::Arc) {
        if (!(radius > 0.5 * chord.norm())) fail("arc radius must exceed half the chord length");
        const Point3 off_chord = bend - bend.dot(chord) / chord.squaredNorm() * chord;
        if (!(off_chord.norm() > 1e-9 * std::max(1.0, bend.norm()))) fail("bend direction is parallel to the chord");
    }
}

std::vector<BundleGeometry> default_geometry() {
    using K = BundleGeometry::Kind;
    std::vector<BundleGeometry> g(5);
    g[0] = {"cst_left", K::Straight, {-22, -20, -40}, {-30, -15, 60}, 0.0, Point3::UnitZ(), 0.50, 0.65, 0.70e-3, 0.80e-3};
    g[1] = {"cst_right", K::Straight, {22, -20, -40}, {30, -15, 60}, 0.0, Point3::UnitZ(), 0.50, 0.65, 0.70e-3, 0.80e-3};
    g[2] = {"cc_body", K::Arc, {-45, 0, 25}, {45, 0, 25}, 50.0, Point3::UnitZ(), 0.55, 0.70, 0.75e-3, 0.85e-3};
    g[3] = {"af_left", K::Arc, {-40, -55, 5}, {-40, 35, 15}, 55.0, -Point3::UnitX(), 0.40, 0.55, 0.75e-3, 0.90e-3};
    g[4] = {"af_right", K::Arc, {40, -55, 5}, {40, 35, 15}, 55.0, Point3::UnitX(), 0.40, 0.55, 0.75e-3, 0.90e-3};
    return g;
}

SyntheticBundles make_bundles(std::span<const BundleGeometry> geometry, std::size_t fibers_per_bundle, double jitter_mm,
                              std::uint64_t seed) {
    if (geometry.size() < 2) throw InvalidArgument("make_bundles: need at least 2 bundles");
    if (fibers_per_bundle < 1) throw InvalidArgument("make_bundles: need at least 1 fiber per bundle");
    if (!(jitter_mm >= 0.0) || !std::isfinite(jitter_mm)) throw InvalidArgument("make_bundles: jitter must be >= 0");
    for (const auto& g : geometry) g.validate();

    std::vector<Streamline> lines;
    FiberFeatures features;
    SyntheticBundles out;
    out.members.resize(geometry.size());
    FiberId next = 0;
    for (std::size_t b = 0; b < geometry.size(); ++b) {
        const auto& g = geometry[b];
        for (std::size_t f = 0; f < fibers_per_bundle; ++f, ++next) {
            Rng rng(derive_seed(seed, "fiber", next));
            const Point3 start_off(rng.normal(), rng.normal(), rng.normal());
            const Point3 end_off(rng.normal(), rng.normal(), rng.normal());
            std::vector<Point3> pts(kSynthPointsPerFiber);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(pts.size() - 1);
                const Point3 noise(rng.normal(), rng.normal(), rng.normal());
                pts[i] = g.at(t) + jitter_mm * ((1.0 - t) * start_off + t * end_off + 0.25 * noise);
            }
            lines.emplace_back(next, std::move(pts));
            features.mean_fa.push_back(rng.uniform(g.fa_min, g.fa_max));
            features.mean_md.push_back(rng.uniform(g.md_min, g.md_max));
            out.members[b].push_back(next);
        }
    }
    out.bundle = FiberBundle(std::move(lines), std::move(features), "synthetic");
    return out;
}

double noise_sigma(std::span<const double> baseline_fa, double snr) {
    if (!(snr > 0.0)) throw InvalidArgument("snr must be > 0");
    if (baseline_fa.empty()) throw InvalidArgument("noise_sigma: no baseline FA values");
    const double mean = std::accumulate(baseline_fa.begin(), baseline_fa.end(), 0.0) / static_cast<double>(baseline_fa.size());
    return std::isinf(snr) ? 0.0 : mean / snr;
}

SyntheticCohort make_groups(const FiberBundle& base, std::span<const FiberId> tract_ids, const CohortParams& params) {
    if (!(params.decrease_fraction >= 0.0 && params.decrease_fraction < 1.0))
        throw InvalidArgument("decrease_fraction must be in [0, 1)");
    if (tract_ids.empty() && params.decrease_fraction > 0.0)
        throw InvalidArgument("make_groups: empty tract_ids with a non-zero decrease");
    if (params.subjects_per_group < 1) throw InvalidArgument("make_groups: need at least 1 subject per group");
    const auto baseline = base.features().get(FiberFeatures::kMeanFa);
    const double sigma = noise_sigma(baseline, params.snr);

    std::vector<char> in_tract(base.size(), 0);
    for (auto id : tract_ids) {
        const auto idx = base.index_of(id);
        if (!idx) throw InvalidArgument("make_groups: tract fiber " + std::to_string(id) + " not in base bundle");
        in_tract[*idx] = 1;
    }

    SyntheticCohort cohort;
    cohort.params = params;
    cohort.ground_truth.assign(tract_ids.begin(), tract_ids.end());
    std::sort(cohort.ground_truth.begin(), cohort.ground_truth.end());
    cohort.ground_truth.erase(std::unique(cohort.ground_truth.begin(), cohort.ground_truth.end()), cohort.ground_truth.end());

    const auto n = params.subjects_per_group;
    std::vector<FiberFeatures> features(2 * n);
    parallel_for(2 * n, [&](std::size_t s) {
        const bool g2 = s >= n;
        Rng rng(derive_seed(params.seed, "subject", s));
        auto& f = features[s];
        f.mean_md = base.features().mean_md;
        f.mean_fa.resize(base.size());
        for (std::size_t i = 0; i < base.size(); ++i) {
            const double factor = (g2 && in_tract[i]) ? 1.0 - params.decrease_fraction : 1.0;
            const double noise = sigma > 0.0 ? sigma * rng.normal() : 0.0;
            f.mean_fa[i] = std::clamp(baseline[i] * factor + noise, 0.0, 1.0);
        }
    });
    cohort.subjects.reserve(2 * n);
    for (std::size_t s = 0; s < 2 * n; ++s)
        cohort.subjects.push_back({s < n ? Group::G1 : Group::G2, base.with_features(std::move(features[s]))});
    return cohort;
}

TractoImage group_difference_map(std::span<const TractoImage> g1, std::span<const TractoImage> g2) {
    if (g1.size() < 2 || g2.size() < 2) throw InvalidArgument("group_difference_map: need >= 2 images per group");
    const auto& ref = g1.front();
    const auto check = [&](const TractoImage& im) {
        if (im.resolution != ref.resolution || im.channels.size() != ref.channels.size())
            throw InvalidArgument("group_difference_map: shape mismatch between images");
        if (im.fiber_pixel_map.channels() != 0 && im.fiber_pixel_map.channels() != im.channels.size())
            throw InvalidArgument("group_difference_map: pixel map does not match image channels");
    };
    for (const auto& im : g1) check(im);
    for (const auto& im : g2) check(im);

    const auto side = static_cast<Eigen::Index>(ref.resolution);
    TractoImage out;
    out.resolution = ref.resolution;
    out.feature = "welch_t";
    out.stat = std::nullopt;

    struct Moments {
        Grid sum, sum_sq, n;
    };
    const auto accumulate = [&](std::span<const TractoImage> group, std::size_t c) {
        // two-pass per pixel: first means, then squared deviations
        Moments m{Grid::Zero(side, side), Grid::Zero(side, side), Grid::Zero(side, side)};
        std::vector<Grid> present;
        for (const auto& im : group)
            present.push_back(im.fiber_pixel_map.channels() ? Grid(im.fiber_pixel_map.occupancy(c).cwiseMin(1.0))
                                                            : Grid(Grid::Ones(side, side)));
        for (std::size_t i = 0; i < group.size(); ++i) {
            m.sum += group[i].channels[c].cwiseProduct(present[i]);
            m.n += present[i];
        }
        const Grid mean = m.sum.cwiseQuotient(m.n.cwiseMax(1.0));
        for (std::size_t i = 0; i < group.size(); ++i)
            m.sum_sq += (group[i].channels[c] - mean).cwiseAbs2().cwiseProduct(present[i]);
        return std::pair{mean, m};
    };

    for (std::size_t c = 0; c < ref.channels.size(); ++c) {
        const auto [mean1, m1] = accumulate(g1, c);
        const auto [mean2, m2] = accumulate(g2, c);
        Grid t = Grid::Zero(side, side);
        for (Eigen::Index r = 0; r < side; ++r)
            for (Eigen::Index k = 0; k < side; ++k) {
                const double n1 = m1.n(r, k), n2 = m2.n(r, k);
                if (n1 < 2.0 || n2 < 2.0) continue;
                const double diff = mean1(r, k) - mean2(r, k);
                const double se2 = m1.sum_sq(r, k) / (n1 - 1.0) / n1 + m2.sum_sq(r, k) / (n2 - 1.0) / n2;
                if (se2 > 0.0)
                    t(r, k) = diff / std::sqrt(se2);
                else if (diff != 0.0)
                    t(r, k) = diff > 0.0 ? kInfiniteT : -kInfiniteT;
            }
        out.channels.push_back(std::move(t));
    }
    return out;
}

namespace {

json snr_to_json(double snr) { return std::isinf(snr) ? json("inf") : json(snr); }

double snr_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw FormatError("invalid snr value");
    }
    return j.get<double>();
}

std::string subject_file(Group g, std::size_t index) {
    std::ostringstream name;
    name << "subject_" << (g == Group::G1 ? "g1" : "g2") << '_' << std::setw(3) << std::setfill('0') << index << ".tfbd";
    return name.str();
}

}  // namespace

CohortManifest write_cohort(const std::string& dir, const SyntheticBundles& base, const SyntheticCohort& cohort,
                            std::span<const BundleGeometry> geometry, std::uint64_t geometry_seed, double jitter) {
    std::filesystem::create_directories(dir);
    const auto path = [&](const std::string& name) { return (std::filesystem::path(dir) / name).string(); };

    CohortManifest m;
    m.base_file = "base.tfbd";
    write_tfbd(path(m.base_file), base.bundle);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& s : cohort.subjects) {
        const auto name = subject_file(s.group, counts[static_cast<int>(s.group)]++);
        write_tfbd(path(name), s.bundle);
        (s.group == Group::G1 ? m.g1_files : m.g2_files).push_back(name);
    }
    m.tract_ids = cohort.ground_truth;
    for (const auto& g : geometry) m.bundle_names.push_back(g.name);
    m.bundle_ids = base.members;
    m.params = cohort.params;
    m.geometry_seed = geometry_seed;
    m.jitter = jitter;

    json doc;
    doc["groups"] = {{"G1", m.g1_files}, {"G2", m.g2_files}};
    doc["base"] = m.base_file;
    doc["seeds"] = {{"geometry", m.geometry_seed}, {"cohort", m.params.seed}};
    doc["tract_ids"] = m.tract_ids;
    doc["snr"] = snr_to_json(m.params.snr);
    doc["decrease_fraction"] = m.params.decrease_fraction;
    doc["subjects_per_group"] = m.params.subjects_per_group;
    doc["jitter_mm"] = m.jitter;
    json bundles = json::array();
    for (std::size_t b = 0; b < m.bundle_names.size(); ++b)
        bundles.push_back({{"name", m.bundle_names[b]}, {"ids", m.bundle_ids[b]}});
    doc["bundles"] = bundles;

    std::ofstream out(path("cohort.json"));
    if (!out) throw Error("cannot write cohort.json in '" + dir + "'");
    out << doc.dump(2) << '\n';
    return m;
}

CohortManifest read_cohort_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open cohort manifest '" + path + "'");
    CohortManifest m;
    try {
        const json doc = json::parse(in);
        m.g1_files = doc.at("groups").at("G1").get<std::vector<std::string>>();
        m.g2_files = doc.at("groups").at("G2").get<std::vector<std::string>>();
        m.base_file = doc.value("base", std::string{});
        m.geometry_seed = doc.at("seeds").at("geometry").get<std::uint64_t>();
        m.params.seed = doc.at("seeds").at("cohort").get<std::uint64_t>();
        m.tract_ids = doc.at("tract_ids").get<std::vector<FiberId>>();
        m.params.snr = snr_from_json(doc.at("snr"));
        m.params.decrease_fraction = doc.at("decrease_fraction").get<double>();
        m.params.subjects_per_group = doc.value("subjects_per_group", m.g1_files.size());
        m.jitter = doc.value("jitter_mm", kDefaultJitter);
        if (doc.contains("bundles"))
            for (const auto& b : doc["bundles"]) {
                m.bundle_names.push_back(b.at("name").get<std::string>());
                m.bundle_ids.push_back(b.at("ids").get<std::vector<FiberId>>());
            }
    } catch (const json::exception& e) {
        throw FormatError("cohort manifest '" + path + "': " + e.what());
    }
    return m;
}

std::vector<BundleGeometry> read_geometry_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open geometry file '" + path + "'");
    std::vector<BundleGeometry> out;
    try {
        const json doc = json::parse(in);
        const auto vec = [](const json& j) {
            if (j.size() != 3) throw FormatError("expected [x, y, z]");
            return Point3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
        };
        for (const auto& b : doc) {
            BundleGeometry g;
            g.name = b.value("name", "bundle_" + std::to_string(out.size()));
            const auto kind = b.value("kind", std::string("straight"));
            if (kind == "straight")
                g.kind = BundleGeometry::Kind::Straight;
            else if (kind == "arc")
                g.kind = BundleGeometry::Kind::Arc;
            else
                throw FormatError("unknown bundle kind '" + kind + "'");
            g.start = vec(b.at("start"));
            g.end = vec(b.at("end"));
            g.radius = b.value("radius", 0.0);
            if (b.contains("bend")) g.bend = vec(b["bend"]);
            if (b.contains("fa")) std::tie(g.fa_min, g.fa_max) = std::pair{b["fa"][0].get<double>(), b["fa"][1].get<double>()};
            if (b.contains("md")) std::tie(g.md_min, g.md_max) = std::pair{b["md"][0].get<double>(), b["md"][1].get<double>()};
            out.push_back(std::move(g));
        }
    } catch (const json::exception& e) {
        throw FormatError("geometry file '" + path + "': " + e.what());
    }
    return out;
}

}  // namespace tractoform
