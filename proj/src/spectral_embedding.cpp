#include "tractoform/spectral_embedding.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "tractoform/detail/binary_io.hpp"
#include "tractoform/error.hpp"
#include "tractoform/parallel.hpp"

namespace tractoform {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr double kMinOutOfSampleRowSum = 1e-300;

// TFES stores landmarks as float32; rounding up front makes a loaded space
// behave bit-identically to the one that was saved.
FiberBundle canonical_landmarks(const FiberBundle& landmarks) {
    std::vector<Streamline> lines;
    lines.reserve(landmarks.size());
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
        std::vector<Point3> pts;
        pts.reserve(landmarks[i].size());
        for (const auto& p : landmarks[i].points())
            // per component: Eigen's packet path can drop a chained double->float->double cast
            pts.emplace_back(static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()));
        lines.emplace_back(static_cast<FiberId>(i), std::move(pts));
    }
    return FiberBundle(std::move(lines), {}, "landmarks");
}

// Flip so the largest-magnitude entry is positive. Near-ties resolve to the
// lowest index so the rule survives last-bit solver differences.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= peak * (1.0 - 1e-9)) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

double scale_for(const EmbeddingSpace& space, std::size_t dim, CoordScaling scaling) {
    const double lambda = space.eigenvalues[static_cast<Eigen::Index>(dim + 1)];
    if (std::abs(lambda) <= kNullEigenvalue) return 0.0;
    return scaling == CoordScaling::LambdaRandomWalk ? lambda : 1.0;
}

std::vector<CoordRange> padded_ranges(const Eigen::MatrixXd& coords) {
    std::vector<CoordRange> ranges;
    for (Eigen::Index j = 0; j < coords.cols(); ++j) {
        const double lo = coords.col(j).minCoeff();
        const double hi = coords.col(j).maxCoeff();
        const double pad = kRangeMargin * (hi - lo);
        ranges.push_back({lo - pad, hi + pad});
    }
    return ranges;
}

void validate_space(const EmbeddingSpace& s) {
    const auto n = static_cast<Eigen::Index>(s.landmark_count());
    const auto k = static_cast<Eigen::Index>(s.eigenpairs());
    if (k < 3) throw InvalidArgument("embedding space needs k >= 3 eigenpairs");
    if (n < k + 1) throw InvalidArgument("embedding space needs at least k+1 landmarks");
    if (s.eigenvectors.rows() != n || s.eigenvectors.cols() != k || s.row_sums.size() != n ||
        s.coord_ranges.size() != static_cast<std::size_t>(k - 1))
        throw InvalidArgument("embedding space arrays have inconsistent shapes");
    if (!(s.sigma > 0.0)) throw InvalidArgument("embedding space sigma must be > 0");
    if (!s.eigenvalues.allFinite() || !s.eigenvectors.allFinite() || !(s.row_sums.array() > 0.0).all())
        throw InvalidArgument("embedding space has non-finite eigenpairs or non-positive row sums");
}

}  // namespace

CoordScaling parse_coord_scaling(std::string_view name) {
    if (name == "rw") return CoordScaling::RandomWalk;
    if (name == "lambda-rw") return CoordScaling::LambdaRandomWalk;
    throw InvalidArgument("unknown coordinate scaling '" + std::string(name) + "' (expected rw or lambda-rw)");
}

std::string_view to_string(CoordScaling scaling) {
    return scaling == CoordScaling::RandomWalk ? "rw" : "lambda-rw";
}

std::size_t EmbeddingSpace::point_count() const { return landmarks.empty() ? 0 : landmarks[0].size(); }

EmbeddingCoords EmbeddingSpace::landmark_coordinates(CoordScaling scaling) const {
    const auto n = static_cast<Eigen::Index>(landmark_count());
    EmbeddingCoords out;
    out.values.resize(n, static_cast<Eigen::Index>(dims()));
    for (std::size_t j = 0; j < dims(); ++j) {
        const double scale = scale_for(*this, j, scaling);
        out.values.col(static_cast<Eigen::Index>(j)) =
            scale * eigenvectors.col(static_cast<Eigen::Index>(j + 1)).cwiseQuotient(row_sums.cwiseSqrt());
    }
    for (const auto& s : landmarks.streamlines()) out.ids.push_back(s.id());
    return out;
}

std::vector<CoordRange> EmbeddingSpace::ranges(CoordScaling scaling) const {
    std::vector<CoordRange> out = coord_ranges;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double scale = scale_for(*this, j, scaling);
        const CoordRange r{scale * coord_ranges[j].min, scale * coord_ranges[j].max};
        out[j] = scale < 0.0 ? CoordRange{r.max, r.min} : r;
    }
    return out;
}

EmbeddingSpace build_space(const FiberBundle& landmarks, double sigma, std::size_t k) {
    if (!(sigma > 0.0)) throw InvalidArgument("build_space: sigma must be > 0");
    if (k < 3) throw InvalidArgument("build_space: need k >= 3 eigenpairs");
    if (landmarks.size() < k + 1)
        throw InvalidArgument("build_space: need at least k+1 = " + std::to_string(k + 1) + " landmarks, got " +
                              std::to_string(landmarks.size()));
    if (!landmarks.uniform_point_count()) throw InvalidArgument("build_space: landmarks must share one point count");

    EmbeddingSpace space;
    space.landmarks = canonical_landmarks(landmarks);
    space.sigma = sigma;

    const auto a = pairwise(space.landmarks, sigma).values;
    const auto n = a.rows();
    space.row_sums = a.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(space.row_sums[i] - a(i, i) > 0.0))
            throw NumericalError("build_space: landmark fiber " + std::to_string(landmarks[static_cast<std::size_t>(i)].id()) +
                                 " is isolated (all affinities to other landmarks underflow to 0)");

    const Eigen::VectorXd inv_sqrt = space.row_sums.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd normalized = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized);
    if (solver.info() != Eigen::Success) throw NumericalError("build_space: symmetric eigensolver did not converge");

    // Eigen returns ascending order
    const auto kk = static_cast<Eigen::Index>(k);
    space.eigenvalues = solver.eigenvalues().tail(kk).reverse();
    space.eigenvectors = solver.eigenvectors().rightCols(kk).rowwise().reverse();
    for (Eigen::Index j = 0; j < kk; ++j) fix_sign(space.eigenvectors.col(j));

    space.coord_ranges = padded_ranges(space.landmark_coordinates().values);
    return space;
}

EmbeddingCoords embed(const EmbeddingSpace& space, const FiberBundle& bundle, CoordScaling scaling) {
    const auto p = space.point_count();
    for (const auto& s : bundle.streamlines())
        if (s.size() != p)
            throw InvalidArgument("embed: fiber " + std::to_string(s.id()) + " has " + std::to_string(s.size()) +
                                  " points, space expects " + std::to_string(p));

    const auto n = static_cast<Eigen::Index>(space.landmark_count());
    const auto dims = space.dims();
    std::vector<double> scale(dims);
    std::vector<double> inv_lambda(dims);
    for (std::size_t j = 0; j < dims; ++j) {
        scale[j] = scale_for(space, j, scaling);
        inv_lambda[j] = scale[j] == 0.0 ? 0.0 : 1.0 / space.eigenvalues[static_cast<Eigen::Index>(j + 1)];
    }
    const Eigen::VectorXd sqrt_rows = space.row_sums.cwiseSqrt();

    EmbeddingCoords out;
    out.values.resize(static_cast<Eigen::Index>(bundle.size()), static_cast<Eigen::Index>(dims));
    for (const auto& s : bundle.streamlines()) out.ids.push_back(s.id());

    parallel_for(bundle.size(), [&](std::size_t f) {
        Eigen::VectorXd b(n);
        for (Eigen::Index i = 0; i < n; ++i)
            b[i] = affinity(mcp_distance(bundle[f], space.landmarks[static_cast<std::size_t>(i)]), space.sigma);
        const double s_f = b.sum();
        if (!(s_f >= kMinOutOfSampleRowSum))
            throw NumericalError("embed: unembeddable fiber " + std::to_string(bundle[f].id()) +
                                 " (affinity to every landmark underflows)");
        const double sqrt_sf = std::sqrt(s_f);
        const Eigen::VectorXd b_hat = b.cwiseQuotient(sqrt_rows) / sqrt_sf;
        for (std::size_t j = 0; j < dims; ++j) {
            const double u = inv_lambda[j] * b_hat.dot(space.eigenvectors.col(static_cast<Eigen::Index>(j + 1)));
            out.values(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(j)) = scale[j] * u / sqrt_sf;
        }
    });
    return out;
}

void save_space(const std::string& path, const EmbeddingSpace& space) {
    validate_space(space);
    const auto n = space.landmark_count();
    const auto p = space.point_count();
    const auto k = space.eigenpairs();

    detail::BinaryWriter out(path);
    out.magic("TFES");
    out.put<std::uint32_t>(kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(n));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(p));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(k));
    out.put<double>(space.sigma);
    for (const auto& s : space.landmarks.streamlines()) {
        if (s.size() != p) throw InvalidArgument("save_space: landmarks must share one point count");
        for (const auto& pt : s.points()) {
            out.put<float>(static_cast<float>(pt.x()));
            out.put<float>(static_cast<float>(pt.y()));
            out.put<float>(static_cast<float>(pt.z()));
        }
    }
    for (Eigen::Index j = 0; j < space.eigenvalues.size(); ++j) out.put<double>(space.eigenvalues[j]);
    for (Eigen::Index i = 0; i < space.eigenvectors.rows(); ++i)
        for (Eigen::Index j = 0; j < space.eigenvectors.cols(); ++j) out.put<double>(space.eigenvectors(i, j));
    for (Eigen::Index i = 0; i < space.row_sums.size(); ++i) out.put<double>(space.row_sums[i]);
    for (const auto& r : space.coord_ranges) {
        out.put<double>(r.min);
        out.put<double>(r.max);
    }
    out.close();
}

EmbeddingSpace load_space(const std::string& path) {
    detail::BinaryReader in(path, "TFES");
    in.expect_magic("TFES");
    in.expect_version(kVersion);
    const auto n = in.get<std::uint32_t>();
    const auto p = in.get<std::uint32_t>();
    const auto k = in.get<std::uint32_t>();
    if (k < 3 || n < k + 1 || p < 2) in.fail("invalid header (n=" + std::to_string(n) + ", P=" + std::to_string(p) +
                                              ", k=" + std::to_string(k) + ")");

    EmbeddingSpace space;
    space.sigma = in.get<double>();
    std::vector<Streamline> lines;
    lines.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        std::vector<Point3> pts(p);
        for (auto& pt : pts) {
            const float x = in.get<float>(), y = in.get<float>(), z = in.get<float>();
            pt = Point3(x, y, z);
        }
        try {
            lines.emplace_back(i, std::move(pts));
        } catch (const InvalidArgument& e) {
            in.fail(e.what());
        }
    }
    space.landmarks = FiberBundle(std::move(lines), {}, "landmarks");

    space.eigenvalues.resize(k);
    for (std::uint32_t j = 0; j < k; ++j) space.eigenvalues[j] = in.get<double>();
    space.eigenvectors.resize(n, k);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < k; ++j) space.eigenvectors(i, j) = in.get<double>();
    space.row_sums.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) space.row_sums[i] = in.get<double>();
    space.coord_ranges.resize(k - 1);
    for (auto& r : space.coord_ranges) {
        r.min = in.get<double>();
        r.max = in.get<double>();
    }
    in.expect_end();

    try {
        validate_space(space);
    } catch (const InvalidArgument& e) {
        in.fail(e.what());
    }
    return space;
}

}  // namespace tractoform
