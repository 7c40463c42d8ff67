#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

double mcp(const Streamline& a, const Streamline& b) {
    const auto n = a.size(), m = b.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double dx = a[i].x() - b[j].x(), dy = a[i].y() - b[j].y(), dz = a[i].z() - b[j].z();
            d[i][j] = std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    double ab = 0.0, ba = 0.0;
    for (std::size_t i = 0; i < n; ++i) ab += *std::min_element(d[i].begin(), d[i].end());
    for (std::size_t j = 0; j < m; ++j) {
        double best = d[0][j];
        for (std::size_t i = 1; i < n; ++i) best = std::min(best, d[i][j]);
        ba += best;
    }
    return (ab / static_cast<double>(n) + ba / static_cast<double>(m)) / 2.0;
}

Eigensystem jacobi(const Eigen::MatrixXd& symmetric) {
    const auto n = symmetric.rows();
    Eigen::MatrixXd a = symmetric;
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    Eigensystem out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

namespace {

struct Normalized {
    Eigen::MatrixXd affinity;
    Eigen::VectorXd row_sums;
    Eigensystem eig;
};

Normalized normalized_system(const FiberBundle& fibers, double sigma) {
    const auto n = static_cast<Eigen::Index>(fibers.size());
    Normalized out{Eigen::MatrixXd(n, n), Eigen::VectorXd::Zero(n), {}};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = mcp(fibers[static_cast<std::size_t>(i)], fibers[static_cast<std::size_t>(j)]);
            out.affinity(i, j) = std::exp(-(d * d) / (sigma * sigma));
        }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out.row_sums[i] += out.affinity(i, j);
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = out.affinity(i, j) / std::sqrt(out.row_sums[i] * out.row_sums[j]);
    out.eig = jacobi(m);
    for (Eigen::Index c = 0; c < n; ++c) {
        // largest magnitude entry positive, lowest index on near-ties
        auto col = out.eig.vectors.col(c);
        const double peak = col.cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(col[i]) >= peak * (1.0 - 1e-9)) {
                if (col[i] < 0) col = -col;
                break;
            }
    }
    return out;
}

}  // namespace

tractoform::EmbeddingCoords full_embedding(const FiberBundle& bundle, double sigma, std::size_t k) {
    const auto sys = normalized_system(bundle, sigma);
    tractoform::EmbeddingCoords out;
    const auto n = static_cast<Eigen::Index>(bundle.size());
    out.values.resize(n, static_cast<Eigen::Index>(k - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        out.ids.push_back(bundle[static_cast<std::size_t>(i)].id());
        for (Eigen::Index j = 0; j + 1 < static_cast<Eigen::Index>(k); ++j) {
            const bool null = std::abs(sys.eig.values[j + 1]) <= tractoform::kNullEigenvalue;
            out.values(i, j) = null ? 0.0 : sys.eig.vectors(i, j + 1) / std::sqrt(sys.row_sums[i]);
        }
    }
    return out;
}

std::vector<double> dense_nystrom(const FiberBundle& landmarks, double sigma, std::size_t k, const Streamline& fiber) {
    const auto sys = normalized_system(landmarks, sigma);
    const auto n = landmarks.size();
    std::vector<double> b(n);
    double s_f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = mcp(fiber, landmarks[i]);
        b[i] = std::exp(-(d * d) / (sigma * sigma));
        s_f += b[i];
    }
    std::vector<double> coords;
    for (std::size_t j = 1; j < k; ++j) {
        const double lambda = sys.eig.values[static_cast<Eigen::Index>(j)];
        if (std::abs(lambda) <= tractoform::kNullEigenvalue) {
            coords.push_back(0.0);
            continue;
        }
        double u = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            u += b[i] / std::sqrt(s_f * sys.row_sums[static_cast<Eigen::Index>(i)]) *
                 sys.eig.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        coords.push_back(u / lambda / std::sqrt(s_f));
    }
    return coords;
}

tractoform::Grid scatter(std::span<const double> values, std::span<const tractoform::PixelIndex> pixels, std::size_t resolution,
                         tractoform::AggregationStat stat) {
    using tractoform::AggregationStat;
    std::vector<std::vector<double>> bins(resolution * resolution);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        bins[pixels[i].row * resolution + pixels[i].col].push_back(values.empty() ? 0.0 : values[i]);
    const auto side = static_cast<Eigen::Index>(resolution);
    tractoform::Grid g = tractoform::Grid::Zero(side, side);
    for (std::size_t p = 0; p < bins.size(); ++p) {
        const auto& v = bins[p];
        if (v.empty()) continue;
        double x = 0.0;
        switch (stat) {
            case AggregationStat::Mean: x = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); break;
            case AggregationStat::Max: x = *std::max_element(v.begin(), v.end()); break;
            case AggregationStat::Min: x = *std::min_element(v.begin(), v.end()); break;
            case AggregationStat::Count: x = static_cast<double>(v.size()); break;
        }
        g(static_cast<Eigen::Index>(p / resolution), static_cast<Eigen::Index>(p % resolution)) = x;
    }
    return g;
}

double welch(std::span<const double> a, std::span<const double> b) {
    const auto stats = [](std::span<const double> x) {
        const double n = static_cast<double>(x.size());
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::pair{mean, ss / (n - 1.0)};
    };
    const auto [ma, va] = stats(a);
    const auto [mb, vb] = stats(b);
    return (ma - mb) / std::sqrt(va / static_cast<double>(a.size()) + vb / static_cast<double>(b.size()));
}

}  // namespace oracle
