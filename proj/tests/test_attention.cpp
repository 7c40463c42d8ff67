#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_helpers.hpp"
#include "tractoform/attention.hpp"
#include "tractoform/error.hpp"

using namespace tractoform;

namespace {

/// Random row-stochastic stack with strictly positive entries.
AttentionStack random_stack(std::mt19937& gen, std::size_t layers, std::size_t heads, std::size_t grid) {
    const std::size_t n = grid * grid + 1;
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> w(layers * heads * n * n);
    for (std::size_t row = 0; row < layers * heads * n; ++row) {
        double sum = 0;
        for (std::size_t c = 0; c < n; ++c) sum += (w[row * n + c] = u(gen));
        for (std::size_t c = 0; c < n; ++c) w[row * n + c] /= sum;
    }
    return AttentionStack(layers, heads, grid, grid * 2, std::move(w));
}

std::vector<double> identity_weights(std::size_t layers, std::size_t heads, std::size_t n) {
    std::vector<double> w(layers * heads * n * n, 0.0);
    for (std::size_t m = 0; m < layers * heads; ++m)
        for (std::size_t i = 0; i < n; ++i) w[m * n * n + i * n + i] = 1.0;
    return w;
}

}  // namespace

TEST_CASE("two-layer fixture") {
    Eigen::MatrixXd a1(3, 3), a2(3, 3);
    a1 << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.25, 0.25, 0.5;
    a2 << 0.2, 0.2, 0.6, 0.3, 0.3, 0.4, 0.0, 0.5, 0.5;
    Eigen::MatrixXd expected(3, 3);
    expected << 0.4925, 0.2075, 0.3, 0.17, 0.5675, 0.2625, 0.10625, 0.29375, 0.6;
    const std::vector<Eigen::MatrixXd> layers{a1, a2};
    CHECK((joint_attention(layers) - expected).cwiseAbs().maxCoeff() < 1e-9);
    // the reversed product differs
    CHECK((joint_attention(layers, RolloutOrder::LastToFirst) - expected).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("one uniform layer scores every patch 1/(2N)") {
    for (std::size_t g : {1u, 2u, 3u}) {
        const std::size_t n = g * g + 1;
        const AttentionStack stack(1, 2, g, g, std::vector<double>(2 * n * n, 1.0 / static_cast<double>(n)));
        const auto scores = rollout(stack);
        REQUIRE(scores.rows() == static_cast<Eigen::Index>(g));
        CHECK((scores.array() - 0.5 / static_cast<double>(n)).abs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("identity attention scores zero") {
    const AttentionStack stack(3, 4, 2, 4, identity_weights(3, 4, 5));
    CHECK(rollout(stack).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rollout rows stay stochastic and ignore head order") {
    std::mt19937 gen(77);
    for (int trial = 0; trial < 20; ++trial) {
        const auto l = static_cast<std::size_t>(1 + trial % 4);
        const auto h = static_cast<std::size_t>(1 + trial % 8);
        const auto g = static_cast<std::size_t>(1 + trial % 5);
        const auto stack = random_stack(gen, l, h, g);
        const auto j = rollout_matrix(stack);
        CHECK((j.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);

        // reverse the heads of every layer
        const std::size_t n = stack.tokens();
        std::vector<double> w(stack.weights().begin(), stack.weights().end());
        for (std::size_t layer = 0; layer < l; ++layer)
            for (std::size_t head = 0; head < h / 2; ++head)
                std::swap_ranges(w.begin() + static_cast<long>((layer * h + head) * n * n),
                                 w.begin() + static_cast<long>((layer * h + head + 1) * n * n),
                                 w.begin() + static_cast<long>((layer * h + h - 1 - head) * n * n));
        const AttentionStack swapped(l, h, g, stack.resolution(), w);
        CHECK((rollout(swapped) - rollout(stack)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("malformed attention") {
    auto w = identity_weights(1, 1, 5);
    w[0] = 0.9;
    CHECK_THROWS_WITH_AS(rollout(AttentionStack(1, 1, 2, 4, w)), doctest::Contains("malformed attention"), InvalidArgument);
    w = identity_weights(1, 1, 5);
    w[0] = 1.5;
    w[1] = -0.5;
    CHECK_THROWS_WITH_AS(rollout(AttentionStack(1, 1, 2, 4, w)), doctest::Contains("malformed attention"), InvalidArgument);
    // within tolerance is accepted
    w = identity_weights(1, 1, 5);
    w[0] = 1.0005;
    CHECK_NOTHROW(rollout(AttentionStack(1, 1, 2, 4, w)));
    CHECK_THROWS_AS(AttentionStack(1, 1, 2, 5, identity_weights(1, 1, 5)), InvalidArgument);
    CHECK_THROWS_AS(AttentionStack(1, 1, 2, 4, identity_weights(1, 1, 4)), InvalidArgument);
}

TEST_CASE("upsample") {
    Grid s(2, 2);
    s << 1, 2, 3, 4;
    const auto m = upsample(s, 4);
    Grid expected(4, 4);
    expected << 1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4;
    CHECK(m == expected);
    CHECK(upsample(s, 2) == s);
    CHECK(upsample(s, 10).sum() == doctest::Approx(25.0 * s.sum()));
    CHECK_THROWS_AS(upsample(s, 5), InvalidArgument);
}

TEST_CASE("threshold") {
    SUBCASE("constant map selects nothing") {
        const auto t = threshold(Grid::Constant(4, 4, 0.3));
        CHECK(t.value == doctest::Approx(0.3));
        CHECK(t.pixels.empty());
    }
    SUBCASE("single hot pixel") {
        Grid m = Grid::Zero(4, 4);
        m(2, 1) = 1.0;
        const auto t = threshold(m);
        CHECK(t.value == doctest::Approx(0.5466229182759271).epsilon(1e-12));
        REQUIRE(t.pixels.size() == 1);
        CHECK(t.pixels[0] == PixelIndex{2, 1});
    }
    SUBCASE("increasing values select a suffix, shift invariant") {
        Grid m(5, 5);
        for (Eigen::Index i = 0; i < 25; ++i) m(i / 5, i % 5) = static_cast<double>(i * i);
        const auto t = threshold(m);
        REQUIRE_FALSE(t.pixels.empty());
        const auto first = t.pixels.front().row * 5 + t.pixels.front().col;
        CHECK(t.pixels.size() == 25 - first);
        const auto shifted = threshold((m.array() + 17.0).matrix());
        CHECK(shifted.pixels == t.pixels);
    }
}

TEST_CASE("backproject") {
    using testutil::line;
    const FiberBundle bundle({line(0, {0, 0, 0}, {1, 0, 0}), line(1, {0, 1, 0}, {1, 1, 0}), line(2, {0, 2, 0}, {1, 2, 0})});
    FiberPixelMap map(3, 4);
    map.add(0, 0, {0, 0});
    map.add(0, 1, {3, 2});
    map.add(0, 2, {0, 0});
    ThresholdResult sel{0.5, {{0, 0}}};
    auto set = backproject(sel, map, 0, bundle);
    CHECK(set.fiber_ids == std::vector<FiberId>{0, 2});
    CHECK(set.threshold == 0.5);
    sel.pixels = {{3, 2}, {0, 0}};
    CHECK(backproject(sel, map, 0, bundle).fiber_ids == std::vector<FiberId>{0, 1, 2});
    CHECK(backproject(ThresholdResult{}, map, 0, bundle).fiber_ids.empty());
    CHECK(backproject(sel, map, 1, bundle).fiber_ids.empty());
    sel.pixels = {{4, 0}};
    CHECK_THROWS_AS(backproject(sel, map, 0, bundle), InvalidArgument);
    CHECK_THROWS_AS(backproject(ThresholdResult{}, map, 3, bundle), InvalidArgument);
    FiberPixelMap stray(3, 4);
    stray.add(0, 9, {1, 1});
    CHECK_THROWS_AS(backproject(ThresholdResult{0, {{1, 1}}}, stray, 0, bundle), InvalidArgument);
}

TEST_CASE("groupwise map") {
    Grid m(2, 2);
    m << 1, 2, 3, 4;
    const std::vector<AttentionMap> one{m};
    CHECK(groupwise_map(one) == m);
    const std::vector<AttentionMap> two{Grid::Zero(2, 2), m};
    CHECK(groupwise_map(two) == m / 2.0);
    const std::vector<AttentionMap> copies(7, m);
    CHECK((groupwise_map(copies) - m).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(groupwise_map(std::vector<AttentionMap>{}), InvalidArgument);
    CHECK_THROWS_AS(groupwise_map(std::vector<AttentionMap>{m, Grid::Zero(3, 3)}), InvalidArgument);
}

TEST_CASE("tfat round trip") {
    testutil::TempDir dir;
    std::mt19937 gen(3);
    const auto stack = random_stack(gen, 2, 3, 2);
    write_tfat(dir / "a.tfat", stack);
    const auto back = read_tfat(dir / "a.tfat");
    CHECK(back.layers() == 2);
    CHECK(back.heads() == 3);
    CHECK(back.grid() == 2);
    CHECK(back.resolution() == 4);
    for (std::size_t i = 0; i < stack.weights().size(); ++i)
        CHECK(back.weights()[i] == static_cast<double>(static_cast<float>(stack.weights()[i])));
    auto bytes = testutil::slurp(dir / "a.tfat");
    bytes[16] = 7;  // N no longer G^2 + 1
    testutil::spit(dir / "a.tfat", bytes);
    CHECK_THROWS_AS(read_tfat(dir / "a.tfat"), FormatError);
}
