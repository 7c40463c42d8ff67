#include <doctest.h>

#include <algorithm>
#include <random>

#include "test_helpers.hpp"
#include "tractoform/error.hpp"
#include "tractoform/fiber.hpp"

using namespace tractoform;
using testutil::line;

TEST_CASE("streamline rejects invalid geometry") {
    CHECK_THROWS_AS(Streamline(0, {Point3(0, 0, 0)}), InvalidArgument);
    CHECK_THROWS_AS(Streamline(0, {Point3(0, 0, 0), Point3(NAN, 0, 0)}), InvalidArgument);
    CHECK_NOTHROW(Streamline(0, {Point3(0, 0, 0), Point3(1, 0, 0)}));
}

TEST_CASE("resample: two-point line to three points") {
    const Streamline s(0, {Point3(0, 0, 0), Point3(2, 0, 0)});
    const auto r = resample(s, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0] == Point3(0, 0, 0));
    CHECK(r[1].isApprox(Point3(1, 0, 0)));
    CHECK(r[2] == Point3(2, 0, 0));
}

TEST_CASE("resample: right angle polyline midpoint at arc length 1") {
    const Streamline s(0, {Point3(0, 0, 0), Point3(1, 0, 0), Point3(1, 1, 0)});
    const auto r = resample(s, 3);
    CHECK((r[1] - Point3(1, 0, 0)).norm() < 1e-15);
    CHECK(r[2] == Point3(1, 1, 0));
}

TEST_CASE("resample: identity on already equispaced input") {
    const auto s = line(3, {1, 2, 3}, {10, -4, 7}, 9);
    const auto r = resample(s, 9);
    CHECK(r.id() == 3);
    for (std::size_t i = 0; i < 9; ++i) CHECK((r[i] - s[i]).norm() < 1e-12);
}

TEST_CASE("resample: zero-length fiber and bad counts") {
    const Streamline s(4, {Point3(1, 1, 1), Point3(1, 1, 1), Point3(1, 1, 1)});
    CHECK(s.is_zero_length());
    CHECK_THROWS_WITH_AS(resample(s, 5), doctest::Contains("zero-length fiber"), InvalidArgument);
    CHECK_THROWS_AS(resample(line(0, {0, 0, 0}, {1, 0, 0}), 1), InvalidArgument);
}

TEST_CASE("resample property: endpoints exact, length never grows") {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(-50, 50);
    std::uniform_int_distribution<int> count(2, 30);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Point3> pts(static_cast<std::size_t>(count(gen)));
        for (auto& p : pts) p = Point3(u(gen), u(gen), u(gen));
        const Streamline s(0, pts);
        const auto n = static_cast<std::size_t>(count(gen));
        const auto r = resample(s, n);
        REQUIRE(r.size() == n);
        CHECK(r[0] == s[0]);
        CHECK(r[n - 1] == s[s.size() - 1]);
        CHECK(r.arc_length() <= s.arc_length() * (1 + 1e-9));
    }
    // straight polyline with uneven spacing keeps its length
    const Streamline straight(0, {Point3(0, 0, 0), Point3(0.5, 0, 0), Point3(3, 0, 0), Point3(10, 0, 0)});
    CHECK(resample(straight, 7).arc_length() == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("classify_hemisphere") {
    CHECK(classify_hemisphere(line(0, {-30, 0, 0}, {-5, 10, 0})) == Hemisphere::Left);
    CHECK(classify_hemisphere(line(0, {5, 0, 0}, {30, 10, 0})) == Hemisphere::Right);
    CHECK(classify_hemisphere(line(0, {-20, 0, 0}, {20, 0, 0})) == Hemisphere::Commissural);
    // within tolerance on both sides: tie goes to commissural
    CHECK(classify_hemisphere(line(0, {-1, 0, 0}, {1.5, 10, 0}), 2.0) == Hemisphere::Commissural);
    // slightly over the midline but inside tau still counts as left
    CHECK(classify_hemisphere(line(0, {-30, 0, 0}, {1.9, 0, 0}), 2.0) == Hemisphere::Left);
    CHECK(classify_hemisphere(line(0, {-30, 0, 0}, {2.1, 0, 0}), 2.0) == Hemisphere::Commissural);
    CHECK_THROWS_AS(classify_hemisphere(line(0, {-30, 0, 0}, {-2, 0, 0}), -1.0), InvalidArgument);
}

TEST_CASE("classify_hemisphere is invariant to point order") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(-40, 40);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Point3> pts(8);
        for (auto& p : pts) p = Point3(u(gen) * (trial % 3 == 0 ? 1.0 : 0.3) + (trial % 3 - 1) * 20.0, u(gen), u(gen));
        const auto label = classify_hemisphere(Streamline(0, pts));
        std::shuffle(pts.begin(), pts.end(), gen);
        CHECK(classify_hemisphere(Streamline(0, pts)) == label);
    }
}

TEST_CASE("split_by_hemisphere partitions the bundle") {
    SUBCASE("one fiber per class") {
        const FiberBundle b({line(0, {-30, 0, 0}, {-5, 0, 0}), line(1, {5, 0, 0}, {30, 0, 0}), line(2, {-20, 0, 0}, {20, 0, 0})},
                            FiberFeatures{{0.1, 0.2, 0.3}, {}});
        const auto s = split_by_hemisphere(b);
        REQUIRE(s.left.size() == 1);
        REQUIRE(s.right.size() == 1);
        REQUIRE(s.commissural.size() == 1);
        CHECK(s.left[0].id() == 0);
        CHECK(s.right[0].id() == 1);
        CHECK(s.commissural[0].id() == 2);
        CHECK(s.right.features().mean_fa[0] == 0.2);
    }
    SUBCASE("all left") {
        const FiberBundle b({line(0, {-30, 0, 0}, {-5, 0, 0}), line(1, {-25, 0, 0}, {-10, 3, 0})});
        const auto s = split_by_hemisphere(b);
        CHECK(s.left.size() == 2);
        CHECK(s.right.empty());
        CHECK(s.commissural.empty());
    }
    SUBCASE("mixed bundle") {
        std::mt19937 gen(3);
        std::uniform_real_distribution<double> u(-40, 40);
        std::vector<Streamline> lines;
        FiberFeatures f;
        for (FiberId i = 0; i < 10; ++i) {
            lines.push_back(line(i, {u(gen), 0, 0}, {u(gen), 10, 0}));
            f.mean_fa.push_back(0.05 * i);
        }
        const FiberBundle b(lines, f);
        const auto s = split_by_hemisphere(b);
        CHECK(s.left.size() + s.right.size() + s.commissural.size() == 10);
        std::vector<FiberId> ids;
        for (const auto* part : {&s.left, &s.right, &s.commissural})
            for (std::size_t i = 0; i < part->size(); ++i) {
                ids.push_back((*part)[i].id());
                CHECK(part->features().mean_fa[i] == f.mean_fa[(*part)[i].id()]);
            }
        std::sort(ids.begin(), ids.end());
        CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
        CHECK(ids.size() == 10);
    }
}

TEST_CASE("bundle validation") {
    const auto a = line(0, {0, 0, 0}, {1, 0, 0});
    CHECK_THROWS_AS(FiberBundle({a, a}), InvalidArgument);  // duplicate id
    CHECK_THROWS_AS(FiberBundle({a}, FiberFeatures{{0.5, 0.6}, {}}), InvalidArgument);
    CHECK_THROWS_AS(FiberBundle({a}, FiberFeatures{{1.5}, {}}), InvalidArgument);
    const FiberBundle ok({a, line(5, {0, 0, 0}, {2, 0, 0})}, FiberFeatures{{0.5, 0.6}, {}});
    CHECK_FALSE(ok.has_dense_ids());
    CHECK(ok.index_of(5) == 1u);
    CHECK_FALSE(ok.index_of(2));
    CHECK_THROWS_WITH_AS(ok.features().get("mean_md"), doctest::Contains("not present"), InvalidArgument);
    CHECK_THROWS_WITH_AS(ok.features().get("gfa"), doctest::Contains("unknown feature"), InvalidArgument);
}
