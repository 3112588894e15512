#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "carotid/geometry.hpp"
#include "carotid/rng.hpp"

using namespace carotid;

namespace {

// Independent resampling oracle: fresh cumulative-length table and a
// from-scratch segment search per target.
std::vector<Point2> resample_oracle(const std::vector<Point2>& pts, int s_count) {
    std::vector<double> cum{0.0};
    for (std::size_t k = 1; k < pts.size(); ++k)
        cum.push_back(cum.back() + std::hypot(pts[k].x - pts[k - 1].x, pts[k].y - pts[k - 1].y));
    std::vector<Point2> out;
    for (int k = 0; k < s_count; ++k) {
        const double target = cum.back() * k / (s_count - 1);
        std::size_t seg = 0;
        while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0 ? (target - cum[seg]) / len : 0.0;
        out.push_back({pts[seg].x + t * (pts[seg + 1].x - pts[seg].x),
                       pts[seg].y + t * (pts[seg + 1].y - pts[seg].y)});
    }
    return out;
}

// Classic even-odd ray-cast point-in-polygon test (the rasterization oracle).
bool inside_even_odd(double px, double py, const std::vector<Point2>& poly) {
    bool in = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[i].x, yi = poly[i].y;
        const double xj = poly[j].x, yj = poly[j].y;
        if (((yi > py) != (yj > py)) && (px < (xj - xi) * (py - yi) / (yj - yi) + xi))
            in = !in;
    }
    return in;
}

Contour make_contour(std::vector<Point2> pts, BoundarySide side = BoundarySide::li) {
    Contour c;
    c.points = std::move(pts);
    c.side = side;
    return c;
}

// Random convex polygon inscribed in a circle, split into an upper (LI) and
// lower (MA) chain between its leftmost and rightmost vertices.
struct ConvexPair {
    Contour li;
    Contour ma;
    std::vector<Point2> polygon; // li points + reversed ma points
};

ConvexPair random_convex_pair(Rng& rng, double cx, double cy, double radius) {
    const int n = 5 + static_cast<int>(rng.below(9)); // 5..13 vertices
    std::vector<double> angles;
    for (int k = 0; k < n; ++k)
        angles.push_back(2.0 * std::numbers::pi * (k + 0.8 * rng.uniform()) / n);
    std::vector<Point2> poly;
    for (double a : angles) poly.push_back({cx + radius * std::cos(a), cy + radius * std::sin(a)});

    std::size_t left = 0, right = 0;
    for (std::size_t k = 1; k < poly.size(); ++k) {
        if (poly[k].x < poly[left].x) left = k;
        if (poly[k].x > poly[right].x) right = k;
    }
    ConvexPair pair;
    for (std::size_t k = left;; k = (k + 1) % poly.size()) {
        pair.li.points.push_back(poly[k]);
        if (k == right) break;
    }
    for (std::size_t k = left;; k = (k + poly.size() - 1) % poly.size()) {
        pair.ma.points.push_back(poly[k]);
        if (k == right) break;
    }
    pair.ma.side = BoundarySide::ma;
    pair.polygon = pair.li.points;
    for (auto it = pair.ma.points.rbegin(); it != pair.ma.points.rend(); ++it)
        pair.polygon.push_back(*it);
    return pair;
}

} // namespace

TEST_CASE("parse_contour reads whitespace-separated pairs") {
    const Contour c = parse_contour("3.0 5.0\n4.0 5.0", BoundarySide::li);
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[0].x == 3.0);
    CHECK(c.points[0].y == 5.0);
    CHECK(c.points[1].x == 4.0);
    CHECK(c.points[1].y == 5.0);
}

TEST_CASE("parse_contour skips blank lines and accepts CRLF") {
    CHECK(parse_contour("1 2\n\n3 4\n", BoundarySide::ma).points.size() == 2);
    CHECK(parse_contour("1 2\r\n3 4\r\n", BoundarySide::ma).points.size() == 2);
    CHECK(parse_contour("1 2\n3 4", BoundarySide::ma).points.size() == 2); // no trailing newline
}

TEST_CASE("parse_contour rejects malformed input") {
    CHECK_THROWS_AS(parse_contour("1 2\n3", BoundarySide::li), MalformedLine);
    CHECK_THROWS_AS(parse_contour("1 2\n3 4 5\n", BoundarySide::li), MalformedLine);
    CHECK_THROWS_AS(parse_contour("1 2\nx 4\n", BoundarySide::li), MalformedLine);
    CHECK_THROWS_AS(parse_contour("1 2\n-3 4\n", BoundarySide::li), MalformedLine);
    CHECK_THROWS_AS(parse_contour("1 2\n", BoundarySide::li), TooFewPoints);
    CHECK_THROWS_AS(parse_contour("", BoundarySide::li), TooFewPoints);
}

TEST_CASE("parse_contour collapses consecutive duplicate points") {
    const Contour c = parse_contour("1 1\n1 1\n2 2\n", BoundarySide::li);
    REQUIRE(c.points.size() == 2);
    CHECK_THROWS_AS(parse_contour("1 1\n1 1\n", BoundarySide::li), TooFewPoints);
}

TEST_CASE("resample_arclength on a straight segment") {
    const Contour c = make_contour({{0, 0}, {10, 0}});
    const Contour r = resample_arclength(c, 3);
    REQUIRE(r.points.size() == 3);
    CHECK(r.points[0].x == 0.0);
    CHECK(r.points[1].x == Catch::Approx(5.0).margin(1e-12));
    CHECK(r.points[2].x == 10.0);
}

TEST_CASE("resample_arclength with S=2 keeps the endpoints") {
    const Contour c = make_contour({{0, 0}, {3, 1}, {7, 2}, {9, 9}});
    const Contour r = resample_arclength(c, 2);
    REQUIRE(r.points.size() == 2);
    CHECK(r.points[0].x == 0.0);
    CHECK(r.points[0].y == 0.0);
    CHECK(r.points[1].x == 9.0);
    CHECK(r.points[1].y == 9.0);
}

TEST_CASE("resample_arclength L-shape matches the cumulative-length oracle") {
    const Contour c = make_contour({{0, 0}, {4, 0}, {4, 4}});
    const Contour r = resample_arclength(c, 3);
    // frozen from the oracle: the half-length point of total length 8 is the corner
    CHECK(r.points[1].x == Catch::Approx(4.0).margin(1e-12));
    CHECK(r.points[1].y == Catch::Approx(0.0).margin(1e-12));

    const auto oracle = resample_oracle(c.points, 7);
    const Contour r7 = resample_arclength(c, 7);
    for (std::size_t k = 0; k < oracle.size(); ++k) {
        CHECK(r7.points[k].x == Catch::Approx(oracle[k].x).margin(1e-12));
        CHECK(r7.points[k].y == Catch::Approx(oracle[k].y).margin(1e-12));
    }
}

// Re-resampling measures arc length along the chord polyline, so exact
// reproduction holds when sample positions do not straddle corners: straight
// segments always, and polylines whose corners coincide with samples. Curved
// dense contours drift only by the accumulated corner cut.
TEST_CASE("resample_arclength is idempotent where corners align") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const double x0 = rng.uniform(0.0, 5.0), y0 = rng.uniform(0.0, 5.0);
        const double x1 = x0 + rng.uniform(2.0, 30.0), y1 = rng.uniform(0.0, 40.0);
        const Contour straight = make_contour({{x0, y0}, {x1, y1}});
        const Contour once = resample_arclength(straight, 17);
        const Contour twice = resample_arclength(once, 17);
        for (std::size_t k = 0; k < once.points.size(); ++k) {
            REQUIRE(std::abs(once.points[k].x - twice.points[k].x) < 1e-9);
            REQUIRE(std::abs(once.points[k].y - twice.points[k].y) < 1e-9);
        }
    }
    // L-shape with its corner at half arc length: odd S puts a sample on it
    const Contour ell = make_contour({{0, 0}, {4, 0}, {4, 4}});
    for (int s : {3, 5, 9, 33}) {
        const Contour once = resample_arclength(ell, s);
        const Contour twice = resample_arclength(once, s);
        for (std::size_t k = 0; k < once.points.size(); ++k) {
            REQUIRE(std::abs(once.points[k].x - twice.points[k].x) < 1e-9);
            REQUIRE(std::abs(once.points[k].y - twice.points[k].y) < 1e-9);
        }
    }
}

TEST_CASE("resample_arclength drift on gentle curved contours stays small") {
    // CUBS-like near-horizontal wall boundary, mild curvature
    Contour c;
    for (int k = 0; k <= 60; ++k) {
        const double x = 2.0 * k;
        c.points.push_back({x, 40.0 + 3.0 * std::sin(x / 25.0)});
    }
    const Contour once = resample_arclength(c, 100);
    const Contour twice = resample_arclength(once, 100);
    double worst = 0.0;
    for (std::size_t k = 0; k < once.points.size(); ++k)
        worst = std::max(worst, std::hypot(once.points[k].x - twice.points[k].x,
                                            once.points[k].y - twice.points[k].y));
    CHECK(worst < 1e-3); // corner-cut drift, far below annotation resolution
}

TEST_CASE("resample_arclength rejects degenerate inputs") {
    Contour c = make_contour({{1, 1}, {2, 2}});
    c.points[1] = c.points[0]; // bypasses parse-level dedup
    CHECK_THROWS_AS(resample_arclength(c, 3), DegenerateContour);
    CHECK_THROWS_AS(resample_arclength(make_contour({{0, 0}, {1, 0}}), 1), OutOfRange);
}

TEST_CASE("thickness_profile of parallel horizontal lines is constant") {
    const Contour li = make_contour({{2, 3}, {12, 3}});
    const Contour ma = make_contour({{2, 6}, {12, 6}}, BoundarySide::ma);
    const auto p = thickness_profile(li, ma, 100);
    REQUIRE(p.samples_px.size() == 100);
    for (double d : p.samples_px) REQUIRE(std::abs(d - 3.0) < 1e-9);
}

TEST_CASE("thickness_profile of identical contours is zero") {
    const Contour li = make_contour({{0, 1}, {5, 2}, {9, 1}});
    const auto p = thickness_profile(li, li, 50);
    for (double d : p.samples_px) REQUIRE(d == 0.0);
}

TEST_CASE("thickness_profile of a tilted MA interpolates linearly") {
    const Contour li = make_contour({{0, 3}, {10, 3}});
    const Contour ma = make_contour({{0, 5}, {10, 7}}, BoundarySide::ma);
    const auto p = thickness_profile(li, ma, 3);
    CHECK(p.samples_px[0] == Catch::Approx(2.0).margin(1e-9));
    CHECK(p.samples_px[1] == Catch::Approx(3.0).margin(1e-9));
    CHECK(p.samples_px[2] == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("thickness is invariant under reversal and translation") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Contour li, ma;
        double x = 1.0;
        for (int k = 0; k < 6; ++k) {
            li.points.push_back({x, 10.0 + rng.uniform(-1.0, 1.0)});
            ma.points.push_back({x, 16.0 + rng.uniform(-1.0, 1.0)});
            x += rng.uniform(1.0, 3.0);
        }
        const auto base = thickness_profile(li, ma, 40);

        Contour li_rev = li, ma_rev = ma;
        std::reverse(li_rev.points.begin(), li_rev.points.end());
        std::reverse(ma_rev.points.begin(), ma_rev.points.end());
        const auto reversed = thickness_profile(li_rev, ma_rev, 40);
        CHECK(mean_of(reversed.samples_px) == Catch::Approx(mean_of(base.samples_px)).margin(1e-9));

        Contour li_shift = li, ma_shift = ma;
        for (auto& p : li_shift.points) { p.x += 2.5; p.y += 1.25; }
        for (auto& p : ma_shift.points) { p.x += 2.5; p.y += 1.25; }
        const auto shifted = thickness_profile(li_shift, ma_shift, 40);
        for (std::size_t k = 0; k < base.samples_px.size(); ++k)
            REQUIRE(std::abs(shifted.samples_px[k] - base.samples_px[k]) < 1e-9);
    }
}

TEST_CASE("cimt_mm applies the calibration factor") {
    ThicknessProfile p;
    p.samples_px = {3.0, 3.0, 3.0};
    p.s_coords = {0.0, 0.5, 1.0};
    CHECK(cimt_mm(p, 0.06) == Catch::Approx(0.18).margin(1e-15));

    p.samples_px = {0.0, 0.0};
    p.s_coords = {0.0, 1.0};
    CHECK(cimt_mm(p, 0.07) == 0.0);
    CHECK_THROWS_AS(cimt_mm(p, 0.0), OutOfRange);
}

TEST_CASE("cimt_mm is linear in kappa") {
    Rng rng(5);
    ThicknessProfile p;
    for (int k = 0; k < 30; ++k) {
        p.samples_px.push_back(rng.uniform(0.0, 9.0));
        p.s_coords.push_back(k / 29.0);
    }
    for (double a : {0.5, 2.0, 7.25}) {
        const double kappa = 0.055;
        REQUIRE(cimt_mm(p, a * kappa) == Catch::Approx(a * cimt_mm(p, kappa)).epsilon(1e-14));
    }
}

TEST_CASE("wall_descriptors on fixtures") {
    ThicknessProfile constant;
    constant.samples_px = {4.0, 4.0, 4.0, 4.0};
    constant.s_coords = {0.0, 1.0 / 3, 2.0 / 3, 1.0};
    const WallMask empty(8, 8);
    auto d = wall_descriptors(constant, 0.1, empty);
    CHECK(d.thickness_std_mm == 0.0);
    CHECK(d.boundary_smoothness_mm == 0.0);
    CHECK(d.wall_area_ratio == 0.0);

    ThicknessProfile two;
    two.samples_px = {2.0, 4.0};
    two.s_coords = {0.0, 1.0};
    d = wall_descriptors(two, 0.1, empty);
    CHECK(d.max_thickness_mm == Catch::Approx(0.4).margin(1e-15));
    CHECK(d.thickness_std_mm == Catch::Approx(0.1).margin(1e-15)); // population std
    CHECK(d.cimt_mm == Catch::Approx(0.3).margin(1e-15));

    WallMask half(4, 4);
    for (int j = 0; j < 4; ++j) half.at(0, j) = 1;
    d = wall_descriptors(two, 0.1, half);
    CHECK(d.wall_area_ratio == Catch::Approx(0.25));
}

TEST_CASE("rasterize_mask fills the 15-pixel rectangle fixture") {
    const Contour li = make_contour({{2, 3}, {7, 3}});
    const Contour ma = make_contour({{2, 6}, {7, 6}}, BoundarySide::ma);
    const WallMask mask = rasterize_mask(li, ma, 10, 10);
    CHECK(mask.foreground_count() == 15);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const bool expect = (j >= 2 && j <= 6) && (i >= 3 && i <= 5);
            REQUIRE(mask.at(i, j) == (expect ? 1 : 0));
        }
}

TEST_CASE("rasterize_mask of coincident boundaries is empty with a warning") {
    const Contour li = make_contour({{2, 3}, {7, 3}});
    RasterReport report;
    const WallMask mask = rasterize_mask(li, li, 10, 10, &report);
    CHECK(mask.foreground_count() == 0);
    CHECK(report.empty_mask);
}

TEST_CASE("rasterize_mask clips out-of-bounds points and reports it") {
    const Contour li = make_contour({{2, 1}, {30, 1}});
    const Contour ma = make_contour({{2, 5}, {30, 5}}, BoundarySide::ma);
    RasterReport report;
    const WallMask mask = rasterize_mask(li, ma, 8, 8, &report);
    CHECK(report.clipped_points);
    CHECK(mask.foreground_count() > 0);
}

TEST_CASE("rasterize_mask is invariant under LI/MA swap") {
    Rng rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const auto pair = random_convex_pair(rng, 16.0, 16.0, 12.0);
        const WallMask a = rasterize_mask(pair.li, pair.ma, 32, 32);
        const WallMask b = rasterize_mask(pair.ma, pair.li, 32, 32);
        REQUIRE(a.v == b.v);
    }
}

TEST_CASE("rasterize_mask agrees with the even-odd oracle on convex pairs") {
    Rng rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        const auto pair = random_convex_pair(rng, 32.0, 32.0, 20.0 + 8.0 * rng.uniform());
        const WallMask mask = rasterize_mask(pair.li, pair.ma, 64, 64);
        for (int i = 0; i < 64; ++i)
            for (int j = 0; j < 64; ++j) {
                const bool oracle = inside_even_odd(j + 0.5, i + 0.5, pair.polygon);
                REQUIRE(mask.at(i, j) == (oracle ? 1 : 0));
            }
    }
}

TEST_CASE("mask_to_boundaries recovers the band envelope") {
    const Contour li = make_contour({{2, 3}, {7, 3}});
    const Contour ma = make_contour({{2, 6}, {7, 6}}, BoundarySide::ma);
    const WallMask mask = rasterize_mask(li, ma, 10, 10);
    const auto boundaries = mask_to_boundaries(mask);
    REQUIRE(boundaries.has_value());
    CHECK(boundaries->first.points.size() == 5); // columns 2..6
    CHECK(boundaries->first.points.front().y == Catch::Approx(3.5));
    CHECK(boundaries->second.points.front().y == Catch::Approx(5.5));
    CHECK_FALSE(mask_to_boundaries(WallMask(4, 4)).has_value());
}
