#pragma once
// LI/MA boundary processing: annotation parsing, arc-length resampling,
// thickness profiles, calibrated CIMT, morphological descriptors and
// rasterization of the dense intima-media mask.
//
// Conventions:
//   * Image pixel (i, j) = (row, column) has its center at (j + 0.5, i + 0.5)
//     in contour coordinates (x right, y down).
//   * Thickness correspondence pairs points at equal normalized arc length
//     after both contours are canonically oriented (endpoint with smaller x
//     first, ties broken by smaller y).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "carotid/errors.hpp"
#include "carotid/grid.hpp"

namespace carotid {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

enum class BoundarySide { li, ma };
enum class ScanSide { left, right };

// Ordered planar polyline of a LI or MA boundary, pixel coordinates.
struct Contour {
    std::vector<Point2> points;
    BoundarySide side = BoundarySide::li;
};

// Wall thickness sampled at S normalized arc-length coordinates.
struct ThicknessProfile {
    std::vector<double> samples_px;
    std::vector<double> s_coords; // strictly increasing in [0, 1]
};

struct WallDescriptors {
    double cimt_mm = 0.0;
    double max_thickness_mm = 0.0;
    double thickness_std_mm = 0.0;
    double wall_area_ratio = 0.0;        // foreground pixels / (H * W)
    double boundary_smoothness_mm = 0.0; // mean |second difference| of thickness
};

struct RasterReport {
    bool clipped_points = false;
    bool empty_mask = false;
};

inline void validate_contour(const Contour& c) {
    if (c.points.size() < 2)
        throw TooFewPoints("contour needs at least 2 points");
    for (std::size_t k = 1; k < c.points.size(); ++k)
        if (c.points[k].x == c.points[k - 1].x && c.points[k].y == c.points[k - 1].y)
            throw DegenerateContour("consecutive duplicate contour points");
}

// ---------------------------------------------------------------------------
// Annotation parsing
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_double_token(std::string_view tok, double& out) {
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

} // namespace detail

// Reads "x y" pairs, one per line, LF or CRLF, blank lines skipped.
// Consecutive duplicate points are collapsed so that annotations with
// repeated vertices stay usable.
inline Contour parse_contour(std::string_view text, BoundarySide side) {
    Contour c;
    c.side = side;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::vector<std::string_view> toks;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            std::size_t j = i;
            while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
            if (j > i) toks.push_back(line.substr(i, j - i));
            i = j;
        }
        if (toks.empty()) continue; // blank line
        if (toks.size() != 2)
            throw MalformedLine("line " + std::to_string(line_no) + ": expected 2 tokens, got " +
                                std::to_string(toks.size()));
        Point2 p;
        if (!detail::parse_double_token(toks[0], p.x) || !detail::parse_double_token(toks[1], p.y))
            throw MalformedLine("line " + std::to_string(line_no) + ": non-numeric token");
        if (!(std::isfinite(p.x) && std::isfinite(p.y)) || p.x < 0.0 || p.y < 0.0)
            throw MalformedLine("line " + std::to_string(line_no) + ": coordinates must be finite and >= 0");
        if (!c.points.empty() && c.points.back().x == p.x && c.points.back().y == p.y)
            continue;
        c.points.push_back(p);
    }
    if (c.points.size() < 2)
        throw TooFewPoints("contour file has fewer than 2 distinct points");
    return c;
}

// ---------------------------------------------------------------------------
// Arc-length resampling and thickness
// ---------------------------------------------------------------------------

inline double polyline_length(const Contour& c) {
    double len = 0.0;
    for (std::size_t k = 1; k < c.points.size(); ++k)
        len += distance(c.points[k - 1], c.points[k]);
    return len;
}

// S points at equal cumulative arc-length spacing; endpoints preserved exactly.
inline Contour resample_arclength(const Contour& c, int s_count) {
    validate_contour(c);
    if (s_count < 2) throw OutOfRange("resample count must be >= 2");

    const auto& pts = c.points;
    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t k = 1; k < pts.size(); ++k)
        cum[k] = cum[k - 1] + distance(pts[k - 1], pts[k]);
    const double total = cum.back();
    if (total <= 0.0) throw DegenerateContour("contour has zero arc length");

    Contour out;
    out.side = c.side;
    out.points.resize(static_cast<std::size_t>(s_count));
    out.points.front() = pts.front();
    out.points.back() = pts.back();

    std::size_t seg = 0;
    for (int k = 1; k + 1 < s_count; ++k) {
        const double target = total * static_cast<double>(k) / static_cast<double>(s_count - 1);
        while (seg + 2 < pts.size() && cum[seg + 1] < target) ++seg;
        const double seg_len = cum[seg + 1] - cum[seg];
        const double t = seg_len > 0.0 ? (target - cum[seg]) / seg_len : 0.0;
        out.points[static_cast<std::size_t>(k)] = {pts[seg].x + t * (pts[seg + 1].x - pts[seg].x),
                                                   pts[seg].y + t * (pts[seg + 1].y - pts[seg].y)};
    }
    return out;
}

// Reorders so the endpoint with smaller x (ties: smaller y) comes first.
inline Contour canonically_oriented(const Contour& c) {
    validate_contour(c);
    const Point2& a = c.points.front();
    const Point2& b = c.points.back();
    const bool reverse = (b.x < a.x) || (b.x == a.x && b.y < a.y);
    if (!reverse) return c;
    Contour out;
    out.side = c.side;
    out.points.assign(c.points.rbegin(), c.points.rend());
    return out;
}

// samples[k] = |b_ma(s_k) - b_li(s_k)| in pixels, s_k = k / (S - 1).
inline ThicknessProfile thickness_profile(const Contour& li, const Contour& ma, int s_count) {
    const Contour li_r = resample_arclength(canonically_oriented(li), s_count);
    const Contour ma_r = resample_arclength(canonically_oriented(ma), s_count);
    ThicknessProfile p;
    p.samples_px.resize(static_cast<std::size_t>(s_count));
    p.s_coords.resize(static_cast<std::size_t>(s_count));
    for (int k = 0; k < s_count; ++k) {
        p.samples_px[static_cast<std::size_t>(k)] =
            distance(ma_r.points[static_cast<std::size_t>(k)], li_r.points[static_cast<std::size_t>(k)]);
        p.s_coords[static_cast<std::size_t>(k)] = static_cast<double>(k) / static_cast<double>(s_count - 1);
    }
    return p;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline void validate_profile(const ThicknessProfile& p) {
    if (p.samples_px.size() < 2 || p.samples_px.size() != p.s_coords.size())
        throw TooSmall("thickness profile needs >= 2 samples with matching s coordinates");
}

// Physical CIMT: kappa * mean thickness.
inline double cimt_mm(const ThicknessProfile& p, double kappa) {
    validate_profile(p);
    if (!(kappa > 0.0)) throw OutOfRange("calibration factor must be > 0");
    return kappa * mean_of(p.samples_px);
}

inline WallDescriptors wall_descriptors(const ThicknessProfile& p, double kappa, const WallMask& mask) {
    validate_profile(p);
    if (!(kappa > 0.0)) throw OutOfRange("calibration factor must be > 0");
    WallDescriptors d;
    d.cimt_mm = kappa * mean_of(p.samples_px);

    double mx = 0.0, var = 0.0;
    const double mean_px = mean_of(p.samples_px);
    for (double s : p.samples_px) {
        mx = std::max(mx, s);
        var += (s - mean_px) * (s - mean_px);
    }
    var /= static_cast<double>(p.samples_px.size()); // population variance, matching the MC convention
    d.max_thickness_mm = kappa * mx;
    d.thickness_std_mm = kappa * std::sqrt(var);

    d.wall_area_ratio = mask.size() == 0
                            ? 0.0
                            : static_cast<double>(mask.foreground_count()) / static_cast<double>(mask.size());

    double smooth = 0.0;
    const std::size_t n = p.samples_px.size();
    if (n >= 3) {
        for (std::size_t k = 1; k + 1 < n; ++k)
            smooth += std::abs(p.samples_px[k + 1] - 2.0 * p.samples_px[k] + p.samples_px[k - 1]);
        smooth /= static_cast<double>(n - 2);
    }
    d.boundary_smoothness_mm = kappa * smooth;
    return d;
}

// ---------------------------------------------------------------------------
// Mask rasterization
// ---------------------------------------------------------------------------

// Fills the closed polygon [li points ... reversed ma points] by even-odd
// scanline rule; a pixel is foreground iff its center lies inside. Centers
// exactly on an edge follow the half-open crossing convention, so the result
// matches a ray-cast even-odd point test at every center. Vertices outside
// [0, width] x [0, height] are clamped.
inline WallMask rasterize_mask(const Contour& li, const Contour& ma, int height, int width,
                               RasterReport* report = nullptr) {
    validate_contour(li);
    validate_contour(ma);
    if (height < 1 || width < 1) throw OutOfRange("mask dimensions must be >= 1");

    RasterReport local;
    std::vector<Point2> poly;
    poly.reserve(li.points.size() + ma.points.size());
    auto push_clamped = [&](Point2 p) {
        Point2 q{std::clamp(p.x, 0.0, static_cast<double>(width)),
                 std::clamp(p.y, 0.0, static_cast<double>(height))};
        if (q.x != p.x || q.y != p.y) local.clipped_points = true;
        poly.push_back(q);
    };
    for (const Point2& p : li.points) push_clamped(p);
    for (auto it = ma.points.rbegin(); it != ma.points.rend(); ++it) push_clamped(*it);

    WallMask mask(height, width);
    const std::size_t n = poly.size();
    std::vector<double> xs;
    for (int i = 0; i < height; ++i) {
        const double yc = i + 0.5;
        xs.clear();
        for (std::size_t a = 0, b = n - 1; a < n; b = a++) {
            const Point2& p = poly[a];
            const Point2& q = poly[b];
            if ((p.y > yc) != (q.y > yc))
                xs.push_back(p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // centers with xs[k] <= j+0.5 < xs[k+1]
            int j0 = static_cast<int>(std::ceil(xs[k] - 0.5));
            int j1 = static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1;
            j0 = std::max(j0, 0);
            j1 = std::min(j1, width - 1);
            for (int j = j0; j <= j1; ++j) mask.at(i, j) = 1;
        }
    }
    local.empty_mask = mask.foreground_count() == 0;
    if (report) *report = local;
    return mask;
}

// Upper/lower boundary polylines recovered from a mask: per column with any
// foreground, the topmost pixel center becomes the LI point and the
// bottommost the MA point. Returns nullopt when fewer than 2 columns are
// occupied.
inline std::optional<std::pair<Contour, Contour>> mask_to_boundaries(const WallMask& mask) {
    Contour li, ma;
    li.side = BoundarySide::li;
    ma.side = BoundarySide::ma;
    for (int j = 0; j < mask.width; ++j) {
        int top = -1, bottom = -1;
        for (int i = 0; i < mask.height; ++i) {
            if (mask.at(i, j)) {
                if (top < 0) top = i;
                bottom = i;
            }
        }
        if (top < 0) continue;
        li.points.push_back({j + 0.5, top + 0.5});
        ma.points.push_back({j + 0.5, bottom + 0.5});
    }
    if (li.points.size() < 2) return std::nullopt;
    return std::make_pair(std::move(li), std::move(ma));
}

} // namespace carotid
