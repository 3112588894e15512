#pragma once
// Binary PGM (P5) persistence. Masks use maxval 255 with foreground 255;
// probability and variance maps use maxval 65535 with big-endian samples.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "carotid/errors.hpp"
#include "carotid/grid.hpp"

namespace carotid {

namespace detail {

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
};

inline int read_pgm_int(std::istream& in) {
    // skips whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed PGM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

inline PgmHeader read_pgm_header(std::istream& in, const std::string& path) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5) file: " + path);
    PgmHeader h;
    h.width = read_pgm_int(in);
    h.height = read_pgm_int(in);
    h.maxval = read_pgm_int(in);
    // read_pgm_int consumed exactly one whitespace-or-digit boundary char
    if (h.width < 1 || h.height < 1) throw IoError("bad PGM dimensions in " + path);
    return h;
}

} // namespace detail

inline void write_mask_pgm(const WallMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PGM file: " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(mask.width));
    for (int i = 0; i < mask.height; ++i) {
        for (int j = 0; j < mask.width; ++j)
            row[static_cast<std::size_t>(j)] = mask.at(i, j) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), mask.width);
    }
    if (!out) throw IoError("failed writing PGM file: " + path);
}

// Nonzero bytes load as foreground.
inline WallMask read_mask_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PGM file: " + path);
    const auto h = detail::read_pgm_header(in, path);
    if (h.maxval != 255) throw IoError("mask PGM must have maxval 255: " + path);
    WallMask mask(h.height, h.width);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(h.width));
    for (int i = 0; i < h.height; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), h.width);
        if (!in) throw IoError("PGM file truncated: " + path);
        for (int j = 0; j < h.width; ++j) mask.at(i, j) = row[static_cast<std::size_t>(j)] ? 1 : 0;
    }
    return mask;
}

// 16-bit map with value = round(x / scale_max * 65535), big-endian.
// Use scale_max = 1.0 for mean maps and 0.25 for variance maps.
inline void write_map_pgm16(const Grid& map, double scale_max, const std::string& path) {
    if (!(scale_max > 0.0)) throw OutOfRange("scale_max must be > 0");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PGM file: " + path);
    out << "P5\n" << map.width << " " << map.height << "\n65535\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(map.width) * 2);
    for (int i = 0; i < map.height; ++i) {
        for (int j = 0; j < map.width; ++j) {
            double x = map.at(i, j) / scale_max;
            x = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
            const auto q = static_cast<std::uint16_t>(std::lround(x * 65535.0));
            row[static_cast<std::size_t>(j) * 2] = static_cast<std::uint8_t>(q >> 8);
            row[static_cast<std::size_t>(j) * 2 + 1] = static_cast<std::uint8_t>(q & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("failed writing PGM file: " + path);
}

inline Grid read_map_pgm16(double scale_max, const std::string& path) {
    if (!(scale_max > 0.0)) throw OutOfRange("scale_max must be > 0");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PGM file: " + path);
    const auto h = detail::read_pgm_header(in, path);
    if (h.maxval != 65535) throw IoError("map PGM must have maxval 65535: " + path);
    Grid map(h.height, h.width);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(h.width) * 2);
    for (int i = 0; i < h.height; ++i) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("PGM file truncated: " + path);
        for (int j = 0; j < h.width; ++j) {
            const std::uint16_t q = static_cast<std::uint16_t>(
                (row[static_cast<std::size_t>(j) * 2] << 8) | row[static_cast<std::size_t>(j) * 2 + 1]);
            map.at(i, j) = static_cast<double>(q) / 65535.0 * scale_max;
        }
    }
    return map;
}

} // namespace carotid
