#include "cosmo/plot.hpp"

#include "cosmo/pngio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

namespace cosmo {

namespace {

struct Color {
    uint8_t r, g, b;
};

const Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
};

// Classic 5x7 column-encoded bitmap font, uppercase subset.
struct Glyph {
    char ch;
    uint8_t col[5];
};

const Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
    {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
    {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
    {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
    {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
    {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
    {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
    {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
    {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}},
    {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
    {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
    {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
    {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
    {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
    {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
    {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
    {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}},
    {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
    {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}},
    {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}},
    {')', {0x00, 0x41, 0x22, 0x1C, 0x00}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {'_', {0x40, 0x40, 0x40, 0x40, 0x40}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {',', {0x00, 0x50, 0x30, 0x00, 0x00}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
};

const uint8_t* glyph_for(char c) {
    char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.ch == u) return g.col;
    return kFont[0].col;  // unknown -> space
}

struct Canvas {
    int w, h;
    std::vector<uint8_t> rgb;
    Canvas(int w_, int h_) : w(w_), h(h_), rgb(static_cast<size_t>(w_) * h_ * 3, 255) {}

    void set(int x, int y, Color c) {
        if (x < 0 || x >= w || y < 0 || y >= h) return;
        size_t i = (static_cast<size_t>(y) * w + x) * 3;
        rgb[i] = c.r;
        rgb[i + 1] = c.g;
        rgb[i + 2] = c.b;
    }

    void line(int x0, int y0, int x1, int y1, Color c) {
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void thick_point(int x, int y, Color c) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) set(x + dx, y + dy, c);
    }

    void text(int x, int y, const std::string& s, Color c) {
        for (char ch : s) {
            const uint8_t* cols = glyph_for(ch);
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (cols[cx] & (1u << cy)) set(x + cx, y + cy, c);
            x += 6;
        }
    }

    void vtext(int x, int y, const std::string& s, Color c) {
        // rotated 90 degrees, reading bottom-to-top
        for (char ch : s) {
            const uint8_t* cols = glyph_for(ch);
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (cols[cx] & (1u << cy)) set(x + cy, y - cx, c);
            y -= 6;
        }
    }

    void save(const std::string& path) { write_png_rgb(path, w, h, rgb); }
};

std::string fmt_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct AxisScale {
    double lo, hi;
    double map(double v, int px0, int px1) const {
        double t = (v - lo) / (hi - lo);
        return px0 + t * (px1 - px0);
    }
};

AxisScale fit_axis(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
    if (hi - lo < 1e-12) {
        double pad = std::max(1e-6, std::abs(hi) * 0.1 + 1e-6);
        return {lo - pad, hi + pad};
    }
    double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

Color heat_color(double t) {
    auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
    double r, g, b;
    if (t < 0.5) {
        double u = t / 0.5;
        r = lerp(68, 33, u);
        g = lerp(1, 145, u);
        b = lerp(84, 140, u);
    } else {
        double u = (t - 0.5) / 0.5;
        r = lerp(33, 253, u);
        g = lerp(145, 231, u);
        b = lerp(140, 37, u);
    }
    return {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
}

}  // namespace

void plot_lines(const std::string& path, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series, int width,
                int height) {
    Canvas cv(width, height);
    const Color black{0, 0, 0}, gray{200, 200, 200};
    int left = 70, right = width - 18, top = 30, bottom = height - 44;

    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    AxisScale xs = fit_axis(xlo, xhi), ys = fit_axis(ylo, yhi);

    for (int t = 0; t <= 4; ++t) {
        double xv = xs.lo + (xs.hi - xs.lo) * t / 4.0;
        double yv = ys.lo + (ys.hi - ys.lo) * t / 4.0;
        int px = static_cast<int>(xs.map(xv, left, right));
        int py = static_cast<int>(ys.map(yv, bottom, top));
        cv.line(px, top, px, bottom, gray);
        cv.line(left, py, right, py, gray);
        cv.text(px - 12, bottom + 6, fmt_num(xv), black);
        cv.text(6, py - 3, fmt_num(yv), black);
    }
    cv.line(left, top, left, bottom, black);
    cv.line(left, bottom, right, bottom, black);
    cv.text(left + (right - left) / 2 - 3 * static_cast<int>(title.size()), 10, title, black);
    cv.text(left + (right - left) / 2 - 3 * static_cast<int>(xlabel.size()), height - 14, xlabel,
            black);
    cv.vtext(8, top + (bottom - top) / 2 + 3 * static_cast<int>(ylabel.size()), ylabel, black);

    int legend_y = top + 4;
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        Color c = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        int prev_x = 0, prev_y = 0;
        bool has_prev = false;
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            int px = static_cast<int>(xs.map(s.x[i], left, right));
            int py = static_cast<int>(ys.map(s.y[i], bottom, top));
            if (has_prev) cv.line(prev_x, prev_y, px, py, c);
            cv.thick_point(px, py, c);
            prev_x = px;
            prev_y = py;
            has_prev = true;
        }
        if (!s.label.empty()) {
            int lx = right - 6 * static_cast<int>(s.label.size()) - 30;
            cv.line(lx, legend_y + 3, lx + 16, legend_y + 3, c);
            cv.text(lx + 20, legend_y, s.label, black);
            legend_y += 11;
        }
    }
    cv.save(path);
}

void plot_heatmap(const std::string& path, const std::string& title,
                  const std::vector<std::string>& row_labels,
                  const std::vector<std::string>& col_labels,
                  const std::vector<std::vector<double>>& values) {
    int rows = static_cast<int>(values.size());
    int cols = rows > 0 ? static_cast<int>(values[0].size()) : 0;
    int cell_w = 86, cell_h = 34, left = 110, top = 40;
    int width = left + cols * cell_w + 20, height = top + rows * cell_h + 24;
    Canvas cv(width, height);
    const Color black{0, 0, 0};

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : values)
        for (double v : row) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) hi = lo + 1.0;

    cv.text(left, 10, title, black);
    for (int c = 0; c < cols; ++c)
        cv.text(left + c * cell_w + 8, top - 14, col_labels[static_cast<size_t>(c)], black);
    for (int r = 0; r < rows; ++r) {
        cv.text(8, top + r * cell_h + cell_h / 2 - 3, row_labels[static_cast<size_t>(r)], black);
        for (int c = 0; c < cols; ++c) {
            double v = values[static_cast<size_t>(r)][static_cast<size_t>(c)];
            double t = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
            Color cc = heat_color(t);
            for (int y = 0; y < cell_h - 2; ++y)
                for (int x = 0; x < cell_w - 2; ++x)
                    cv.set(left + c * cell_w + x, top + r * cell_h + y, cc);
            Color txt = t > 0.7 ? Color{30, 30, 30} : Color{240, 240, 240};
            cv.text(left + c * cell_w + 6, top + r * cell_h + cell_h / 2 - 5, fmt_num(v), txt);
        }
    }
    cv.save(path);
}

}  // namespace cosmo
