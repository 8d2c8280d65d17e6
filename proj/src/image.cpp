#include "cplab/image.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace cplab::img {

Image luminance(const Image& x) {
    if (x.channels == 1) return x;
    Image out(x.height, x.width, 1);
    const float inv = 1.0f / static_cast<float>(x.channels);
    for (int y = 0; y < x.height; ++y)
        for (int xx = 0; xx < x.width; ++xx) {
            float s = 0;
            for (int c = 0; c < x.channels; ++c) s += x.at(y, xx, c);
            out.at(y, xx) = s * inv;
        }
    return out;
}

Image resize_nearest(const Image& x, int h, int w) {
    check(h > 0 && w > 0, "resize_nearest: target ", h, "x", w, " invalid");
    Image out(h, w, x.channels);
    for (int y = 0; y < h; ++y) {
        const int sy = std::min(x.height - 1, y * x.height / h);
        for (int xx = 0; xx < w; ++xx) {
            const int sx = std::min(x.width - 1, xx * x.width / w);
            for (int c = 0; c < x.channels; ++c) out.at(y, xx, c) = x.at(sy, sx, c);
        }
    }
    return out;
}

Corner corner_from_string(const std::string& s) {
    if (s == "top-left") return Corner::TopLeft;
    if (s == "top-right") return Corner::TopRight;
    if (s == "bottom-left") return Corner::BottomLeft;
    if (s == "bottom-right") return Corner::BottomRight;
    fail("trigger placement '", s,
         "' unknown (top-left, top-right, bottom-left, bottom-right)");
}

std::string corner_to_string(Corner c) {
    switch (c) {
        case Corner::TopLeft: return "top-left";
        case Corner::TopRight: return "top-right";
        case Corner::BottomLeft: return "bottom-left";
        case Corner::BottomRight: return "bottom-right";
    }
    return "bottom-right";
}

PatchRegion patch_region(const TriggerPatch& patch, int h, int w) {
    check(patch.area_fraction > 0.0 && patch.area_fraction < 1.0,
          "trigger: area_fraction ", patch.area_fraction, " outside (0,1)");
    const int side =
        static_cast<int>(std::lround(std::sqrt(patch.area_fraction) * std::min(h, w)));
    check(side >= 1 && side <= std::min(h, w), "trigger: resized glyph side ", side,
          " does not fit a ", h, "x", w, " image");
    PatchRegion r;
    r.side = side;
    switch (patch.placement) {
        case Corner::TopLeft: r.y0 = 0; r.x0 = 0; break;
        case Corner::TopRight: r.y0 = 0; r.x0 = w - side; break;
        case Corner::BottomLeft: r.y0 = h - side; r.x0 = 0; break;
        case Corner::BottomRight: r.y0 = h - side; r.x0 = w - side; break;
    }
    return r;
}

Image composite_trigger(const Image& x, const TriggerPatch& patch) {
    check(patch.strength >= 0.0 && patch.strength <= 1.0, "trigger: strength ",
          patch.strength, " outside [0,1]");
    check(!patch.glyph.values.empty(), "trigger: glyph is empty");
    const auto region = patch_region(patch, x.height, x.width);

    const Image glyph = resize_nearest(luminance(patch.glyph), region.side, region.side);
    const auto [lo, hi] = std::minmax_element(glyph.values.begin(), glyph.values.end());
    if (*lo == *hi)
        std::cerr << "[cplab] warning: trigger glyph is constant; it will produce no edges\n";

    Image out = x;
    const float a = static_cast<float>(patch.strength);
    const float ia = 1.0f - a;
    for (int y = 0; y < region.side; ++y)
        for (int xx = 0; xx < region.side; ++xx) {
            const float g = glyph.at(y, xx);
            for (int c = 0; c < x.channels; ++c) {
                float& v = out.at(region.y0 + y, region.x0 + xx, c);
                v = ia * v + a * g;
            }
        }
    return out;
}

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// 5x5 Gaussian blur, replicate border; sigma <= 0 is the identity.
std::vector<double> blur5(const std::vector<double>& in, int h, int w, double sigma) {
    if (sigma <= 0.0) return in;
    double k[5];
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        k[i + 2] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + 2];
    }
    for (double& v : k) v /= sum;
    std::vector<double> tmp(in.size()), out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int i = -2; i <= 2; ++i) s += k[i + 2] * in[y * w + clampi(x + i, 0, w - 1)];
            tmp[y * w + x] = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp[clampi(y + i, 0, h - 1) * w + x];
            out[y * w + x] = s;
        }
    return out;
}

}  // namespace

Image edge_map(const Image& x, const EdgeParams& params) {
    check(params.threshold_fraction > 0.0 && params.threshold_fraction < 1.0,
          "edge_map: threshold_fraction ", params.threshold_fraction, " outside (0,1)");
    const Image lum = luminance(x);
    const int h = lum.height, w = lum.width;
    std::vector<double> v(lum.values.begin(), lum.values.end());
    v = blur5(v, h, w, params.blur_sigma);

    // Sobel magnitude with replicate border
    std::vector<double> mag(static_cast<size_t>(h) * w, 0.0);
    double maxmag = 0.0;
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            auto px = [&](int yy, int xc) {
                return v[clampi(yy, 0, h - 1) * w + clampi(xc, 0, w - 1)];
            };
            const double gx = (px(y - 1, xx + 1) - px(y - 1, xx - 1)) +
                              2.0 * (px(y, xx + 1) - px(y, xx - 1)) +
                              (px(y + 1, xx + 1) - px(y + 1, xx - 1));
            const double gy = (px(y + 1, xx - 1) - px(y - 1, xx - 1)) +
                              2.0 * (px(y + 1, xx) - px(y - 1, xx)) +
                              (px(y + 1, xx + 1) - px(y - 1, xx + 1));
            const double m = std::sqrt(gx * gx + gy * gy);
            mag[y * w + xx] = m;
            maxmag = std::max(maxmag, m);
        }

    Image out(h, w, 1);
    if (maxmag == 0.0) return out;  // constant image: all-zero map
    const double thr = params.threshold_fraction * maxmag;
    for (size_t i = 0; i < mag.size(); ++i) out.values[i] = mag[i] > thr ? 1.0f : 0.0f;
    return out;
}

double mse(const Image& a, const Image& b) {
    check(a.same_shape(b), "mse: shapes ", a.height, "x", a.width, "x", a.channels, " vs ",
          b.height, "x", b.width, "x", b.channels, " differ");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.values[i]) - b.values[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b) {
    check(a.same_shape(b), "ssim: shapes ", a.height, "x", a.width, " vs ", b.height, "x",
          b.width, " differ");
    const Image la = luminance(a), lb = luminance(b);
    const int h = la.height, w = la.width;
    constexpr int kWin = 11, kRad = 5;
    check(h >= kWin && w >= kWin, "ssim: image ", h, "x", w, " smaller than the ", kWin, "x",
          kWin, " window");

    // separable Gaussian window, sigma 1.5, normalized
    double k[kWin];
    double sum = 0.0;
    for (int i = -kRad; i <= kRad; ++i) {
        k[i + kRad] = std::exp(-0.5 * i * i / (1.5 * 1.5));
        sum += k[i + kRad];
    }
    for (double& v : k) v /= sum;

    auto filt = [&](const std::vector<double>& in) {
        // horizontal then vertical; only the valid interior is consumed
        std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = kRad; x < w - kRad; ++x) {
                double s = 0;
                for (int i = -kRad; i <= kRad; ++i) s += k[i + kRad] * in[y * w + x + i];
                tmp[y * w + x] = s;
            }
        for (int y = kRad; y < h - kRad; ++y)
            for (int x = kRad; x < w - kRad; ++x) {
                double s = 0;
                for (int i = -kRad; i <= kRad; ++i) s += k[i + kRad] * tmp[(y + i) * w + x];
                out[y * w + x] = s;
            }
        return out;
    };

    const size_t n = static_cast<size_t>(h) * w;
    std::vector<double> va(n), vb(n), vaa(n), vbb(n), vab(n);
    for (size_t i = 0; i < n; ++i) {
        va[i] = la.values[i];
        vb[i] = lb.values[i];
        vaa[i] = va[i] * va[i];
        vbb[i] = vb[i] * vb[i];
        vab[i] = va[i] * vb[i];
    }
    const auto ma = filt(va), mb = filt(vb), maa = filt(vaa), mbb = filt(vbb), mab = filt(vab);

    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double acc = 0.0;
    std::int64_t count = 0;
    for (int y = kRad; y < h - kRad; ++y)
        for (int x = kRad; x < w - kRad; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const double mu_a = ma[i], mu_b = mb[i];
            const double var_a = maa[i] - mu_a * mu_a;
            const double var_b = mbb[i] - mu_b * mu_b;
            const double cov = mab[i] - mu_a * mu_b;
            acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
            ++count;
        }
    return acc / static_cast<double>(count);
}

}  // namespace cplab::img
