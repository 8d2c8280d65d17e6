#pragma once

#include <string>
#include <vector>

#include "cplab/common.hpp"

namespace cplab::img {

/// Grayscale (or RGB) raster with values in [0,1], row-major H x W x C.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<float> values;

    Image() = default;
    Image(int h, int w, int c = 1, float fill = 0.0f)
        : height(h), width(w), channels(c),
          values(static_cast<size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c = 0) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c = 0) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return values.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Equal-weight channel mean; identity for single-channel images.
Image luminance(const Image& x);

/// Nearest-neighbor resample to h x w.
Image resize_nearest(const Image& x, int h, int w);

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

Corner corner_from_string(const std::string& s);
std::string corner_to_string(Corner c);

/// The trigger: a glyph blended into one corner at strength alpha, sized so
/// its area is `area_fraction` of the target image area.
struct TriggerPatch {
    Image glyph;
    double area_fraction = 0.10;
    Corner placement = Corner::BottomRight;
    double strength = 1.0;
};

struct PatchRegion {
    int y0 = 0, x0 = 0, side = 0;
    bool contains(int y, int x) const {
        return y >= y0 && y < y0 + side && x >= x0 && x < x0 + side;
    }
};

/// Placement region of `patch` on an h x w image (side = round(sqrt(f)*min)).
PatchRegion patch_region(const TriggerPatch& patch, int h, int w);

/// out = (1-alpha)*x + alpha*glyph inside the region, x exactly outside.
Image composite_trigger(const Image& x, const TriggerPatch& patch);

struct EdgeParams {
    double blur_sigma = 1.0;
    double threshold_fraction = 0.05;
};

/// 5x5 Gaussian blur -> Sobel magnitude -> binarize at
/// threshold_fraction * max magnitude. Replicate border handling; a constant
/// image yields an all-zero map. Output values are exactly 0 or 1.
Image edge_map(const Image& x, const EdgeParams& params = {});

// ---- quality metrics (double precision) ----
double mse(const Image& a, const Image& b);
/// 10*log10(1/mse) with MAX=1; +infinity when mse == 0.
double psnr(const Image& a, const Image& b);
/// Windowed SSIM: 11x11 Gaussian window, sigma 1.5, C1=0.01^2, C2=0.03^2,
/// population statistics, mean over fully-valid windows.
double ssim(const Image& a, const Image& b);

// ---- PNG I/O (8-bit grayscale or RGB) ----
Image load_png(const std::string& path);
void save_png(const Image& x, const std::string& path);

// ---- built-in fixtures ----
/// 16x16 high-contrast "DK" monogram used as the default trigger glyph.
Image default_trigger_glyph();
/// 32x32 hazard checkerboard with an inverted X; the attack target image.
Image default_attack_target();

}  // namespace cplab::img
