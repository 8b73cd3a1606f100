#include "ris_sense/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ris_sense/errors.hpp"

namespace ris::img {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

double wrap_degrees(double deg) {
    double d = std::fmod(deg, 360.0);
    if (d > 180.0) d -= 360.0;
    if (d <= -180.0) d += 360.0;
    return d;
}

double sample_bilinear(const Image& im, double sy, double sx, std::size_t c) {
    const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
    const std::size_t y1 = std::min(y0 + 1, im.height() - 1);
    const std::size_t x1 = std::min(x0 + 1, im.width() - 1);
    const double fy = sy - static_cast<double>(y0);
    const double fx = sx - static_cast<double>(x0);
    const double top = im.at(y0, x0, c) * (1 - fx) + im.at(y0, x1, c) * fx;
    const double bot = im.at(y1, x0, c) * (1 - fx) + im.at(y1, x1, c) * fx;
    return top * (1 - fy) + bot * fy;
}

template <class Fn>
Image map_hsv(const Image& image, Fn&& fn) {
    Image out = image;
    auto& px = out.bytes();
    for (std::size_t i = 0; i < px.size(); i += kChannels) {
        double h, s, v, r, g, b;
        rgb_to_hsv(px[i] / 255.0, px[i + 1] / 255.0, px[i + 2] / 255.0, h, s, v);
        fn(h, s, v);
        hsv_to_rgb(h, s, v, r, g, b);
        px[i] = to_byte(r * 255.0);
        px[i + 1] = to_byte(g * 255.0);
        px[i + 2] = to_byte(b * 255.0);
    }
    return out;
}

}  // namespace

std::vector<double> stft_magnitude(const std::vector<sim::Complex>& cir, const StftConfig& cfg, std::size_t& rows,
                                   std::size_t& cols) {
    const std::size_t n = cir.size();
    const std::size_t len = cfg.window_len;
    if (len < 2 || cfg.hop == 0) throw ParameterError("stft: window_len must be >= 2 and hop >= 1");
    if (n < len) {
        throw RangeError("stft: CIR length " + std::to_string(n) + " is shorter than the window (" +
                         std::to_string(len) + ")");
    }
    rows = len;
    cols = (n + cfg.hop - 1) / cfg.hop;

    std::vector<double> window(len);
    for (std::size_t j = 0; j < len; ++j) window[j] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(j) / double(len));
    std::vector<sim::Complex> twiddle(len);
    for (std::size_t m = 0; m < len; ++m) twiddle[m] = std::polar(1.0, -2.0 * kPi * double(m) / double(len));

    std::vector<double> out(rows * cols);
    std::vector<sim::Complex> frame(len);
    for (std::size_t f = 0; f < cols; ++f) {
        const std::size_t t = f * cfg.hop;
        for (std::size_t j = 0; j < len; ++j) frame[j] = window[j] * cir[(t + n + j - len / 2) % n];
        for (std::size_t k = 0; k < len; ++k) {
            sim::Complex acc{};
            for (std::size_t j = 0; j < len; ++j) acc += frame[j] * twiddle[(j * k) % len];
            const std::size_t r = (k + len - len / 2) % len;  // fft-shift: bin k lands in row r
            out[r * cols + f] = std::abs(acc);
        }
    }
    return out;
}

Image cir_to_spectrogram(const std::vector<sim::Complex>& cir, const StftConfig& cfg) {
    std::size_t rows = 0, cols = 0;
    auto grid = stft_magnitude(cir, cfg, rows, cols);
    const double peak = *std::max_element(grid.begin(), grid.end());
    if (peak > 0.0) {
        const double top = 20.0 * std::log10(peak);
        const double floor = top - cfg.dynamic_range_db;
        for (auto& v : grid) {
            const double db = v > 0.0 ? 20.0 * std::log10(v) : floor;
            v = (std::clamp(db, floor, top) - floor) / cfg.dynamic_range_db;
        }
    } else {
        std::fill(grid.begin(), grid.end(), 0.0);
    }
    const auto scaled = resize_bilinear(grid, rows, cols, kImageSize, kImageSize);
    Image out(kImageSize, kImageSize);
    for (std::size_t y = 0; y < kImageSize; ++y) {
        for (std::size_t x = 0; x < kImageSize; ++x) out.set_pixel(y, x, colormap(scaled[y * kImageSize + x]));
    }
    return out;
}

// ---------------------------------------------------------------------------

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double hi = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    v = hi;
    const double d = hi - lo;
    s = hi > 0.0 ? d / hi : 0.0;
    if (d <= 0.0) {
        h = 0.0;
        return;
    }
    if (hi == r) {
        h = 60.0 * (g - b) / d;
    } else if (hi == g) {
        h = 60.0 * (2.0 + (b - r) / d);
    } else {
        h = 60.0 * (4.0 + (r - g) / d);
    }
    if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    const double sector = h / 60.0;
    const int i = std::min(static_cast<int>(sector), 5);
    const double f = sector - i;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
}

Image hflip(const Image& image) {
    Image out = image;
    const std::size_t w = image.width();
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < w; ++x) out.set_pixel(y, x, image.pixel(y, w - 1 - x));
    }
    return out;
}

Image vflip(const Image& image) {
    Image out = image;
    const std::size_t h = image.height();
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) out.set_pixel(y, x, image.pixel(h - 1 - y, x));
    }
    return out;
}

Image rotate(const Image& image, double deg, Rgb fill) {
    Image out(image.height(), image.width(), fill);
    const double rad = deg * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double cy = (image.height() - 1) / 2.0, cx = (image.width() - 1) / 2.0;
    const double max_y = static_cast<double>(image.height() - 1), max_x = static_cast<double>(image.width() - 1);
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            // Inverse map: rotate the destination point back by -deg.
            const double dy = y - cy, dx = x - cx;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            if (sx < 0.0 || sy < 0.0 || sx > max_x || sy > max_y) continue;
            for (std::size_t ch = 0; ch < kChannels; ++ch) out.at(y, x, ch) = to_byte(sample_bilinear(image, sy, sx, ch));
        }
    }
    return out;
}

Image crop_resize(const Image& image, double scale, double offset_y, double offset_x) {
    Image out(image.height(), image.width());
    const double side_y = scale * image.height(), side_x = scale * image.width();
    const double max_y = static_cast<double>(image.height() - 1), max_x = static_cast<double>(image.width() - 1);
    for (std::size_t y = 0; y < image.height(); ++y) {
        const double sy = std::clamp(offset_y + (y + 0.5) * side_y / image.height() - 0.5, 0.0, max_y);
        for (std::size_t x = 0; x < image.width(); ++x) {
            const double sx = std::clamp(offset_x + (x + 0.5) * side_x / image.width() - 0.5, 0.0, max_x);
            for (std::size_t ch = 0; ch < kChannels; ++ch) out.at(y, x, ch) = to_byte(sample_bilinear(image, sy, sx, ch));
        }
    }
    return out;
}

Image adjust_hsv(const Image& image, double hue_deg, double saturation, double value_scale) {
    return map_hsv(image, [&](double& h, double& s, double& v) {
        h += hue_deg;
        s = std::clamp(s * saturation, 0.0, 1.0);
        v = std::clamp(v * value_scale, 0.0, 1.0);
    });
}

Image adjust_contrast(const Image& image, double c) {
    double mean = 0.0;
    const auto& px = image.bytes();
    for (std::size_t i = 0; i < px.size(); i += kChannels) mean += std::max({px[i], px[i + 1], px[i + 2]}) / 255.0;
    mean /= static_cast<double>(px.size() / kChannels);
    return map_hsv(image, [&](double&, double&, double& v) { v = std::clamp(mean + c * (v - mean), 0.0, 1.0); });
}

// ---------------------------------------------------------------------------

std::string augment_name(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::HFlip: return "hflip";
        case AugmentKind::VFlip: return "vflip";
        case AugmentKind::Rotate: return "rotate";
        case AugmentKind::ResizeCrop: return "resize_crop";
        case AugmentKind::Saturation: return "saturation";
        case AugmentKind::Brightness: return "brightness";
        case AugmentKind::Contrast: return "contrast";
        case AugmentKind::Hue: return "hue";
    }
    return "unknown";
}

void validate_op(const AugmentOp& op) {
    auto check = [&](double v, double lo, double hi) {
        if (!(v >= lo - 1e-12 && v <= hi + 1e-12)) {
            throw ParameterError(augment_name(op.kind) + " parameter " + std::to_string(op.value) + " outside [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }
    };
    switch (op.kind) {
        case AugmentKind::HFlip:
        case AugmentKind::VFlip: break;
        case AugmentKind::Rotate: check(op.value, -15.0, 15.0); break;
        case AugmentKind::ResizeCrop: check(op.value, 0.8, 1.0); break;
        case AugmentKind::Saturation:
        case AugmentKind::Brightness:
        case AugmentKind::Contrast: check(op.value, 0.7, 1.3); break;
        case AugmentKind::Hue: check(wrap_degrees(op.value), -18.0, 18.0); break;
    }
}

Image augment(const Image& image, const std::vector<AugmentOp>& ops, Rng& rng) {
    require_model_input(image);
    for (const auto& op : ops) validate_op(op);
    Image out = image;
    for (const auto& op : ops) {
        switch (op.kind) {
            case AugmentKind::HFlip: out = hflip(out); break;
            case AugmentKind::VFlip: out = vflip(out); break;
            case AugmentKind::Rotate: out = rotate(out, op.value, colormap(0.0)); break;
            case AugmentKind::ResizeCrop: {
                const double slack = (1.0 - op.value) * kImageSize;
                const double oy = slack * rng.uniform();
                const double ox = slack * rng.uniform();
                out = crop_resize(out, op.value, oy, ox);
                break;
            }
            case AugmentKind::Saturation: out = adjust_hsv(out, 0.0, op.value, 1.0); break;
            case AugmentKind::Brightness: out = adjust_hsv(out, 0.0, 1.0, op.value); break;
            case AugmentKind::Contrast: out = adjust_contrast(out, op.value); break;
            case AugmentKind::Hue: out = adjust_hsv(out, op.value, 1.0, 1.0); break;
        }
    }
    return out;
}

std::vector<AugmentOp> random_ops(Rng& rng) {
    std::vector<AugmentOp> ops;
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::hflip());
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::vflip());
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::rotate(rng.uniform(-15.0, 15.0)));
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::resize_crop(rng.uniform(0.8, 1.0)));
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::saturation(rng.uniform(0.7, 1.3)));
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::brightness(rng.uniform(0.7, 1.3)));
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::contrast(rng.uniform(0.7, 1.3)));
    if (rng.bernoulli(0.5)) ops.push_back(AugmentOp::hue(rng.uniform(-18.0, 18.0)));
    return ops;
}

// ---------------------------------------------------------------------------

double noise_sigma(NoiseLevel level) { return level == NoiseLevel::Slight ? 5.0 : 25.0; }

Image add_noise(const Image& image, NoiseLevel level, Rng& rng) { return add_noise(image, noise_sigma(level), rng); }

Image add_noise(const Image& image, double sigma, Rng& rng) {
    if (!(sigma >= 0.0)) throw ParameterError("add_noise: sigma must be non-negative");
    Image out = image;
    if (sigma == 0.0) return out;
    for (auto& b : out.bytes()) b = to_byte(b + sigma * rng.normal());
    return out;
}

}  // namespace ris::img
