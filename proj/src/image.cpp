#include "ris_sense/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ris_sense/errors.hpp"

namespace ris::img {

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Anchor {
    double pos;
    double rgb[3];
};

constexpr Anchor kAnchors[] = {
    {0.00, {68, 1, 84}}, {0.25, {59, 82, 139}}, {0.50, {33, 145, 140}}, {0.75, {94, 201, 98}}, {1.00, {253, 231, 37}},
};

// Source coordinate and blend weight for a half-pixel-centre resample.
void sample_axis(std::size_t dst, std::size_t src_len, std::size_t dst_len, std::size_t& i0, std::size_t& i1,
                 double& frac) {
    double s = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_len) / static_cast<double>(dst_len) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    i0 = static_cast<std::size_t>(std::floor(s));
    i1 = std::min(i0 + 1, src_len - 1);
    frac = s - static_cast<double>(i0);
}

}  // namespace

Image::Image(std::size_t height, std::size_t width, Rgb fill) : height_(height), width_(width) {
    if (height == 0 || width == 0) throw ShapeError("image dimensions must be positive");
    pixels_.resize(height * width * kChannels);
    for (std::size_t i = 0; i < height * width; ++i) std::memcpy(&pixels_[i * kChannels], fill.data(), kChannels);
}

Rgb Image::pixel(std::size_t y, std::size_t x) const {
    const auto* p = &pixels_[(y * width_ + x) * kChannels];
    return {p[0], p[1], p[2]};
}

void Image::set_pixel(std::size_t y, std::size_t x, Rgb v) {
    std::memcpy(&pixels_[(y * width_ + x) * kChannels], v.data(), kChannels);
}

void require_model_input(const Image& image) {
    if (image.height() != kImageSize || image.width() != kImageSize) {
        throw ShapeError("image must be 224x224x3, got " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()) + "x3");
    }
}

int max_abs_diff(const Image& a, const Image& b) {
    if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("max_abs_diff: image sizes differ");
    int worst = 0;
    for (std::size_t i = 0; i < a.bytes().size(); ++i) worst = std::max(worst, std::abs(a.bytes()[i] - b.bytes()[i]));
    return worst;
}

double mean_abs_diff(const Image& a, const Image& b) {
    if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("mean_abs_diff: image sizes differ");
    double total = 0;
    for (std::size_t i = 0; i < a.bytes().size(); ++i) total += std::abs(a.bytes()[i] - b.bytes()[i]);
    return total / static_cast<double>(a.bytes().size());
}

std::uint64_t image_hash(const Image& image) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : image.bytes()) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rgb colormap(double v) {
    if (!(v > 0.0)) v = 0.0;  // also maps NaN to the bottom anchor
    v = std::min(v, 1.0);
    std::size_t k = 0;
    while (k + 2 < std::size(kAnchors) && v > kAnchors[k + 1].pos) ++k;
    const auto& a = kAnchors[k];
    const auto& b = kAnchors[k + 1];
    const double t = (v - a.pos) / (b.pos - a.pos);
    Rgb out;
    for (int c = 0; c < 3; ++c) out[c] = to_byte(a.rgb[c] + t * (b.rgb[c] - a.rgb[c]));
    return out;
}

std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t src_h, std::size_t src_w,
                                    std::size_t dst_h, std::size_t dst_w) {
    if (src.size() != src_h * src_w || src.empty() || dst_h == 0 || dst_w == 0) {
        throw ShapeError("resize_bilinear: bad dimensions");
    }
    std::vector<double> out(dst_h * dst_w);
    for (std::size_t y = 0; y < dst_h; ++y) {
        std::size_t y0, y1;
        double fy;
        sample_axis(y, src_h, dst_h, y0, y1, fy);
        for (std::size_t x = 0; x < dst_w; ++x) {
            std::size_t x0, x1;
            double fx;
            sample_axis(x, src_w, dst_w, x0, x1, fx);
            const double top = src[y0 * src_w + x0] * (1 - fx) + src[y0 * src_w + x1] * fx;
            const double bot = src[y1 * src_w + x0] * (1 - fx) + src[y1 * src_w + x1] * fx;
            out[y * dst_w + x] = top * (1 - fy) + bot * fy;
        }
    }
    return out;
}

Image resize_bilinear(const Image& src, std::size_t dst_h, std::size_t dst_w) {
    Image out(dst_h, dst_w);
    std::vector<double> plane(src.height() * src.width());
    for (std::size_t c = 0; c < kChannels; ++c) {
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = src.bytes()[i * kChannels + c];
        const auto r = resize_bilinear(plane, src.height(), src.width(), dst_h, dst_w);
        for (std::size_t i = 0; i < r.size(); ++i) out.bytes()[i * kChannels + c] = to_byte(r[i]);
    }
    return out;
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) throw ShapeError("images_to_tensor: empty batch");
    const std::size_t h = images.front()->height(), w = images.front()->width();
    Tensor t({images.size(), kChannels, h, w});
    auto* out = t.raw();
    for (std::size_t b = 0; b < images.size(); ++b) {
        const auto& im = *images[b];
        if (im.height() != h || im.width() != w) throw ShapeError("images_to_tensor: mixed image sizes");
        for (std::size_t c = 0; c < kChannels; ++c) {
            double* plane = out + (b * kChannels + c) * h * w;
            for (std::size_t i = 0; i < h * w; ++i) plane[i] = im.bytes()[i * kChannels + c] / 255.0;
        }
    }
    return t;
}

void write_png(const std::filesystem::path& path, const Image& image) {
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    desc.width = static_cast<png_uint_32>(image.width());
    desc.height = static_cast<png_uint_32>(image.height());
    desc.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&desc, path.c_str(), 0, image.bytes().data(), 0, nullptr)) {
        const std::string msg = desc.message;
        png_image_free(&desc);
        throw FormatError(FormatError::Kind::Io, "cannot write " + path.string() + ": " + msg);
    }
}

Image read_png(const std::filesystem::path& path) {
    png_image desc;
    std::memset(&desc, 0, sizeof desc);
    desc.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&desc, path.c_str())) {
        const std::string msg = desc.message;
        png_image_free(&desc);
        throw IngestionError("cannot read image " + path.string() + ": " + msg);
    }
    desc.format = PNG_FORMAT_RGB;
    Image out(desc.height, desc.width);
    if (!png_image_finish_read(&desc, nullptr, out.bytes().data(), 0, nullptr)) {
        const std::string msg = desc.message;
        png_image_free(&desc);
        throw IngestionError("cannot decode image " + path.string() + ": " + msg);
    }
    return out;
}

}  // namespace ris::img
