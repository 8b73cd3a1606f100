#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ris_sense/tensor.hpp"

namespace ris::img {

inline constexpr std::size_t kImageSize = 224;
inline constexpr std::size_t kChannels = 3;

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB image, row-major, interleaved (HWC).
class Image {
public:
    Image() = default;
    Image(std::size_t height, std::size_t width, Rgb fill = {0, 0, 0});

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    bool empty() const noexcept { return pixels_.empty(); }

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels_[(y * width_ + x) * kChannels + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return pixels_[(y * width_ + x) * kChannels + c];
    }
    Rgb pixel(std::size_t y, std::size_t x) const;
    void set_pixel(std::size_t y, std::size_t x, Rgb v);

    std::vector<std::uint8_t>& bytes() noexcept { return pixels_; }
    const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Throws ShapeError unless the image is kImageSize x kImageSize x 3.
void require_model_input(const Image& image);

/// Largest per-channel absolute difference; ShapeError on size mismatch.
int max_abs_diff(const Image& a, const Image& b);
double mean_abs_diff(const Image& a, const Image& b);

/// FNV-1a over the pixel bytes.
std::uint64_t image_hash(const Image& image);

/// Five-anchor piecewise-linear colormap, v clamped to [0, 1].
Rgb colormap(double v);

/// Bilinear resample of a single-channel grid (half-pixel centres, edge clamp).
std::vector<double> resize_bilinear(const std::vector<double>& src, std::size_t src_h, std::size_t src_w,
                                    std::size_t dst_h, std::size_t dst_w);
Image resize_bilinear(const Image& src, std::size_t dst_h, std::size_t dst_w);

/// Batch of images -> [B, 3, H, W] tensor of pixel / 255.
Tensor images_to_tensor(const std::vector<const Image*>& images);

// 8-bit RGB PNG without alpha.
void write_png(const std::filesystem::path& path, const Image& image);
/// Throws IngestionError naming the path if it cannot be decoded as 8-bit RGB.
Image read_png(const std::filesystem::path& path);

}  // namespace ris::img
