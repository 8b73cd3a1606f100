#pragma once

#include <string>
#include <vector>

#include "ris_sense/channel.hpp"
#include "ris_sense/image.hpp"
#include "ris_sense/rng.hpp"

namespace ris::img {

struct StftConfig {
    std::size_t window_len = 64;
    std::size_t hop = 8;
    double dynamic_range_db = 60.0;
};

/// Magnitude STFT of a CIR with a periodic Hann window. Frames are centred on
/// t = 0, hop, 2*hop, ... < N with circular wrap; each frame's spectrum is
/// fft-shifted. Row r holds frequency bin r, column c holds frame c.
std::vector<double> stft_magnitude(const std::vector<sim::Complex>& cir, const StftConfig& cfg, std::size_t& rows,
                                   std::size_t& cols);

/// STFT -> dB, clamped to [peak - range, peak] -> [0,1] -> 224x224 -> colormap.
/// Throws RangeError when the CIR is shorter than the window.
Image cir_to_spectrogram(const std::vector<sim::Complex>& cir, const StftConfig& cfg = {});

// ---------------------------------------------------------------------------
// Augmentation. Ranges: rotate [-15, 15] deg, resize_crop [0.8, 1.0],
// saturation/brightness/contrast [0.7, 1.3], hue [-18, 18] deg (taken modulo
// 360, so a full turn is accepted).

enum class AugmentKind { HFlip, VFlip, Rotate, ResizeCrop, Saturation, Brightness, Contrast, Hue };

struct AugmentOp {
    AugmentKind kind;
    double value = 0.0;

    static AugmentOp hflip() { return {AugmentKind::HFlip, 0.0}; }
    static AugmentOp vflip() { return {AugmentKind::VFlip, 0.0}; }
    static AugmentOp rotate(double deg) { return {AugmentKind::Rotate, deg}; }
    static AugmentOp resize_crop(double scale) { return {AugmentKind::ResizeCrop, scale}; }
    static AugmentOp saturation(double s) { return {AugmentKind::Saturation, s}; }
    static AugmentOp brightness(double b) { return {AugmentKind::Brightness, b}; }
    static AugmentOp contrast(double c) { return {AugmentKind::Contrast, c}; }
    static AugmentOp hue(double deg) { return {AugmentKind::Hue, deg}; }
};

std::string augment_name(AugmentKind kind);
/// Throws ParameterError if op.value is outside its documented range.
void validate_op(const AugmentOp& op);

/// Applies ops in order. rng supplies the crop position for resize_crop.
Image augment(const Image& image, const std::vector<AugmentOp>& ops, Rng& rng);

/// Random pipeline: each op is included with probability 1/2, parameters
/// drawn uniformly from their ranges.
std::vector<AugmentOp> random_ops(Rng& rng);

// Primitives (no range checks).
Image hflip(const Image& image);
Image vflip(const Image& image);
Image rotate(const Image& image, double deg, Rgb fill);
Image crop_resize(const Image& image, double scale, double offset_y, double offset_x);
Image adjust_hsv(const Image& image, double hue_deg, double saturation, double value_scale);
/// V' = mean(V) + c * (V - mean(V)) in HSV space.
Image adjust_contrast(const Image& image, double c);

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

// ---------------------------------------------------------------------------

enum class NoiseLevel { Slight, Heavy };

/// Pixel-unit standard deviation: 5 (slight) or 25 (heavy).
double noise_sigma(NoiseLevel level);
Image add_noise(const Image& image, NoiseLevel level, Rng& rng);
Image add_noise(const Image& image, double sigma, Rng& rng);

}  // namespace ris::img
