#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "intent_ape/dataset.hpp"

namespace intent_ape {

class DegenerateBox : public ValidationError {
  public:
    explicit DegenerateBox(const std::string& what) : ValidationError("degenerate box: " + what) {}
};

class BoxOutOfBounds : public ValidationError {
  public:
    explicit BoxOutOfBounds(const std::string& what) : ValidationError("box out of bounds: " + what) {}
};

class UnreadableFrame : public RuntimeFailure {
  public:
    explicit UnreadableFrame(const std::filesystem::path& path)
        : RuntimeFailure("unreadable frame: " + path.string()), path_(path) {}
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

  private:
    std::filesystem::path path_;
};

struct AnnotationStyle {
    int stroke_px = 3;
    /// Text height as a fraction of the image height, clamped to a legible minimum.
    double text_scale = 0.045;
};

struct FrameSettings {
    int max_edge_px = 768;
    AnnotationStyle style;
    int png_compression = 6;
};

/// Pixel rectangle covered by an annotation element, half-open [x0,x1)x[y0,y1).
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    [[nodiscard]] bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

/// Where annotate_frame is allowed to touch pixels.
struct AnnotationFootprint {
    std::vector<PixelRect> outline;  // four stroke bands
    PixelRect text_strip;

    [[nodiscard]] bool covers(int x, int y) const noexcept;
};

[[nodiscard]] std::string timestamp_text(double timestamp_s);

/// Rectangle outline drawn inside the box's integer extent; box edges are rounded to pixels.
[[nodiscard]] AnnotationFootprint annotation_footprint(const cv::Mat& image, const BBox& box, double timestamp_s,
                                                       const AnnotationStyle& style = {});

/// Copy of `image` (8-bit BGR) with a pure-red outline on `box` and a timestamp strip at top-left.
[[nodiscard]] cv::Mat annotate_frame(const cv::Mat& image, const BBox& box, double timestamp_s,
                                     const AnnotationStyle& style = {});

struct AnnotatedFrame {
    std::vector<std::uint8_t> png;
    std::size_t index = 0;
    double timestamp_s = 0;
    int width = 0;
    int height = 0;

    [[nodiscard]] std::string data_url() const;
    friend bool operator==(const AnnotatedFrame&, const AnnotatedFrame&) = default;
};

struct VisualPayload {
    std::vector<AnnotatedFrame> frames;
    int max_edge_px = 768;

    [[nodiscard]] bool empty() const noexcept { return frames.empty(); }
    friend bool operator==(const VisualPayload&, const VisualPayload&) = default;
};

/// Aspect-preserving target size with the longer edge bounded by max_edge_px.
[[nodiscard]] cv::Size bounded_size(cv::Size original, int max_edge_px);

/// `sample.frames` are resolved against `root` when relative.
[[nodiscard]] VisualPayload build_visual_payload(const Sample& sample, const std::filesystem::path& root,
                                                 const FrameSettings& settings = {});

}  // namespace intent_ape
