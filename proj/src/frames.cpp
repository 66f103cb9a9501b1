#include "intent_ape/frames.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "intent_ape/encoding.hpp"

namespace intent_ape {

namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;
constexpr int kTextPad = 2;

struct TextLayout {
    double font_scale;
    int baseline;
    cv::Size text;
    PixelRect strip;
};

TextLayout layout_text(const cv::Mat& image, const std::string& text, const AnnotationStyle& style) {
    int baseline = 0;
    const cv::Size unit = cv::getTextSize(text, kFont, 1.0, 1, &baseline);
    const double target_h = std::max(8.0, style.text_scale * image.rows);
    const double scale = std::max(0.3, target_h / std::max(1, unit.height));
    baseline = 0;
    const cv::Size size = cv::getTextSize(text, kFont, scale, 1, &baseline);
    PixelRect strip{0, 0, std::min(image.cols, size.width + 2 * kTextPad),
                    std::min(image.rows, size.height + baseline + 2 * kTextPad)};
    return {scale, baseline, size, strip};
}

cv::Mat as_bgr(const cv::Mat& image) {
    if (image.type() == CV_8UC3) {
        return image.clone();
    }
    cv::Mat out;
    if (image.type() == CV_8UC1) {
        cv::cvtColor(image, out, cv::COLOR_GRAY2BGR);
    } else if (image.type() == CV_8UC4) {
        cv::cvtColor(image, out, cv::COLOR_BGRA2BGR);
    } else {
        throw ValidationError("annotate_frame expects an 8-bit image");
    }
    return out;
}

struct PixelBox {
    int x0, y0, x1, y1;
};

PixelBox to_pixels(const cv::Mat& image, const BBox& box) {
    if (!box.non_degenerate()) {
        throw DegenerateBox("(" + std::to_string(box.x_min) + ", " + std::to_string(box.y_min) + ", " +
                            std::to_string(box.x_max) + ", " + std::to_string(box.y_max) + ")");
    }
    if (box.x_min < 0 || box.y_min < 0 || box.x_max > image.cols || box.y_max > image.rows) {
        throw BoxOutOfBounds("box exceeds " + std::to_string(image.cols) + "x" + std::to_string(image.rows));
    }
    PixelBox px{static_cast<int>(std::lround(box.x_min)), static_cast<int>(std::lround(box.y_min)),
                static_cast<int>(std::lround(box.x_max)), static_cast<int>(std::lround(box.y_max))};
    if (px.x1 <= px.x0 || px.y1 <= px.y0) {
        throw DegenerateBox("box collapses below one pixel");
    }
    return px;
}

}  // namespace

bool AnnotationFootprint::covers(int x, int y) const noexcept {
    if (text_strip.contains(x, y)) {
        return true;
    }
    return std::any_of(outline.begin(), outline.end(), [&](const PixelRect& r) { return r.contains(x, y); });
}

std::string timestamp_text(double timestamp_s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t=+%.2fs", timestamp_s);
    return buf;
}

AnnotationFootprint annotation_footprint(const cv::Mat& image, const BBox& box, double timestamp_s,
                                         const AnnotationStyle& style) {
    const auto px = to_pixels(image, box);
    const int s = std::max(1, style.stroke_px);
    AnnotationFootprint fp;
    fp.outline = {
        PixelRect{px.x0, px.y0, px.x1, std::min(px.y0 + s, px.y1)},
        PixelRect{px.x0, std::max(px.y1 - s, px.y0), px.x1, px.y1},
        PixelRect{px.x0, px.y0, std::min(px.x0 + s, px.x1), px.y1},
        PixelRect{std::max(px.x1 - s, px.x0), px.y0, px.x1, px.y1},
    };
    fp.text_strip = layout_text(image, timestamp_text(timestamp_s), style).strip;
    return fp;
}

cv::Mat annotate_frame(const cv::Mat& image, const BBox& box, double timestamp_s, const AnnotationStyle& style) {
    if (image.empty()) {
        throw ValidationError("annotate_frame: empty image");
    }
    const auto fp = annotation_footprint(image, box, timestamp_s, style);
    cv::Mat out = as_bgr(image);

    const cv::Scalar red(0, 0, 255);
    for (const auto& band : fp.outline) {
        out(cv::Rect(band.x0, band.y0, band.x1 - band.x0, band.y1 - band.y0)).setTo(red);
    }

    const std::string text = timestamp_text(timestamp_s);
    const auto layout = layout_text(out, text, style);
    const auto& strip = layout.strip;
    if (strip.x1 > strip.x0 && strip.y1 > strip.y0) {
        // Drawing into the ROI clips glyphs to the strip.
        cv::Mat roi = out(cv::Rect(strip.x0, strip.y0, strip.x1 - strip.x0, strip.y1 - strip.y0));
        roi.setTo(cv::Scalar(0, 0, 0));
        cv::putText(roi, text, cv::Point(kTextPad, kTextPad + layout.text.height), kFont, layout.font_scale,
                    cv::Scalar(255, 255, 255), 1, cv::LINE_8);
    }
    return out;
}

std::string AnnotatedFrame::data_url() const {
    return "data:image/png;base64," + base64_encode(png);
}

cv::Size bounded_size(cv::Size original, int max_edge_px) {
    const int longer = std::max(original.width, original.height);
    if (max_edge_px <= 0 || longer <= max_edge_px) {
        return original;
    }
    const double scale = static_cast<double>(max_edge_px) / longer;
    if (original.width >= original.height) {
        return {max_edge_px, std::max(1, static_cast<int>(std::lround(original.height * scale)))};
    }
    return {std::max(1, static_cast<int>(std::lround(original.width * scale))), max_edge_px};
}

VisualPayload build_visual_payload(const Sample& sample, const std::filesystem::path& root,
                                   const FrameSettings& settings) {
    if (sample.frames.size() != sample.bboxes.size()) {
        throw InvariantViolation(sample.id, "frame and bbox counts differ");
    }
    VisualPayload payload;
    payload.max_edge_px = settings.max_edge_px;
    const double fps = sample.speed.fps > 0 ? sample.speed.fps : 30.0;
    const std::vector<int> png_params{cv::IMWRITE_PNG_COMPRESSION, settings.png_compression,
                                      cv::IMWRITE_PNG_STRATEGY, cv::IMWRITE_PNG_STRATEGY_DEFAULT};

    for (std::size_t i = 0; i < sample.frames.size(); ++i) {
        const auto path = sample.frames[i].is_absolute() ? sample.frames[i] : root / sample.frames[i];
        cv::Mat image = cv::imread(path.string(), cv::IMREAD_COLOR);
        if (image.empty()) {
            throw UnreadableFrame(path);
        }
        BBox box = sample.bboxes[i];
        const cv::Size target = bounded_size(image.size(), settings.max_edge_px);
        if (target != image.size()) {
            const double sx = static_cast<double>(target.width) / image.cols;
            const double sy = static_cast<double>(target.height) / image.rows;
            cv::Mat resized;
            cv::resize(image, resized, target, 0, 0, cv::INTER_AREA);
            image = std::move(resized);
            box = BBox{box.x_min * sx, box.y_min * sy, std::min<double>(box.x_max * sx, target.width),
                       std::min<double>(box.y_max * sy, target.height)};
        }
        const double t = static_cast<double>(i) / fps;
        const cv::Mat annotated = annotate_frame(image, box, t, settings.style);

        AnnotatedFrame frame;
        frame.index = i;
        frame.timestamp_s = t;
        frame.width = annotated.cols;
        frame.height = annotated.rows;
        if (!cv::imencode(".png", annotated, frame.png, png_params)) {
            throw RuntimeFailure("PNG encoding failed for " + path.string());
        }
        payload.frames.push_back(std::move(frame));
    }
    return payload;
}

}  // namespace intent_ape
