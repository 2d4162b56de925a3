#include "biolite/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "biolite/errors.hpp"

namespace biolite {

ImageU8 read_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw DataError("cannot read image: " + path.string());
    }
    ImageU8 out(bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out.at(y, x, 0) = row[x][2];
            out.at(y, x, 1) = row[x][1];
            out.at(y, x, 2) = row[x][0];
        }
    }
    return out;
}

void write_image_png(const std::filesystem::path& path, const ImageU8& image) {
    if (image.empty()) throw DataError("write_image_png: empty image");
    cv::Mat bgr(image.h, image.w, CV_8UC3);
    for (int y = 0; y < image.h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.w; ++x) {
            row[x] = cv::Vec3b(image.at(y, x, 2), image.at(y, x, 1), image.at(y, x, 0));
        }
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw DataError("cannot write image: " + path.string());
    }
}

Mask read_mask(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw DataError("cannot read mask: " + path.string());
    }
    if (m.channels() != 1 || m.depth() != CV_8U) {
        throw DataError("mask must be single-channel 8-bit: " + path.string());
    }
    Mask out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const uint8_t* row = m.ptr<uint8_t>(y);
        std::copy(row, row + m.cols, out.v.begin() + static_cast<std::size_t>(y) * m.cols);
    }
    return out;
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    if (mask.empty()) throw DataError("write_mask_png: empty mask");
    cv::Mat m(mask.h, mask.w, CV_8UC1);
    for (int y = 0; y < mask.h; ++y) {
        std::copy(mask.v.begin() + static_cast<std::size_t>(y) * mask.w,
                  mask.v.begin() + static_cast<std::size_t>(y + 1) * mask.w,
                  m.ptr<uint8_t>(y));
    }
    if (!cv::imwrite(path.string(), m)) {
        throw DataError("cannot write mask: " + path.string());
    }
}

void write_overlay_png(const std::filesystem::path& path, const ImageU8& image,
                       const Mask& mask) {
    if (image.h != mask.h || image.w != mask.w) {
        throw DataError("write_overlay_png: image/mask size mismatch");
    }
    cv::Mat bgr(image.h, image.w, CV_8UC3);
    for (int y = 0; y < image.h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.w; ++x) {
            cv::Vec3b px(image.at(y, x, 2), image.at(y, x, 1), image.at(y, x, 0));
            const uint8_t cls = mask.at(y, x);
            if (cls == 1) { // bioink: green
                px = cv::Vec3b(px[0] / 2, static_cast<uint8_t>(std::min(255, px[1] / 2 + 128)),
                               px[2] / 2);
            } else if (cls == 2) { // nozzle: red
                px = cv::Vec3b(px[0] / 2, px[1] / 2,
                               static_cast<uint8_t>(std::min(255, px[2] / 2 + 128)));
            }
            row[x] = px;
        }
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw DataError("cannot write overlay: " + path.string());
    }
}

} // namespace biolite
