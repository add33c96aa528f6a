#include "graindeck/imageio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "graindeck/error.hpp"
#include "graindeck/fileutil.hpp"

namespace graindeck {

namespace fs = std::filesystem;

namespace {

cv::Mat decode(const fs::path& path, int flags) {
  cv::Mat m;
  try {
    m = cv::imread(path.string(), flags);
  } catch (const cv::Exception&) {
    m.release();
  }
  if (m.empty()) throw DataError("cannot decode image '" + path.string() + "'");
  if (m.depth() != CV_8U) throw DataError("image '" + path.string() + "' is not 8-bit");
  return m;
}

void encode_atomic(const fs::path& path, const cv::Mat& m) {
  std::vector<uchar> buf;
  if (!cv::imencode(".png", m, buf)) throw DataError("cannot encode '" + path.string() + "'");
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(buf.data()), buf.size()));
}

}  // namespace

Image read_image(const fs::path& path) {
  const cv::Mat m = decode(path, cv::IMREAD_COLOR);
  Image out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) out.set_pixel(r, c, {row[c][2], row[c][1], row[c][0]});
  }
  return out;
}

Mask read_gray(const fs::path& path) {
  const cv::Mat m = decode(path, cv::IMREAD_GRAYSCALE);
  Mask out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<uchar>(r);
    for (int c = 0; c < m.cols; ++c) out.at(r, c) = row[c];
  }
  return out;
}

void write_png(const fs::path& path, const Image& image) {
  cv::Mat m(image.height(), image.width(), CV_8UC3);
  for (int r = 0; r < m.rows; ++r) {
    auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) {
      const Rgb p = image.pixel(r, c);
      row[c] = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  encode_atomic(path, m);
}

void write_png(const fs::path& path, const Mask& mask, bool binary) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < m.rows; ++r) {
    auto* row = m.ptr<uchar>(r);
    for (int c = 0; c < m.cols; ++c) {
      const std::uint8_t v = mask.at(r, c);
      row[c] = binary ? (v ? 255 : 0) : v;
    }
  }
  encode_atomic(path, m);
}

}  // namespace graindeck
