#include "reid/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <fstream>

#include "reid/common.hpp"

namespace reid {

static cv::Mat map_to_u8(const Tensor& map_hw) {
  if (map_hw.ndim() != 2) throw ShapeError("expected an h x w map, got " + shape_str(map_hw.shape()));
  int h = map_hw.dim(0), w = map_hw.dim(1);
  const Scalar* p = map_hw.data();
  Scalar mn = *std::min_element(p, p + map_hw.numel());
  Scalar mx = *std::max_element(p, p + map_hw.numel());
  Scalar range = mx - mn > 0 ? mx - mn : 1.0;
  cv::Mat m(h, w, CV_8UC1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at<uint8_t>(y, x) = static_cast<uint8_t>(255.0 * (p[y * w + x] - mn) / range + 0.5);
  return m;
}

void save_grayscale_map(const Tensor& map_hw, int out_h, int out_w, const std::string& path) {
  cv::Mat m = map_to_u8(map_hw);
  cv::Mat resized;
  cv::resize(m, resized, cv::Size(out_w, out_h), 0, 0, cv::INTER_LINEAR);
  if (!cv::imwrite(path, resized)) throw IoError("cannot write " + path);
}

void save_overlay(const std::string& image_path, const Tensor& map_hw, const std::string& path) {
  cv::Mat img = cv::imread(image_path, cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("cannot read image: " + image_path);
  cv::Mat m = map_to_u8(map_hw);
  cv::Mat resized, colored;
  cv::resize(m, resized, img.size(), 0, 0, cv::INTER_LINEAR);
  cv::applyColorMap(resized, colored, cv::COLORMAP_JET);
  cv::Mat blend;
  cv::addWeighted(img, 0.5, colored, 0.5, 0, blend);
  if (!cv::imwrite(path, blend)) throw IoError("cannot write " + path);
}

void render_line_plot(const std::string& title, const std::vector<std::string>& names,
                      const std::vector<std::vector<double>>& series, const std::string& path) {
  const int width = 800, height = 500, margin = 60;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  double lo = 0, hi = 1e-9;
  size_t len = 0;
  for (const auto& s : series) {
    len = std::max(len, s.size());
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (len < 1) throw DataError("render_line_plot: empty series");
  if (hi <= lo) hi = lo + 1;
  const cv::Scalar colors[] = {{180, 60, 30}, {30, 120, 200}, {40, 160, 60}, {150, 40, 160}};
  auto px = [&](size_t i) {
    return margin + static_cast<int>((width - 2.0 * margin) * (len > 1 ? static_cast<double>(i) / (len - 1) : 0.5));
  };
  auto py = [&](double v) {
    return height - margin - static_cast<int>((height - 2.0 * margin) * (v - lo) / (hi - lo));
  };
  cv::line(img, {margin, height - margin}, {width - margin, height - margin}, {0, 0, 0});
  cv::line(img, {margin, height - margin}, {margin, margin}, {0, 0, 0});
  cv::putText(img, title, {margin, margin / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", hi);
  cv::putText(img, buf, {4, margin}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1);
  std::snprintf(buf, sizeof(buf), "%.3g", lo);
  cv::putText(img, buf, {4, height - margin}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1);
  for (size_t s = 0; s < series.size(); ++s) {
    const auto& v = series[s];
    cv::Scalar color = colors[s % 4];
    for (size_t i = 1; i < v.size(); ++i)
      cv::line(img, {px(i - 1), py(v[i - 1])}, {px(i), py(v[i])}, color, 2);
    if (s < names.size())
      cv::putText(img, names[s], {width - margin - 120, margin + 20 * static_cast<int>(s)},
                  cv::FONT_HERSHEY_SIMPLEX, 0.5, color, 1);
  }
  if (!cv::imwrite(path, img)) throw IoError("cannot write " + path);
}

void save_profiles_text(const std::string& path, const std::vector<double>& v1,
                        const std::vector<double>& v2) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "v1*";
  for (double v : v1) out << " " << v;
  out << "\nv2*";
  for (double v : v2) out << " " << v;
  out << "\n";
}

}  // namespace reid
