#include "sgs/export.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sgs/png_io.hpp"

namespace sgs {

namespace {

uint8_t quantize(double v) {
  v = std::min(std::max(v, 0.0), 1.0);
  return static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
}

}  // namespace

void export_image(const Image& image, const std::string& path) {
  require(image.channels() == 1 || image.channels() == 3,
          "export_image: need 1 or 3 channels");
  PngImage png;
  png.width = image.width();
  png.height = image.height();
  png.channels = image.channels();
  png.pixels.resize(static_cast<size_t>(png.width) * png.height * png.channels);
  size_t i = 0;
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      for (int c = 0; c < png.channels; ++c) png.pixels[i++] = quantize(image(y, x, c));
  write_png(path, png);
}

void export_uncertainty(const Image& map, const std::string& path) {
  require(map.channels() == 1, "export_uncertainty: map must be single-channel");
  const double max_value = map.array().maxCoeff();
  Image normalized(map.height(), map.width(), 1);
  if (max_value > 0.0) normalized.array() = map.array() / max_value;
  export_image(normalized, path);

  std::ofstream sidecar(path + ".max.txt");
  if (!sidecar) throw std::runtime_error("export_uncertainty: cannot open sidecar for " + path);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g\n", max_value);
  sidecar << buf;
}

void export_curve(const SparsificationCurve& curve, const std::string& path) {
  require(curve.fractions.size() == curve.retained_error.size(), "export_curve: malformed curve");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_curve: cannot open " + path);
  out << "fraction,retained_error\n";
  char buf[96];
  for (size_t i = 0; i < curve.fractions.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", curve.fractions[i], curve.retained_error[i]);
    out << buf;
  }
}

SparsificationCurve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_curve_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "fraction,retained_error")
    throw std::runtime_error("read_curve_csv: bad header in " + path);
  SparsificationCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double f = 0, e = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf", &f, &e) != 2)
      throw std::runtime_error("read_curve_csv: bad row in " + path);
    curve.fractions.push_back(f);
    curve.retained_error.push_back(e);
  }
  return curve;
}

Image import_image(const std::string& path) {
  const PngImage png = read_png(path);
  Image image(png.height, png.width, png.channels);
  size_t i = 0;
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      for (int c = 0; c < png.channels; ++c) image(y, x, c) = png.pixels[i++] / 255.0;
  return image;
}

}  // namespace sgs
