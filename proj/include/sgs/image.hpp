#pragma once

#include "sgs/types.hpp"

namespace sgs {

// Dense H x W x C image of doubles, row-major with the channel fastest.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels)
      : height_(height), width_(width), channels_(channels) {
    require(height > 0 && width > 0 && channels > 0, "Image: non-positive shape");
    data_ = ArrayXd::Zero(static_cast<Eigen::Index>(height) * width * channels);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  double& operator()(int y, int x, int c = 0) {
    return data_[(static_cast<Eigen::Index>(y) * width_ + x) * channels_ + c];
  }
  double operator()(int y, int x, int c = 0) const {
    return data_[(static_cast<Eigen::Index>(y) * width_ + x) * channels_ + c];
  }

  ArrayXd& array() { return data_; }
  const ArrayXd& array() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  ArrayXd data_;
};

}  // namespace sgs
