#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <sstream>
#include <string>

#include "cycletrans/error.hpp"

namespace cycletrans {

using real_t = double;

/// 2D grayscale image, row-major: (rows, cols) = (height, width).
template <typename Scalar>
using Image = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using ImageD = Image<real_t>;

/// Dense (batch, channel, height, width) tensor backed by one flat Eigen array.
/// Layout is row-major within a channel plane, channels then batch outermost,
/// so channel planes map directly onto Image<Scalar>.
template <typename Scalar>
class Tensor4 {
 public:
  Tensor4() = default;

  Tensor4(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w)
      : n_(n), c_(c), h_(h), w_(w), data_(ArrayX<Scalar>::Zero(n * c * h * w)) {}

  static Tensor4 from_image(const Image<Scalar>& img) {
    Tensor4 t(1, 1, img.rows(), img.cols());
    Eigen::Map<Image<Scalar>>(t.data(), img.rows(), img.cols()) = img;
    return t;
  }

  Eigen::Index batch() const { return n_; }
  Eigen::Index channels() const { return c_; }
  Eigen::Index height() const { return h_; }
  Eigen::Index width() const { return w_; }
  Eigen::Index size() const { return data_.size(); }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(" << n_ << "," << c_ << "," << h_ << "," << w_ << ")";
    return os.str();
  }

  Scalar& operator()(Eigen::Index n, Eigen::Index c, Eigen::Index y, Eigen::Index x) {
    return data_[((n * c_ + c) * h_ + y) * w_ + x];
  }
  Scalar operator()(Eigen::Index n, Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
    return data_[((n * c_ + c) * h_ + y) * w_ + x];
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  ArrayX<Scalar>& array() { return data_; }
  const ArrayX<Scalar>& array() const { return data_; }

  Scalar* plane(Eigen::Index n, Eigen::Index c) { return data_.data() + (n * c_ + c) * h_ * w_; }
  const Scalar* plane(Eigen::Index n, Eigen::Index c) const {
    return data_.data() + (n * c_ + c) * h_ * w_;
  }

  Eigen::Map<Image<Scalar>> channel(Eigen::Index n, Eigen::Index c) {
    return Eigen::Map<Image<Scalar>>(plane(n, c), h_, w_);
  }
  Eigen::Map<const Image<Scalar>> channel(Eigen::Index n, Eigen::Index c) const {
    return Eigen::Map<const Image<Scalar>>(plane(n, c), h_, w_);
  }

  /// Single-sample view copied out as a batch-1 tensor.
  Tensor4 sample(Eigen::Index n) const {
    Tensor4 out(1, c_, h_, w_);
    out.data_ = data_.segment(n * c_ * h_ * w_, c_ * h_ * w_);
    return out;
  }

  void set_sample(Eigen::Index n, const Tensor4& s) {
    data_.segment(n * c_ * h_ * w_, c_ * h_ * w_) = s.data_;
  }

  Tensor4 zeros_like() const { return Tensor4(n_, c_, h_, w_); }

 private:
  Eigen::Index n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  ArrayX<Scalar> data_;
};

using Tensor4d = Tensor4<real_t>;

/// Concatenates batch-1 tensors along the batch axis.
template <typename Scalar>
Tensor4<Scalar> stack_batch(const std::vector<Tensor4<Scalar>>& samples) {
  if (samples.empty()) throw InputError("stack_batch: empty sample list");
  Tensor4<Scalar> out(static_cast<Eigen::Index>(samples.size()), samples[0].channels(),
                      samples[0].height(), samples[0].width());
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].same_shape(samples[0]) || samples[i].batch() != 1)
      throw InputError("stack_batch: shape mismatch");
    out.set_sample(static_cast<Eigen::Index>(i), samples[i]);
  }
  return out;
}

template <typename Scalar>
void require_same_shape(const Tensor4<Scalar>& a, const Tensor4<Scalar>& b, const char* who) {
  if (!a.same_shape(b))
    throw InputError(std::string(who) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

}  // namespace cycletrans
