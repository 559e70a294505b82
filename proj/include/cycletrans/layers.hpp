#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cycletrans/tensor.hpp"

namespace cycletrans {

/// Per-layer activation storage for one forward pass. Traces live outside the
/// layers so the same network can run several forward passes per iteration
/// (cycle reconstruction reuses each generator) and each pass stays
/// independently differentiable.
template <typename Scalar>
struct Trace {
  std::vector<Tensor4<Scalar>> saved;
  std::vector<Trace<Scalar>> children;
};

template <typename Scalar>
struct ParamRef {
  std::string name;
  ArrayX<Scalar>* value;
  ArrayX<Scalar>* grad;
};

template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Runs the layer. `trace == nullptr` means pure inference (nothing saved).
  virtual Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const = 0;

  /// Propagates a gradient back through the pass recorded in `trace`,
  /// returning d(loss)/d(input). Parameter gradients accumulate into the
  /// layer's grad buffers unless `accumulate_param_grads` is false.
  virtual Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                                   bool accumulate_param_grads) = 0;

  virtual void collect_params(std::vector<ParamRef<Scalar>>& out) { (void)out; }
};

enum class PadMode { Zero, Reflect };

namespace detail {

template <typename Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatCM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline Eigen::Index reflect_index(Eigen::Index t, Eigen::Index n) {
  if (t < 0) return -t;
  if (t >= n) return 2 * n - 2 - t;
  return t;
}

/// Materializes one padded sample (c, h+2p, w+2p).
template <typename Scalar>
Tensor4<Scalar> pad_sample(const Tensor4<Scalar>& in, Eigen::Index n, Eigen::Index pad,
                           PadMode mode) {
  const Eigen::Index c = in.channels(), h = in.height(), w = in.width();
  Tensor4<Scalar> out(1, c, h + 2 * pad, w + 2 * pad);
  for (Eigen::Index ci = 0; ci < c; ++ci) {
    auto src = in.channel(n, ci);
    auto dst = out.channel(0, ci);
    if (mode == PadMode::Zero) {
      dst.block(pad, pad, h, w) = src;
    } else {
      for (Eigen::Index y = 0; y < h + 2 * pad; ++y) {
        const Eigen::Index sy = reflect_index(y - pad, h);
        for (Eigen::Index x = 0; x < w + 2 * pad; ++x)
          dst(y, x) = src(sy, reflect_index(x - pad, w));
      }
    }
  }
  return out;
}

/// Folds a padded-space gradient back onto the unpadded input gradient.
template <typename Scalar>
void unpad_sample_grad(const Tensor4<Scalar>& gpad, Tensor4<Scalar>& gin, Eigen::Index n,
                       Eigen::Index pad, PadMode mode) {
  const Eigen::Index c = gin.channels(), h = gin.height(), w = gin.width();
  for (Eigen::Index ci = 0; ci < c; ++ci) {
    auto src = gpad.channel(0, ci);
    auto dst = gin.channel(n, ci);
    if (mode == PadMode::Zero) {
      dst += src.block(pad, pad, h, w);
    } else {
      for (Eigen::Index y = 0; y < h + 2 * pad; ++y) {
        const Eigen::Index sy = reflect_index(y - pad, h);
        for (Eigen::Index x = 0; x < w + 2 * pad; ++x)
          dst(sy, reflect_index(x - pad, w)) += src(y, x);
      }
    }
  }
}

template <typename Scalar>
void im2col(const Tensor4<Scalar>& padded, Eigen::Index k, Eigen::Index stride,
            Eigen::Index oh, Eigen::Index ow, MatCM<Scalar>& col) {
  const Eigen::Index c = padded.channels();
  col.resize(c * k * k, oh * ow);
  for (Eigen::Index ci = 0; ci < c; ++ci) {
    auto plane = padded.channel(0, ci);
    for (Eigen::Index ky = 0; ky < k; ++ky)
      for (Eigen::Index kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (ci * k + ky) * k + kx;
        for (Eigen::Index oy = 0; oy < oh; ++oy)
          for (Eigen::Index ox = 0; ox < ow; ++ox)
            col(row, oy * ow + ox) = plane(oy * stride + ky, ox * stride + kx);
      }
  }
}

template <typename Scalar>
void col2im(const MatCM<Scalar>& col, Eigen::Index k, Eigen::Index stride, Eigen::Index oh,
            Eigen::Index ow, Tensor4<Scalar>& padded) {
  const Eigen::Index c = padded.channels();
  padded.array().setZero();
  for (Eigen::Index ci = 0; ci < c; ++ci) {
    auto plane = padded.channel(0, ci);
    for (Eigen::Index ky = 0; ky < k; ++ky)
      for (Eigen::Index kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (ci * k + ky) * k + kx;
        for (Eigen::Index oy = 0; oy < oh; ++oy)
          for (Eigen::Index ox = 0; ox < ow; ++ox)
            plane(oy * stride + ky, ox * stride + kx) += col(row, oy * ow + ox);
      }
  }
}

}  // namespace detail

template <typename Scalar>
class Conv2d : public Layer<Scalar> {
 public:
  /// `use_bias = false` for convolutions feeding a normalization layer: the
  /// norm's mean subtraction cancels any bias, leaving it a dead parameter.
  Conv2d(std::string label, Eigen::Index in_c, Eigen::Index out_c, Eigen::Index k,
         Eigen::Index stride, Eigen::Index pad, PadMode pad_mode, bool use_bias = true)
      : label_(std::move(label)),
        in_c_(in_c),
        out_c_(out_c),
        k_(k),
        stride_(stride),
        pad_(pad),
        pad_mode_(pad_mode),
        use_bias_(use_bias),
        weight_(ArrayX<Scalar>::Zero(out_c * in_c * k * k)),
        bias_(ArrayX<Scalar>::Zero(use_bias ? out_c : 0)),
        gweight_(ArrayX<Scalar>::Zero(out_c * in_c * k * k)),
        gbias_(ArrayX<Scalar>::Zero(use_bias ? out_c : 0)) {}

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    check_input(in);
    const Eigen::Index oh = out_extent(in.height());
    const Eigen::Index ow = out_extent(in.width());
    Tensor4<Scalar> out(in.batch(), out_c_, oh, ow);
    Eigen::Map<const detail::MatRM<Scalar>> wmat(weight_.data(), out_c_, in_c_ * k_ * k_);
    if (trace) trace->saved.assign(1, in);
    detail::MatCM<Scalar> col;
    for (Eigen::Index n = 0; n < in.batch(); ++n) {
      Tensor4<Scalar> padded = detail::pad_sample(in, n, pad_, pad_mode_);
      detail::im2col(padded, k_, stride_, oh, ow, col);
      Eigen::Map<detail::MatRM<Scalar>> omat(out.plane(n, 0), out_c_, oh * ow);
      omat.noalias() = wmat * col;
      if (use_bias_) omat.colwise() += bias_.matrix();
    }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool accumulate_param_grads) override {
    const Tensor4<Scalar>& in = trace.saved[0];
    const Eigen::Index oh = grad_out.height(), ow = grad_out.width();
    Tensor4<Scalar> gin = in.zeros_like();
    Eigen::Map<const detail::MatRM<Scalar>> wmat(weight_.data(), out_c_, in_c_ * k_ * k_);
    Eigen::Map<detail::MatRM<Scalar>> gwmat(gweight_.data(), out_c_, in_c_ * k_ * k_);
    detail::MatCM<Scalar> col, gcol;
    Tensor4<Scalar> gpad(1, in_c_, in.height() + 2 * pad_, in.width() + 2 * pad_);
    for (Eigen::Index n = 0; n < in.batch(); ++n) {
      Eigen::Map<const detail::MatRM<Scalar>> gomat(grad_out.plane(n, 0), out_c_, oh * ow);
      if (accumulate_param_grads) {
        Tensor4<Scalar> padded = detail::pad_sample(in, n, pad_, pad_mode_);
        detail::im2col(padded, k_, stride_, oh, ow, col);
        gwmat.noalias() += gomat * col.transpose();
        if (use_bias_) gbias_.matrix().noalias() += gomat.rowwise().sum();
      }
      gcol.noalias() = wmat.transpose() * gomat;
      detail::col2im(gcol, k_, stride_, oh, ow, gpad);
      detail::unpad_sample_grad(gpad, gin, n, pad_, pad_mode_);
    }
    return gin;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    out.push_back({label_ + ".weight", &weight_, &gweight_});
    if (use_bias_) out.push_back({label_ + ".bias", &bias_, &gbias_});
  }

  Eigen::Index fan_in() const { return in_c_ * k_ * k_; }

 private:
  Eigen::Index out_extent(Eigen::Index n) const {
    const Eigen::Index e = (n + 2 * pad_ - k_) / stride_ + 1;
    if (e < 1)
      throw InputError(label_ + ": spatial extent " + std::to_string(n) +
                       " collapses below 1 after convolution");
    return e;
  }

  void check_input(const Tensor4<Scalar>& in) const {
    if (in.channels() != in_c_)
      throw InputError(label_ + ": expected " + std::to_string(in_c_) + " channels, got " +
                       std::to_string(in.channels()));
    if (pad_mode_ == PadMode::Reflect && (in.height() <= pad_ || in.width() <= pad_))
      throw InputError(label_ + ": input too small for reflection padding " +
                       std::to_string(pad_));
  }

  std::string label_;
  Eigen::Index in_c_, out_c_, k_, stride_, pad_;
  PadMode pad_mode_;
  bool use_bias_;
  ArrayX<Scalar> weight_, bias_, gweight_, gbias_;
};

/// Nearest-neighbour 2x upsampling; paired with a stride-1 convolution this
/// forms the decoder's upsampling convolutions.
template <typename Scalar>
class Upsample2x : public Layer<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    (void)trace;
    Tensor4<Scalar> out(in.batch(), in.channels(), in.height() * 2, in.width() * 2);
    for (Eigen::Index n = 0; n < in.batch(); ++n)
      for (Eigen::Index c = 0; c < in.channels(); ++c) {
        auto src = in.channel(n, c);
        auto dst = out.channel(n, c);
        for (Eigen::Index y = 0; y < in.height(); ++y)
          for (Eigen::Index x = 0; x < in.width(); ++x) {
            const Scalar v = src(y, x);
            dst(2 * y, 2 * x) = v;
            dst(2 * y, 2 * x + 1) = v;
            dst(2 * y + 1, 2 * x) = v;
            dst(2 * y + 1, 2 * x + 1) = v;
          }
      }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>&,
                           bool) override {
    Tensor4<Scalar> gin(grad_out.batch(), grad_out.channels(), grad_out.height() / 2,
                        grad_out.width() / 2);
    for (Eigen::Index n = 0; n < gin.batch(); ++n)
      for (Eigen::Index c = 0; c < gin.channels(); ++c) {
        auto src = grad_out.channel(n, c);
        auto dst = gin.channel(n, c);
        for (Eigen::Index y = 0; y < gin.height(); ++y)
          for (Eigen::Index x = 0; x < gin.width(); ++x)
            dst(y, x) = src(2 * y, 2 * x) + src(2 * y, 2 * x + 1) + src(2 * y + 1, 2 * x) +
                        src(2 * y + 1, 2 * x + 1);
      }
    return gin;
  }
};

/// Per-instance, per-channel normalization over the spatial plane, no affine
/// parameters. Batch statistics are degenerate at batch size 1, which is why
/// the trainer normalizes per instance.
template <typename Scalar>
class InstanceNorm2d : public Layer<Scalar> {
 public:
  explicit InstanceNorm2d(Scalar eps = Scalar(1e-5)) : eps_(eps) {}

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    Tensor4<Scalar> out = in.zeros_like();
    Tensor4<Scalar> inv_std(in.batch(), in.channels(), 1, 1);
    const Scalar m = static_cast<Scalar>(in.height() * in.width());
    for (Eigen::Index n = 0; n < in.batch(); ++n)
      for (Eigen::Index c = 0; c < in.channels(); ++c) {
        auto src = in.channel(n, c);
        const Scalar mu = src.sum() / m;
        const Scalar var = (src.array() - mu).square().sum() / m;
        const Scalar is = Scalar(1) / std::sqrt(var + eps_);
        out.channel(n, c) = (src.array() - mu) * is;
        inv_std(n, c, 0, 0) = is;
      }
    if (trace) {
      trace->saved.clear();
      trace->saved.push_back(out);
      trace->saved.push_back(inv_std);
    }
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    const Tensor4<Scalar>& xhat = trace.saved[0];
    const Tensor4<Scalar>& inv_std = trace.saved[1];
    Tensor4<Scalar> gin = grad_out.zeros_like();
    const Scalar m = static_cast<Scalar>(grad_out.height() * grad_out.width());
    for (Eigen::Index n = 0; n < grad_out.batch(); ++n)
      for (Eigen::Index c = 0; c < grad_out.channels(); ++c) {
        auto g = grad_out.channel(n, c);
        auto xh = xhat.channel(n, c);
        const Scalar gmean = g.sum() / m;
        const Scalar gxmean = (g.array() * xh.array()).sum() / m;
        gin.channel(n, c) =
            (g.array() - gmean - xh.array() * gxmean) * inv_std(n, c, 0, 0);
      }
    return gin;
  }

 private:
  Scalar eps_;
};

template <typename Scalar>
class ReLU : public Layer<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    if (trace) trace->saved.assign(1, in);
    Tensor4<Scalar> out = in;
    out.array() = out.array().max(Scalar(0));
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    Tensor4<Scalar> gin = grad_out;
    gin.array() *= (trace.saved[0].array() > Scalar(0)).template cast<Scalar>();
    return gin;
  }
};

template <typename Scalar>
class LeakyReLU : public Layer<Scalar> {
 public:
  explicit LeakyReLU(Scalar slope) : slope_(slope) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    if (trace) trace->saved.assign(1, in);
    Tensor4<Scalar> out = in;
    out.array() = (out.array() > Scalar(0)).select(out.array(), out.array() * slope_);
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    Tensor4<Scalar> gin = grad_out;
    const auto& x = trace.saved[0].array();
    gin.array() *= (x > Scalar(0)).select(ArrayX<Scalar>::Ones(x.size()),
                                          ArrayX<Scalar>::Constant(x.size(), slope_));
    return gin;
  }

 private:
  Scalar slope_;
};

template <typename Scalar>
class Tanh : public Layer<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    Tensor4<Scalar> out = in;
    out.array() = out.array().tanh();
    if (trace) trace->saved.assign(1, out);
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    Tensor4<Scalar> gin = grad_out;
    gin.array() *= Scalar(1) - trace.saved[0].array().square();
    return gin;
  }
};

template <typename Scalar>
class Sigmoid : public Layer<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    Tensor4<Scalar> out = in;
    out.array() = Scalar(1) / (Scalar(1) + (-out.array()).exp());
    if (trace) trace->saved.assign(1, out);
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    Tensor4<Scalar> gin = grad_out;
    const auto& y = trace.saved[0].array();
    gin.array() *= y * (Scalar(1) - y);
    return gin;
  }
};

template <typename Scalar>
class Sequential : public Layer<Scalar> {
 public:
  void add(std::unique_ptr<Layer<Scalar>> layer) { layers_.push_back(std::move(layer)); }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    if (trace) trace->children.resize(layers_.size());
    Tensor4<Scalar> cur = in;
    for (size_t i = 0; i < layers_.size(); ++i)
      cur = layers_[i]->forward(cur, trace ? &trace->children[i] : nullptr);
    return cur;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool accumulate_param_grads) override {
    Tensor4<Scalar> g = grad_out;
    for (size_t i = layers_.size(); i-- > 0;)
      g = layers_[i]->backward(g, trace.children[i], accumulate_param_grads);
    return g;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    for (auto& l : layers_) l->collect_params(out);
  }

  size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

/// Two reflect-padded 3x3 convolutions with instance norm around an additive
/// skip connection.
template <typename Scalar>
class ResidualBlock : public Layer<Scalar> {
 public:
  ResidualBlock(const std::string& label, Eigen::Index channels) {
    branch_.add(std::make_unique<Conv2d<Scalar>>(label + ".conv1", channels, channels, 3, 1, 1,
                                                 PadMode::Reflect, false));
    branch_.add(std::make_unique<InstanceNorm2d<Scalar>>());
    branch_.add(std::make_unique<ReLU<Scalar>>());
    branch_.add(std::make_unique<Conv2d<Scalar>>(label + ".conv2", channels, channels, 3, 1, 1,
                                                 PadMode::Reflect, false));
    branch_.add(std::make_unique<InstanceNorm2d<Scalar>>());
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    if (trace) trace->children.resize(1);
    Tensor4<Scalar> out = branch_.forward(in, trace ? &trace->children[0] : nullptr);
    out.array() += in.array();
    return out;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool accumulate_param_grads) override {
    Tensor4<Scalar> g = branch_.backward(grad_out, trace.children[0], accumulate_param_grads);
    g.array() += grad_out.array();
    return g;
  }

  void collect_params(std::vector<ParamRef<Scalar>>& out) override {
    branch_.collect_params(out);
  }

 private:
  Sequential<Scalar> branch_;
};

template <typename Scalar>
Eigen::Index param_count(const std::vector<ParamRef<Scalar>>& refs) {
  Eigen::Index total = 0;
  for (const auto& r : refs) total += r.value->size();
  return total;
}

template <typename Scalar>
void zero_grads(const std::vector<ParamRef<Scalar>>& refs) {
  for (const auto& r : refs) r.grad->setZero();
}

template <typename Scalar>
Scalar grad_l2_norm(const std::vector<ParamRef<Scalar>>& refs) {
  Scalar acc = 0;
  for (const auto& r : refs) acc += r.grad->square().sum();
  return std::sqrt(acc);
}

}  // namespace cycletrans
