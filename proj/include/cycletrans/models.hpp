#pragma once

#include <random>

#include "cycletrans/layers.hpp"

namespace cycletrans {

enum class Direction { XToY, YToX };

inline const char* direction_name(Direction d) { return d == Direction::XToY ? "x_to_y" : "y_to_x"; }

enum class NormKind { Instance, None };

/// Residual translation generator.
///
/// Layer table (S = image_size, w = base_width, R = n_residual_blocks,
/// reflect padding throughout):
///
///   stem   7x7 conv, stride 1, pad 3   in -> w      S   x S
///   down1  3x3 conv, stride 2, pad 1   w  -> 2w     S/2 x S/2
///   down2  3x3 conv, stride 2, pad 1   2w -> 4w     S/4 x S/4
///   res x R  two 3x3 convs + skip      4w -> 4w     S/4 x S/4
///   up1    2x nearest + 3x3 conv       4w -> 2w     S/2 x S/2
///   up2    2x nearest + 3x3 conv       2w -> w      S   x S
///   head   7x7 conv, stride 1, pad 3   w  -> in     S   x S, tanh
///
/// Norm layers are per-instance; `norm = None` drops them (used by the
/// identity-biased test initialization). Convolutions followed by a norm
/// carry no bias.
struct GeneratorSpec {
  int input_channels = 1;
  int base_width = 32;
  int n_residual_blocks = 15;
  int image_size = 144;
  double output_lo = -1.0;
  double output_hi = 1.0;
  NormKind norm = NormKind::Instance;

  static constexpr int downsampling_factor = 4;

  void validate() const {
    if (input_channels < 1) throw ConfigError("GeneratorSpec: input_channels must be >= 1");
    if (base_width < 2) throw ConfigError("GeneratorSpec: base_width must be >= 2");
    if (n_residual_blocks < 1)
      throw ConfigError("GeneratorSpec: n_residual_blocks must be >= 1");
    if (image_size % downsampling_factor != 0)
      throw ConfigError("GeneratorSpec: image_size " + std::to_string(image_size) +
                        " not divisible by downsampling factor " +
                        std::to_string(downsampling_factor));
    if (image_size < 2 * downsampling_factor)
      throw ConfigError("GeneratorSpec: image_size too small for the bottleneck");
    if (!(output_lo < output_hi)) throw ConfigError("GeneratorSpec: empty output range");
  }
};

enum class DiscOutputMode { PatchMap, Scalar };

struct DiscriminatorSpec {
  int input_channels = 1;
  int base_width = 32;
  int n_layers = 3;  // stride-2 downsampling blocks
  DiscOutputMode output_mode = DiscOutputMode::PatchMap;

  void validate() const {
    if (input_channels < 1) throw ConfigError("DiscriminatorSpec: input_channels must be >= 1");
    if (base_width < 1) throw ConfigError("DiscriminatorSpec: base_width must be >= 1");
    if (n_layers < 1) throw ConfigError("DiscriminatorSpec: n_layers must be >= 1");
  }

  /// Spatial extent of the patch map for a given square input, rejecting
  /// configurations whose map collapses below 1x1.
  int patch_extent(int image_size) const {
    int s = image_size;
    for (int i = 0; i < n_layers; ++i) s = (s + 2 - 4) / 2 + 1;  // 4x4 stride 2 pad 1
    s = s + 2 - 4 + 1;                                           // penultimate, stride 1
    s = s + 2 - 4 + 1;                                           // final, stride 1
    if (s < 1)
      throw ConfigError("DiscriminatorSpec: n_layers " + std::to_string(n_layers) +
                        " reduces a " + std::to_string(image_size) +
                        "px input below 1x1");
    return s;
  }
};

/// Reduces a patch map to its scalar mean.
template <typename Scalar>
class GlobalAverage : public Layer<Scalar> {
 public:
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    if (trace) trace->saved.assign(1, in);
    Tensor4<Scalar> out(in.batch(), in.channels(), 1, 1);
    for (Eigen::Index n = 0; n < in.batch(); ++n)
      for (Eigen::Index c = 0; c < in.channels(); ++c)
        out(n, c, 0, 0) = in.channel(n, c).sum() / Scalar(in.height() * in.width());
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool) override {
    const Tensor4<Scalar>& in = trace.saved[0];
    Tensor4<Scalar> gin = in.zeros_like();
    const Scalar inv = Scalar(1) / Scalar(in.height() * in.width());
    for (Eigen::Index n = 0; n < in.batch(); ++n)
      for (Eigen::Index c = 0; c < in.channels(); ++c)
        gin.channel(n, c).setConstant(grad_out(n, c, 0, 0) * inv);
    return gin;
  }
};

/// Affine map from tanh's [-1,1] onto the configured output range.
template <typename Scalar>
class RangeScale : public Layer<Scalar> {
 public:
  RangeScale(Scalar lo, Scalar hi) : a_((hi - lo) / 2), b_((hi + lo) / 2) {}
  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
    (void)trace;
    Tensor4<Scalar> out = in;
    out.array() = out.array() * a_ + b_;
    return out;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>&,
                           bool) override {
    Tensor4<Scalar> gin = grad_out;
    gin.array() *= a_;
    return gin;
  }

 private:
  Scalar a_, b_;
};

template <typename Scalar>
class Generator {
 public:
  explicit Generator(const GeneratorSpec& spec) : spec_(spec) {
    spec.validate();
    const int w = spec.base_width;
    const bool norm = spec.norm == NormKind::Instance;
    const bool bias = !norm;  // bias is dead weight under the norm's mean subtraction
    auto add_norm = [&] {
      if (norm) net_.add(std::make_unique<InstanceNorm2d<Scalar>>());
    };
    net_.add(std::make_unique<Conv2d<Scalar>>("stem", spec.input_channels, w, 7, 1, 3,
                                              PadMode::Reflect, bias));
    add_norm();
    net_.add(std::make_unique<ReLU<Scalar>>());
    net_.add(std::make_unique<Conv2d<Scalar>>("down1", w, 2 * w, 3, 2, 1, PadMode::Reflect,
                                              bias));
    add_norm();
    net_.add(std::make_unique<ReLU<Scalar>>());
    net_.add(std::make_unique<Conv2d<Scalar>>("down2", 2 * w, 4 * w, 3, 2, 1, PadMode::Reflect,
                                              bias));
    add_norm();
    net_.add(std::make_unique<ReLU<Scalar>>());
    for (int i = 0; i < spec.n_residual_blocks; ++i)
      net_.add(std::make_unique<ResBlockMaybeNorm>("res" + std::to_string(i + 1), 4 * w, norm));
    net_.add(std::make_unique<Upsample2x<Scalar>>());
    net_.add(std::make_unique<Conv2d<Scalar>>("up1", 4 * w, 2 * w, 3, 1, 1, PadMode::Reflect,
                                              bias));
    add_norm();
    net_.add(std::make_unique<ReLU<Scalar>>());
    net_.add(std::make_unique<Upsample2x<Scalar>>());
    net_.add(std::make_unique<Conv2d<Scalar>>("up2", 2 * w, w, 3, 1, 1, PadMode::Reflect,
                                              bias));
    add_norm();
    net_.add(std::make_unique<ReLU<Scalar>>());
    net_.add(std::make_unique<Conv2d<Scalar>>("head", w, spec.input_channels, 7, 1, 3,
                                              PadMode::Reflect, true));
    net_.add(std::make_unique<Tanh<Scalar>>());
    net_.add(std::make_unique<RangeScale<Scalar>>(Scalar(spec.output_lo),
                                                  Scalar(spec.output_hi)));
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace = nullptr) const {
    check_input(in);
    return net_.forward(in, trace);
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool accumulate_param_grads = true) {
    return net_.backward(grad_out, trace, accumulate_param_grads);
  }

  std::vector<ParamRef<Scalar>> params() {
    std::vector<ParamRef<Scalar>> refs;
    net_.collect_params(refs);
    return refs;
  }

  const GeneratorSpec& spec() const { return spec_; }

 private:
  /// Residual block whose norms follow the generator's norm kind.
  class ResBlockMaybeNorm : public Layer<Scalar> {
   public:
    ResBlockMaybeNorm(const std::string& label, Eigen::Index channels, bool norm) {
      branch_.add(std::make_unique<Conv2d<Scalar>>(label + ".conv1", channels, channels, 3, 1,
                                                   1, PadMode::Reflect, !norm));
      if (norm) branch_.add(std::make_unique<InstanceNorm2d<Scalar>>());
      branch_.add(std::make_unique<ReLU<Scalar>>());
      branch_.add(std::make_unique<Conv2d<Scalar>>(label + ".conv2", channels, channels, 3, 1,
                                                   1, PadMode::Reflect, !norm));
      if (norm) branch_.add(std::make_unique<InstanceNorm2d<Scalar>>());
    }
    Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace) const override {
      if (trace) trace->children.resize(1);
      Tensor4<Scalar> out = branch_.forward(in, trace ? &trace->children[0] : nullptr);
      out.array() += in.array();
      return out;
    }
    Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                             bool accumulate) override {
      Tensor4<Scalar> g = branch_.backward(grad_out, trace.children[0], accumulate);
      g.array() += grad_out.array();
      return g;
    }
    void collect_params(std::vector<ParamRef<Scalar>>& out) override {
      branch_.collect_params(out);
    }

   private:
    Sequential<Scalar> branch_;
  };

  void check_input(const Tensor4<Scalar>& in) const {
    if (in.channels() != spec_.input_channels || in.height() != spec_.image_size ||
        in.width() != spec_.image_size)
      throw InputError("generator: input " + in.shape_str() + " does not match spec (" +
                       std::to_string(spec_.input_channels) + "," +
                       std::to_string(spec_.image_size) + "," +
                       std::to_string(spec_.image_size) + ")");
  }

  GeneratorSpec spec_;
  Sequential<Scalar> net_;
};

/// Patch-based convolutional classifier with sigmoid output, so every score
/// lies in (0,1) as the log-loss objective requires.
template <typename Scalar>
class Discriminator {
 public:
  explicit Discriminator(const DiscriminatorSpec& spec) : spec_(spec) {
    spec.validate();
    const int w = spec.base_width;
    int prev = spec.input_channels;
    int mult = 1;
    net_.add(std::make_unique<Conv2d<Scalar>>("c0", prev, w, 4, 2, 1, PadMode::Zero));
    net_.add(std::make_unique<LeakyReLU<Scalar>>(Scalar(0.2)));
    prev = w;
    for (int i = 1; i < spec.n_layers; ++i) {
      mult = std::min(1 << i, 8);
      net_.add(std::make_unique<Conv2d<Scalar>>("c" + std::to_string(i), prev, w * mult, 4, 2,
                                                1, PadMode::Zero, false));
      net_.add(std::make_unique<InstanceNorm2d<Scalar>>());
      net_.add(std::make_unique<LeakyReLU<Scalar>>(Scalar(0.2)));
      prev = w * mult;
    }
    mult = std::min(1 << spec.n_layers, 8);
    net_.add(std::make_unique<Conv2d<Scalar>>("penult", prev, w * mult, 4, 1, 1, PadMode::Zero,
                                              false));
    net_.add(std::make_unique<InstanceNorm2d<Scalar>>());
    net_.add(std::make_unique<LeakyReLU<Scalar>>(Scalar(0.2)));
    net_.add(std::make_unique<Conv2d<Scalar>>("final", w * mult, 1, 4, 1, 1, PadMode::Zero));
    net_.add(std::make_unique<Sigmoid<Scalar>>());
    if (spec.output_mode == DiscOutputMode::Scalar)
      net_.add(std::make_unique<GlobalAverage<Scalar>>());
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& in, Trace<Scalar>* trace = nullptr) const {
    return net_.forward(in, trace);
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& grad_out, const Trace<Scalar>& trace,
                           bool accumulate_param_grads = true) {
    return net_.backward(grad_out, trace, accumulate_param_grads);
  }

  std::vector<ParamRef<Scalar>> params() {
    std::vector<ParamRef<Scalar>> refs;
    net_.collect_params(refs);
    return refs;
  }

  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  Sequential<Scalar> net_;
};

/// Zero-mean Gaussian init for convolution weights, biases left at zero.
template <typename Scalar>
void gaussian_init(const std::vector<ParamRef<Scalar>>& refs, std::mt19937_64& rng,
                   Scalar sigma = Scalar(0.02)) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(sigma));
  for (const auto& r : refs) {
    if (r.name.ends_with(".weight"))
      for (Eigen::Index i = 0; i < r.value->size(); ++i)
        (*r.value)[i] = static_cast<Scalar>(dist(rng));
    else
      r.value->setZero();
  }
}

/// Test-only initialization that routes the signed input through a positive
/// and a negated channel so the untrained generator approximates the
/// identity. Requires norm = None (instance norm would rescale the carried
/// signal) and base_width >= 2.
template <typename Scalar>
void identity_bias_init(Generator<Scalar>& gen) {
  if (gen.spec().norm != NormKind::None)
    throw ConfigError("identity_bias_init requires a norm-free generator");
  auto refs = gen.params();
  const int w = gen.spec().base_width;
  const int in_c = gen.spec().input_channels;
  auto weight_at = [](ParamRef<Scalar>& r, Eigen::Index oc, Eigen::Index ic, Eigen::Index in_ch,
                      Eigen::Index k, Eigen::Index ky, Eigen::Index kx) -> Scalar& {
    return (*r.value)[((oc * in_ch + ic) * k + ky) * k + kx];
  };
  for (auto& r : refs) {
    r.value->setZero();
    if (!r.name.ends_with(".weight")) continue;
    if (r.name == "stem.weight") {
      weight_at(r, 0, 0, in_c, 7, 3, 3) = Scalar(1);
      weight_at(r, 1, 0, in_c, 7, 3, 3) = Scalar(-1);
    } else if (r.name == "down1.weight") {
      weight_at(r, 0, 0, w, 3, 1, 1) = Scalar(1);
      weight_at(r, 1, 1, w, 3, 1, 1) = Scalar(1);
    } else if (r.name == "down2.weight") {
      weight_at(r, 0, 0, 2 * w, 3, 1, 1) = Scalar(1);
      weight_at(r, 1, 1, 2 * w, 3, 1, 1) = Scalar(1);
    } else if (r.name == "up1.weight") {
      weight_at(r, 0, 0, 4 * w, 3, 1, 1) = Scalar(1);
      weight_at(r, 1, 1, 4 * w, 3, 1, 1) = Scalar(1);
    } else if (r.name == "up2.weight") {
      weight_at(r, 0, 0, 2 * w, 3, 1, 1) = Scalar(1);
      weight_at(r, 1, 1, 2 * w, 3, 1, 1) = Scalar(1);
    } else if (r.name == "head.weight") {
      weight_at(r, 0, 0, w, 7, 3, 3) = Scalar(1);
      weight_at(r, 0, 1, w, 7, 3, 3) = Scalar(-1);
    }
    // residual convolutions stay zero: each block reduces to its skip
  }
}

template <typename Scalar>
struct TranslationModel {
  TranslationModel(const GeneratorSpec& gspec, const DiscriminatorSpec& dspec)
      : gen_x_to_y(gspec), gen_y_to_x(gspec), disc_x(dspec), disc_y(dspec) {
    dspec.patch_extent(gspec.image_size);
  }

  static TranslationModel random_init(const GeneratorSpec& gspec,
                                      const DiscriminatorSpec& dspec, uint64_t seed) {
    TranslationModel m(gspec, dspec);
    std::mt19937_64 rng(seed);
    for (auto* net : {&m.gen_x_to_y, &m.gen_y_to_x}) {
      auto refs = net->params();
      gaussian_init(refs, rng);
    }
    auto dx = m.disc_x.params();
    gaussian_init(dx, rng);
    auto dy = m.disc_y.params();
    gaussian_init(dy, rng);
    return m;
  }

  Generator<Scalar>& generator(Direction d) {
    return d == Direction::XToY ? gen_x_to_y : gen_y_to_x;
  }
  const Generator<Scalar>& generator(Direction d) const {
    return d == Direction::XToY ? gen_x_to_y : gen_y_to_x;
  }

  Generator<Scalar> gen_x_to_y;
  Generator<Scalar> gen_y_to_x;
  Discriminator<Scalar> disc_x;  // scores real X against gen_y_to_x(y)
  Discriminator<Scalar> disc_y;  // scores real Y against gen_x_to_y(x)
};

using TranslationModelD = TranslationModel<real_t>;

/// Inference-mode translation; deterministic given parameters.
template <typename Scalar>
Tensor4<Scalar> translate(const TranslationModel<Scalar>& model, const Tensor4<Scalar>& batch,
                          Direction direction) {
  return model.generator(direction).forward(batch, nullptr);
}

}  // namespace cycletrans
