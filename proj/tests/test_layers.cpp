#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cycletrans/layers.hpp"
#include "oracles.hpp"

using namespace cycletrans;

namespace {

// Scalar probe: sum(forward(x) .* R) for a fixed random R, so every output
// coordinate contributes to the checked gradient.
ArrayX<double> flat_params(const std::vector<ParamRef<double>>& refs) {
  Eigen::Index total = param_count(refs);
  ArrayX<double> out(total);
  Eigen::Index at = 0;
  for (const auto& r : refs) {
    out.segment(at, r.value->size()) = *r.value;
    at += r.value->size();
  }
  return out;
}

void check_layer_grads(Layer<double>& layer, const Tensor4d& input, uint64_t seed,
                       double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  Trace<double> trace;
  Tensor4d out = layer.forward(input, &trace);
  Tensor4d probe = oracle::random_tensor(out.batch(), out.channels(), out.height(), out.width(), rng);

  std::vector<ParamRef<double>> refs;
  layer.collect_params(refs);
  zero_grads(refs);
  Tensor4d gin = layer.backward(probe, trace, true);

  Tensor4d x = input;
  auto loss = [&]() {
    Tensor4d o = layer.forward(x, nullptr);
    return (o.array() * probe.array()).sum();
  };

  // input gradient
  ArrayX<double> analytic_in = gin.array();
  auto rep = oracle::gradient_check(loss, x.array(), analytic_in);
  CAPTURE(rep.worst_index);
  CAPTURE(rep.analytic_at_worst);
  CAPTURE(rep.fd_at_worst);
  CHECK(rep.max_rel_error < tol);

  // parameter gradients
  for (auto& r : refs) {
    ArrayX<double> analytic = *r.grad;
    auto loss_theta = [&]() {
      Tensor4d o = layer.forward(x, nullptr);
      return (o.array() * probe.array()).sum();
    };
    auto prep = oracle::gradient_check(loss_theta, *r.value, analytic);
    CAPTURE(r.name);
    CAPTURE(prep.worst_index);
    CHECK(prep.max_rel_error < tol);
  }
}

}  // namespace

TEST_CASE("conv2d forward matches direct-loop convolution") {
  std::mt19937_64 rng(7);
  for (auto mode : {PadMode::Zero, PadMode::Reflect}) {
    for (int stride : {1, 2}) {
      Conv2d<double> conv("c", 3, 4, 3, stride, 1, mode);
      std::vector<ParamRef<double>> refs;
      conv.collect_params(refs);
      for (auto& r : refs)
        for (Eigen::Index i = 0; i < r.value->size(); ++i)
          (*r.value)[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
      Tensor4d in = oracle::random_tensor(2, 3, 6, 6, rng);
      Tensor4d out = conv.forward(in, nullptr);

      std::vector<double> wflat(refs[0].value->data(),
                                refs[0].value->data() + refs[0].value->size());
      std::vector<double> bflat(refs[1].value->data(),
                                refs[1].value->data() + refs[1].value->size());
      Tensor4d expect = oracle::conv2d_naive(in, wflat, bflat, 4, 3, stride, 1,
                                             mode == PadMode::Reflect);
      REQUIRE(out.same_shape(expect));
      CHECK((out.array() - expect.array()).abs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("conv2d output extent and error on collapse") {
  Conv2d<double> conv("c", 1, 1, 4, 2, 1, PadMode::Zero);
  std::mt19937_64 rng(3);
  Tensor4d in = oracle::random_tensor(1, 1, 8, 8, rng);
  CHECK(conv.forward(in, nullptr).height() == 4);
  Conv2d<double> big("big", 1, 1, 9, 1, 0, PadMode::Zero);
  CHECK_THROWS_AS(big.forward(in, nullptr), InputError);
}

TEST_CASE("conv2d gradients vs finite differences") {
  std::mt19937_64 rng(11);
  for (auto mode : {PadMode::Zero, PadMode::Reflect}) {
    Conv2d<double> conv("c", 2, 3, 3, 1, 1, mode);
    std::vector<ParamRef<double>> refs;
    conv.collect_params(refs);
    for (auto& r : refs)
      for (Eigen::Index i = 0; i < r.value->size(); ++i)
        (*r.value)[i] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    Tensor4d in = oracle::random_tensor(2, 2, 5, 5, rng);
    check_layer_grads(conv, in, 100 + static_cast<int>(mode));
  }
}

TEST_CASE("strided conv gradients") {
  std::mt19937_64 rng(13);
  Conv2d<double> conv("c", 2, 2, 4, 2, 1, PadMode::Zero);
  std::vector<ParamRef<double>> refs;
  conv.collect_params(refs);
  for (auto& r : refs)
    for (Eigen::Index i = 0; i < r.value->size(); ++i)
      (*r.value)[i] = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  Tensor4d in = oracle::random_tensor(1, 2, 8, 8, rng);
  check_layer_grads(conv, in, 77);
}

TEST_CASE("upsample2x forward and gradients") {
  std::mt19937_64 rng(17);
  Upsample2x<double> up;
  Tensor4d in = oracle::random_tensor(1, 2, 3, 3, rng);
  Tensor4d out = up.forward(in, nullptr);
  REQUIRE(out.height() == 6);
  CHECK(out(0, 1, 5, 5) == in(0, 1, 2, 2));
  CHECK(out(0, 0, 0, 1) == in(0, 0, 0, 0));
  check_layer_grads(up, in, 18);
}

TEST_CASE("instance norm normalizes and backpropagates") {
  std::mt19937_64 rng(19);
  InstanceNorm2d<double> norm;
  Tensor4d in = oracle::random_tensor(2, 3, 5, 5, rng, 0.0, 10.0);
  Tensor4d out = norm.forward(in, nullptr);
  for (Eigen::Index n = 0; n < 2; ++n)
    for (Eigen::Index c = 0; c < 3; ++c) {
      auto ch = out.channel(n, c);
      CHECK(std::fabs(ch.sum() / 25.0) < 1e-12);
      CHECK(std::fabs(ch.array().square().sum() / 25.0 - 1.0) < 1e-3);  // eps-shrunk
    }
  check_layer_grads(norm, in, 20, 1e-5);
}

TEST_CASE("activation gradients away from kinks") {
  std::mt19937_64 rng(23);
  Tensor4d in = oracle::random_tensor(1, 2, 4, 4, rng);
  // push values away from 0 so finite differences never straddle the kink
  in.array() = (in.array().abs() + 0.05) * in.array().sign();
  ReLU<double> relu;
  check_layer_grads(relu, in, 24);
  LeakyReLU<double> lrelu(0.2);
  check_layer_grads(lrelu, in, 25);
  Tanh<double> tanh_layer;
  check_layer_grads(tanh_layer, in, 26);
  Sigmoid<double> sigmoid;
  check_layer_grads(sigmoid, in, 27);
}

TEST_CASE("residual block is identity with zero branch and differentiable otherwise") {
  std::mt19937_64 rng(29);
  ResidualBlock<double> block("res", 2);
  Tensor4d in = oracle::random_tensor(1, 2, 6, 6, rng);
  Tensor4d out = block.forward(in, nullptr);
  CHECK((out.array() - in.array()).abs().maxCoeff() == 0.0);  // zero-init branch

  std::vector<ParamRef<double>> refs;
  block.collect_params(refs);
  for (auto& r : refs)
    for (Eigen::Index i = 0; i < r.value->size(); ++i)
      (*r.value)[i] = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  check_layer_grads(block, in, 30, 1e-5);
}

TEST_CASE("sequential composes forwards and backwards") {
  std::mt19937_64 rng(31);
  Sequential<double> seq;
  seq.add(std::make_unique<Conv2d<double>>("a", 1, 2, 3, 1, 1, PadMode::Reflect));
  seq.add(std::make_unique<Tanh<double>>());
  seq.add(std::make_unique<Conv2d<double>>("b", 2, 1, 3, 1, 1, PadMode::Reflect));
  std::vector<ParamRef<double>> refs;
  seq.collect_params(refs);
  REQUIRE(refs.size() == 4);
  for (auto& r : refs)
    for (Eigen::Index i = 0; i < r.value->size(); ++i)
      (*r.value)[i] = std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
  Tensor4d in = oracle::random_tensor(1, 1, 6, 6, rng);
  check_layer_grads(seq, in, 32, 1e-5);
}

TEST_CASE("tensor batch independence helpers") {
  std::mt19937_64 rng(37);
  Tensor4d a = oracle::random_tensor(1, 1, 4, 4, rng);
  Tensor4d b = oracle::random_tensor(1, 1, 4, 4, rng);
  Tensor4d both = stack_batch<double>({a, b});
  CHECK(both.batch() == 2);
  CHECK((both.sample(0).array() - a.array()).abs().maxCoeff() == 0.0);
  CHECK((both.sample(1).array() - b.array()).abs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(stack_batch<double>({}), InputError);
}
