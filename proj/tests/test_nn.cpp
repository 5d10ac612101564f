#include "oracles.hpp"

#include "semsec/nn.hpp"

#include <doctest.h>

#include <sstream>

using namespace semsec;
using nn::LayerSpec;

TEST_CASE("dense forward is W x + b") {
  nn::Network net({LayerSpec::dense(3, 2)});
  net.weight(0) << 1, 2, 3, 4, 5, 6;  // row by row
  net.bias(0) << 0.5, -1;
  Matrix x(3, 1);
  x << 1, 0, -1;
  const Matrix y = net.forward(x);
  CHECK(y(0, 0) == doctest::Approx(1 - 3 + 0.5));
  CHECK(y(1, 0) == doctest::Approx(4 - 6 - 1));
}

TEST_CASE("activation layers") {
  Matrix x(3, 1);
  x << -2, 0, 3;
  nn::Network relu({LayerSpec::relu(3)});
  const Matrix r = relu.forward(x);
  CHECK(r(0, 0) == 0.0);
  CHECK(r(2, 0) == 3.0);
  nn::Network sig({LayerSpec::sigmoid(3)});
  CHECK(sig.forward(x)(1, 0) == doctest::Approx(0.5));
  nn::Network th({LayerSpec::tanh(3)});
  CHECK(th.forward(x)(2, 0) == doctest::Approx(std::tanh(3.0)));
}

TEST_CASE("embedding concatenates table columns") {
  nn::Network net({LayerSpec::embedding(5, 2, 3)});
  auto table = net.weight(0);
  REQUIRE(table.rows() == 2);
  REQUIRE(table.cols() == 5);
  for (Index c = 0; c < 5; ++c) table.col(c) << 10.0 * c, 10.0 * c + 1;
  Matrix tokens(3, 1);
  tokens << 4, 0, 2;
  const Matrix out = net.forward(tokens);
  REQUIRE(out.rows() == 6);
  CHECK(out(0, 0) == 40);
  CHECK(out(1, 0) == 41);
  CHECK(out(2, 0) == 0);
  CHECK(out(4, 0) == 20);
}

TEST_CASE("embedding rejects out-of-range tokens") {
  nn::Network net({LayerSpec::embedding(5, 2, 1)});
  CHECK_THROWS(net.forward(Matrix::Constant(1, 1, 5.0)));
  CHECK_THROWS(net.forward(Matrix::Constant(1, 1, -1.0)));
}

TEST_CASE("layer gradients match central differences") {
  Rng rng = make_stream(11, Stream::init);
  const std::vector<std::vector<LayerSpec>> stacks = {
      {LayerSpec::dense(4, 3)},
      {LayerSpec::dense(4, 5), LayerSpec::relu(5), LayerSpec::dense(5, 3)},
      {LayerSpec::dense(4, 5), LayerSpec::tanh(5), LayerSpec::dense(5, 3)},
      {LayerSpec::dense(4, 5), LayerSpec::sigmoid(5), LayerSpec::dense(5, 3)},
      {LayerSpec::dense(4, 5), LayerSpec::reshape(5), LayerSpec::dense(5, 3)},
  };
  std::uint64_t k = 0;
  for (const auto& spec : stacks) {
    nn::Network net = nn::init_network(spec, 100 + k++);
    const Matrix x = oracle::gaussian(4, 6, rng);
    const Matrix t = oracle::gaussian(3, 6, rng);
    CHECK(oracle::layer_grad_error(net, x, t) < 1e-4);
  }
  nn::Network emb = nn::init_network({LayerSpec::embedding(6, 3, 2), LayerSpec::dense(6, 2)}, 7);
  Matrix tokens(2, 4);
  tokens << 0, 1, 5, 3, 2, 2, 4, 0;
  CHECK(oracle::layer_grad_error(emb, tokens, oracle::gaussian(2, 4, rng)) < 1e-4);
}

TEST_CASE("input gradient matches central differences") {
  Rng rng = make_stream(12, Stream::init);
  nn::Network net = nn::init_network({LayerSpec::dense(3, 4), LayerSpec::tanh(4), LayerSpec::dense(4, 2)}, 3);
  Matrix x = oracle::gaussian(3, 2, rng);
  const Matrix t = oracle::gaussian(2, 2, rng);
  const Matrix out = net.forward(x);
  const Matrix gx = net.backward(2.0 * (out - t) / static_cast<double>(t.size()));
  Vector flat = x.reshaped();
  const Vector num = oracle::central_difference(
      [&] {
        const Matrix xi = flat.reshaped(3, 2);
        return (net.forward(xi) - t).squaredNorm() / static_cast<double>(t.size());
      },
      flat, 1e-6);
  CHECK(oracle::relative_error(gx.reshaped(), num) < 1e-5);
}

TEST_CASE("frozen network passes gradients but accumulates none") {
  nn::Network net = nn::init_network({LayerSpec::dense(2, 2)}, 1);
  net.set_trainable(false);
  net.zero_grad();
  net.forward(Matrix::Ones(2, 1));
  const Matrix gx = net.backward(Matrix::Ones(2, 1));
  CHECK(net.grads().isZero(0.0));
  CHECK(gx.norm() > 0.0);
}

TEST_CASE("sgd step with weight decay") {
  nn::Network net({LayerSpec::dense(1, 1)});
  net.params() << 2.0, 1.0;
  net.grads() << 0.5, -1.0;
  nn::OptimizerConfig opt;
  opt.kind = nn::OptimizerKind::sgd;
  opt.learning_rate = 0.1;
  opt.weight_decay = 0.01;
  nn::optimizer_step(net, opt);
  CHECK(net.params()[0] == doctest::Approx(2.0 - 0.1 * (0.5 + 0.02)));
  CHECK(net.params()[1] == doctest::Approx(1.0 - 0.1 * (-1.0 + 0.01)));
  CHECK(net.grads().isZero(0.0));
}

TEST_CASE("first adam step moves each parameter by about the learning rate") {
  nn::Network net({LayerSpec::dense(2, 1)});
  net.params().setZero();
  net.grads() << 3.0, -0.2, 1e-3;
  nn::OptimizerConfig opt;
  opt.learning_rate = 0.01;
  nn::optimizer_step(net, opt);
  CHECK(net.params()[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(net.params()[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(net.params()[2] == doctest::Approx(-0.01).epsilon(1e-4));
}

TEST_CASE("non-finite gradient aborts the step") {
  nn::Network net({LayerSpec::dense(1, 1)});
  net.params() << 1.0, 1.0;
  net.grads() << std::nan(""), 0.0;
  const Vector before = net.params();
  CHECK_THROWS_AS(nn::optimizer_step(net, {}), NumericalError);
  CHECK(net.params() == before);
}

TEST_CASE("mismatched layer sizes are rejected") {
  const std::vector<LayerSpec> bad = {LayerSpec::dense(3, 4), LayerSpec::dense(5, 2)};
  CHECK_THROWS_AS(nn::validate(bad), ConfigError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  nn::Network net = nn::init_network(
      {LayerSpec::embedding(9, 2, 3), LayerSpec::dense(6, 4), LayerSpec::sigmoid(4), LayerSpec::dense(4, 1)}, 5);
  std::stringstream buf;
  nn::save_network(buf, net);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "SEMSEC01");
  const nn::Network back = nn::load_network(buf);
  CHECK(back.layers() == net.layers());
  CHECK(back.params() == net.params());

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(nn::load_network(truncated));
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::stringstream bad_magic(corrupt);
  CHECK_THROWS(nn::load_network(bad_magic));
}
