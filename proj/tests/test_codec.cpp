#include "oracles.hpp"

#include "semsec/codec.hpp"
#include "semsec/superpose.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace semsec;

TEST_CASE("code shape follows the compression knob") {
  const CodeShape one = code_shape(1, 32, 32, 3, 4);
  CHECK(one.l_c == 8);
  CHECK(one.code_dim() == 32);
  CHECK(one.cr() == doctest::Approx(1.0 / 96.0));
  const CodeShape five = code_shape(5, 32, 32, 3, 4);
  CHECK(five.l_c == 40);
  CHECK(five.cr() == doctest::Approx(5.0 / 96.0));
  // Transmitted symbols per image equal CR * H*W*C.
  for (int cu = 1; cu <= 5; ++cu) {
    const CodeShape s = code_shape(cu, 32, 32, 3, 4);
    CHECK(static_cast<double>(s.code_dim()) == doctest::Approx(s.cr() * 3072.0));
  }
  CHECK_THROWS_AS(code_shape(1, 8, 8, 3, 4), ConfigError);
  CHECK_THROWS_AS(code_shape(0, 32, 32, 3, 4), ConfigError);
}

namespace {

struct Nets {
  CodeShape shape = code_shape(1, 16, 16, 3, 4);  // l_c = 2
  CodecArch arch{16, 16, 8, 8, 4, 5, 64};
  nn::Network enc = nn::init_network(semantic_encoder_layers(shape.source_dim, arch, shape.code_dim()), 1);
  nn::Network tj = nn::init_network(text_jammer_layers(arch, shape.code_dim()), 2);
  nn::Network gj = nn::init_network(gauss_jammer_layers(shape.source_dim, arch, shape.code_dim()), 3);
  nn::Network dec = nn::init_network(decoder_layers(shape.code_dim(), arch, shape.source_dim), 4);
};

}  // namespace

TEST_CASE("encoders share the frame shape") {
  Nets n;
  Rng rng = make_stream(1, Stream::data);
  const Matrix images = (oracle::gaussian(n.shape.source_dim, 3, rng).array().tanh() + 1.0) / 2.0;
  const TextCorpus corpus = TextCorpus::from_text("a b c d e f g h i j k l m n o p", n.arch.vocab);
  const Matrix tokens = sample_text_batch(corpus, rng, n.arch.text_len, 3);
  const Matrix g = sample_gauss_batch(n.shape.source_dim, 3, rng);
  for (const Matrix& s : {semantic_encode(n.enc, images, n.shape), text_jam_encode(n.tj, tokens, n.shape),
                          gauss_jam_encode(n.gj, g, n.shape)}) {
    CHECK(s.rows() == n.shape.code_dim());
    CHECK(s.cols() == 3);
    CHECK(frame(s, 0, n.shape).rows() == 4);
    CHECK(frame(s, 0, n.shape).cols() == n.shape.l_c);
  }
  CHECK(semantic_encode(n.enc, images, n.shape) == semantic_encode(n.enc, images, n.shape));
  nn::Network wrong = nn::init_network(semantic_encoder_layers(n.shape.source_dim, n.arch, 12), 1);
  CHECK_THROWS_AS(semantic_encode(wrong, images, n.shape), ShapeError);
}

TEST_CASE("zero input with zero final layer gives a zero frame") {
  Nets n;
  const std::size_t last = n.enc.layers().size() - 1;
  n.enc.weight(last).setZero();
  n.enc.bias(last).setZero();
  CHECK(semantic_encode(n.enc, Matrix::Zero(n.shape.source_dim, 1), n.shape).isZero(0.0));
  // Dense layers start with zero biases, so a zero Gaussian draw maps to zero.
  CHECK(gauss_jam_encode(n.gj, Matrix::Zero(n.shape.source_dim, 1), n.shape).isZero(0.0));
}

TEST_CASE("jamming encoders separate distinct inputs") {
  Nets n;
  Rng rng = make_stream(2, Stream::gauss);
  const Matrix g = sample_gauss_batch(n.shape.source_dim, 2, rng);
  const Matrix s = gauss_jam_encode(n.gj, g, n.shape);
  CHECK((s.col(0) - s.col(1)).norm() > 0.0);
  Matrix tokens(n.arch.text_len, 2);
  tokens.col(0) << 1, 2, 3, 4, 5;
  tokens.col(1) << 9, 8, 7, 6, 5;
  const Matrix t = text_jam_encode(n.tj, tokens, n.shape);
  CHECK((t.col(0) - t.col(1)).norm() > 0.0);
}

TEST_CASE("decoder output is a valid image near the mid-grey baseline") {
  Nets n;
  Rng rng = make_stream(3, Stream::data);
  const Matrix frames = oracle::gaussian(n.shape.code_dim(), 200, rng);
  const Matrix out = decode(n.dec, frames, n.shape);
  CHECK(out.minCoeff() >= 0.0);
  CHECK(out.maxCoeff() <= 1.0);
  CHECK(decode(n.dec, frames, n.shape) == out);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix target(out.rows(), out.cols());
  for (auto& v : target.reshaped()) v = u(rng);
  // Predicting 0.5 for a uniform target has MSE 1/12.
  const double baseline = oracle::psnr_db(1.0 / 12.0);
  const double got = oracle::psnr_db((out - target).squaredNorm() / static_cast<double>(out.size()));
  CHECK(std::abs(got - baseline) <= 3.0);

  nn::Network no_sigmoid = nn::init_network(semantic_encoder_layers(n.shape.code_dim(), n.arch, n.shape.source_dim), 1);
  CHECK_THROWS_AS(decode(no_sigmoid, frames, n.shape), ConfigError);
}

TEST_CASE("jamming sources") {
  Rng a = make_stream(4, Stream::gauss), b = make_stream(4, Stream::gauss);
  const Vector g = sample_gauss(100, 100, 10, a);
  CHECK(g == sample_gauss(100, 100, 10, b));
  const double mean = g.mean();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs((g.array() - mean).square().mean() - 1.0) < 0.03);

  const TextCorpus corpus = TextCorpus::from_text("the quick brown fox jumps over the lazy dog again", 16);
  REQUIRE(corpus.tokens.size() == 10);
  CHECK(corpus.tokens[0] == corpus.tokens[6]);
  CHECK(corpus.tokens[0] == token_bucket("the", 16));
  Rng r1 = make_stream(5, Stream::text), r2 = make_stream(5, Stream::text);
  for (int i = 0; i < 200; ++i) {
    const TextSample s = sample_text(corpus, r1, 4);
    CHECK(s.token_ids == sample_text(corpus, r2, 4).token_ids);
    for (int id : s.token_ids) CHECK((id >= 0 && id < 16));
  }
  CHECK_THROWS(sample_text(corpus, r1, 11));
}

TEST_CASE("bundled corpus loads") {
  const TextCorpus corpus = TextCorpus::from_file(default_corpus_path(), 1024);
  CHECK(corpus.tokens.size() > 1000);
}

TEST_CASE("synthetic images stay in the unit range") {
  Rng rng = make_stream(6, Stream::dataset);
  const ImageSet set = make_synthetic_images(20, 16, 16, 3, rng);
  CHECK_NOTHROW(set.validate());
  CHECK(set.size() == 20);
  CHECK(set.slice(5, 10).size() == 10);
  CHECK_THROWS(set.slice(15, 10));
  const Vector m = mean_image(set);
  CHECK(m.size() == set.dim());
  CHECK((m - set.pixels.rowwise().mean()).norm() < 1e-12);
}

TEST_CASE("flat u8 loader") {
  const auto path = std::filesystem::temp_directory_path() / "semsec_flat_u8_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < 2 * 12; ++i) out.put(static_cast<char>(i == 0 ? 255 : i));
  }
  const ImageSet set = load_flat_u8(path.string(), 2, 2, 3);
  CHECK(set.size() == 2);
  CHECK(set.pixels(0, 0) == doctest::Approx(1.0));
  CHECK(set.pixels(1, 1) == doctest::Approx(13.0 / 255.0));
  std::filesystem::remove(path);
}

// ---------------------------------------------------------------------------

TEST_CASE("reshape action") {
  Vector a = Vector::Zero(48);
  const Matrix eye = Matrix::Identity(4, 4);
  for (Index r = 0; r < 4; ++r) a[r * 4 + r] = 1.0;
  const PrecoderSet v = reshape_action(a, 4, 4);
  CHECK(v.v1 == eye);
  CHECK(v.v2.isZero(0.0));
  CHECK(v.v3.isZero(0.0));

  Vector seq = Vector::LinSpaced(48, 0, 47);
  const PrecoderSet s = reshape_action(seq, 4, 4);
  CHECK(s.v1(0, 1) == 1.0);  // row-major within a block
  CHECK(s.v2(0, 0) == 16.0);
  CHECK(s.v3(3, 3) == 47.0);
  CHECK(flatten(s) == seq);
  CHECK_THROWS_AS(reshape_action(Vector(Vector::Zero(47)), 4, 4), ShapeError);
}

TEST_CASE("superposition") {
  Rng rng = make_stream(7, Stream::data);
  const Matrix s1 = oracle::gaussian(4, 8, rng), s2 = oracle::gaussian(4, 8, rng), s3 = oracle::gaussian(4, 8, rng);
  CHECK(superpose(s1, s2, s3, PrecoderSet::semantic_only(4)) == s1);
  const PrecoderSet v = reshape_action(Vector(oracle::gaussian(48, 1, rng)), 4, 4);
  const Matrix zero = Matrix::Zero(4, 8);
  CHECK((superpose(s1, zero, zero, v) - v.v1 * s1).norm() < 1e-12);

  const Matrix expect =
      oracle::naive_matmul(v.v1, s1) + oracle::naive_matmul(v.v2, s2) + oracle::naive_matmul(v.v3, s3);
  CHECK((superpose(s1, s2, s3, v) - expect).norm() < 1e-12);

  const double alpha = -2.5;
  CHECK((superpose(Matrix(alpha * s1), s2, s3, v) -
         (alpha * v.v1 * s1 + v.v2 * s2 + v.v3 * s3)).norm() < 1e-12);
  CHECK_THROWS_AS(superpose(s1, Matrix(Matrix::Zero(4, 7)), s3, v), ShapeError);
}

TEST_CASE("batched superposition agrees with per-frame form") {
  Rng rng = make_stream(8, Stream::data);
  const CodeShape shape = code_shape(1, 32, 32, 3, 4);
  const Matrix s1 = oracle::gaussian(32, 3, rng), s2 = oracle::gaussian(32, 3, rng), s3 = oracle::gaussian(32, 3, rng);
  const PrecoderSet v = reshape_action(Vector(oracle::gaussian(48, 1, rng)), 4, 4);
  const Matrix y = superpose_batch(s1, &s2, &s3, v);
  for (Index i = 0; i < 3; ++i) {
    const Matrix yi = superpose(frame(s1, i, shape), frame(s2, i, shape), frame(s3, i, shape), v);
    CHECK((frame(y, i, shape) - yi).norm() < 1e-12);
  }
  const Matrix y1 = superpose_batch(s1, nullptr, nullptr, v);
  CHECK((frame(y1, 0, shape) - v.v1 * frame(s1, 0, shape)).norm() < 1e-12);
}

TEST_CASE("gradient through superposition is V1 transpose times the upstream gradient") {
  Rng rng = make_stream(9, Stream::data);
  const Matrix s1 = oracle::gaussian(8, 1, rng);  // one 4 x 2 frame
  const Matrix target = oracle::gaussian(8, 1, rng);
  const PrecoderSet v = reshape_action(Vector(oracle::gaussian(48, 1, rng)), 4, 4);
  auto loss = [&](const Matrix& s) {
    return (superpose_batch(s, nullptr, nullptr, v) - target).squaredNorm() / 8.0;
  };
  const Matrix upstream = 2.0 * (superpose_batch(s1, nullptr, nullptr, v) - target) / 8.0;
  const Matrix analytic = superpose_backward(upstream, v.v1, 4);
  Vector flat = s1.reshaped();
  const Vector num = oracle::central_difference([&] { return loss(Matrix(flat)); }, flat, 1e-6);
  CHECK(oracle::relative_error(analytic.reshaped(), num) < 1e-6);
}
