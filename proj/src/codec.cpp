#include "semsec/codec.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace semsec {

CodeShape code_shape(int cu, int height, int width, int channels, int n_m) {
  if (cu < 1) throw ConfigError("CU must be >= 1");
  if (height <= 0 || width <= 0 || channels <= 0 || n_m <= 0) throw ConfigError("image and antenna dims must be positive");
  const Index source = static_cast<Index>(height) * width * channels;
  const Index unit = 96 * static_cast<Index>(n_m);
  if (source % unit != 0) {
    throw ConfigError("H*W*C = " + std::to_string(source) + " is not divisible by 96*N_m = " + std::to_string(unit));
  }
  CodeShape s;
  s.cu = cu;
  s.l_c = cu * source / unit;
  s.n_antennas = n_m;
  s.source_dim = source;
  return s;
}

void ImageSet::validate() const {
  if (height <= 0 || width <= 0 || channels <= 0) throw ConfigError("image dims must be positive");
  if (pixels.rows() != dim()) throw ShapeError("image rows do not match H*W*C");
  if (!pixels.allFinite() || (pixels.size() > 0 && (pixels.minCoeff() < 0.0 || pixels.maxCoeff() > 1.0))) {
    throw ConfigError("image pixels must lie in [0, 1]");
  }
}

ImageSet ImageSet::slice(Index first, Index count) const {
  if (first < 0 || count < 0 || first + count > size()) throw ShapeError("image slice out of range");
  return {height, width, channels, pixels.middleCols(first, count)};
}

ImageSet make_synthetic_images(Index count, int height, int width, int channels, Rng& rng) {
  constexpr int kFreqs = 4;
  std::normal_distribution<double> normal(0.0, 1.0);
  ImageSet set{height, width, channels, Matrix(static_cast<Index>(height) * width * channels, count)};

  // Separable cosine bases, precomputed per axis.
  Matrix bx(kFreqs, width), by(kFreqs, height);
  for (int u = 0; u < kFreqs; ++u) {
    for (int x = 0; x < width; ++x) bx(u, x) = std::cos(std::numbers::pi * u * (x + 0.5) / width);
    for (int y = 0; y < height; ++y) by(u, y) = std::cos(std::numbers::pi * u * (y + 0.5) / height);
  }

  Matrix lum(kFreqs, kFreqs);
  Matrix chroma(channels, 2);
  Vector tint(channels);
  for (Index n = 0; n < count; ++n) {
    for (int u = 0; u < kFreqs; ++u)
      for (int v = 0; v < kFreqs; ++v) lum(u, v) = normal(rng) / std::sqrt(1.0 + u * u + v * v);
    for (int c = 0; c < channels; ++c) {
      tint[c] = 0.4 * normal(rng);
      chroma(c, 0) = 0.3 * normal(rng);
      chroma(c, 1) = 0.3 * normal(rng);
    }
    auto img = set.pixels.col(n);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double l = 0.0;
        for (int u = 0; u < kFreqs; ++u)
          for (int v = 0; v < kFreqs; ++v) l += lum(u, v) * bx(u, x) * by(v, y);
        for (int c = 0; c < channels; ++c) {
          const double z = 1.6 * l + tint[c] + chroma(c, 0) * bx(1, x) + chroma(c, 1) * by(1, y);
          img[(static_cast<Index>(y) * width + x) * channels + c] = 1.0 / (1.0 + std::exp(-z));
        }
      }
    }
  }
  return set;
}

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageSet load_flat_u8(const std::string& path, int height, int width, int channels, Index max_count) {
  const auto bytes = read_all(path);
  const Index dim = static_cast<Index>(height) * width * channels;
  if (dim <= 0 || bytes.size() % static_cast<std::size_t>(dim) != 0) {
    throw ConfigError(path + ": size is not a multiple of H*W*C = " + std::to_string(dim));
  }
  Index n = static_cast<Index>(bytes.size()) / dim;
  if (max_count >= 0) n = std::min(n, max_count);
  ImageSet set{height, width, channels, Matrix(dim, n)};
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < dim; ++k) set.pixels(k, i) = bytes[static_cast<std::size_t>(i * dim + k)] / 255.0;
  return set;
}

ImageSet load_cifar10_bin(const std::string& path, Index max_count) {
  constexpr int kSide = 32, kChannels = 3;
  constexpr Index kPlane = kSide * kSide, kRecord = 1 + kPlane * kChannels;
  const auto bytes = read_all(path);
  if (bytes.size() % kRecord != 0) throw ConfigError(path + ": not a CIFAR-10 binary batch");
  Index n = static_cast<Index>(bytes.size()) / kRecord;
  if (max_count >= 0) n = std::min(n, max_count);
  ImageSet set{kSide, kSide, kChannels, Matrix(kPlane * kChannels, n)};
  for (Index i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kRecord + 1;
    for (Index c = 0; c < kChannels; ++c)
      for (Index p = 0; p < kPlane; ++p) set.pixels(p * kChannels + c, i) = rec[c * kPlane + p] / 255.0;
  }
  return set;
}

Vector mean_image(const ImageSet& set) {
  if (set.size() == 0) throw ShapeError("mean of an empty image set");
  return set.pixels.rowwise().mean();
}

int token_bucket(const std::string& word, int vocab) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : word) {
    h ^= static_cast<std::uint64_t>(ch);
    h *= 0x100000001b3ULL;
  }
  return static_cast<int>(h % static_cast<std::uint64_t>(vocab));
}

TextCorpus TextCorpus::from_text(const std::string& text, int vocab) {
  if (vocab <= 0) throw ConfigError("vocabulary size must be positive");
  TextCorpus corpus;
  corpus.vocab = vocab;
  std::istringstream words(text);
  std::string w;
  while (words >> w) corpus.tokens.push_back(token_bucket(w, vocab));
  return corpus;
}

TextCorpus TextCorpus::from_file(const std::string& path, int vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), vocab);
}

std::string default_corpus_path() { return std::string(SEMSEC_DATA_DIR) + "/corpus.txt"; }

TextSample sample_text(const TextCorpus& corpus, Rng& rng, int length) {
  if (corpus.tokens.empty()) throw ConfigError("text corpus is empty");
  if (length <= 0 || static_cast<std::size_t>(length) > corpus.tokens.size()) {
    throw ConfigError("corpus has " + std::to_string(corpus.tokens.size()) + " tokens, fewer than the window length " +
                      std::to_string(length));
  }
  std::uniform_int_distribution<std::size_t> start(0, corpus.tokens.size() - static_cast<std::size_t>(length));
  const auto s = start(rng);
  return {std::vector<int>(corpus.tokens.begin() + static_cast<std::ptrdiff_t>(s),
                           corpus.tokens.begin() + static_cast<std::ptrdiff_t>(s) + length)};
}

Matrix sample_text_batch(const TextCorpus& corpus, Rng& rng, int length, Index batch) {
  Matrix ids(length, batch);
  for (Index b = 0; b < batch; ++b) {
    const auto sample = sample_text(corpus, rng, length);
    for (int t = 0; t < length; ++t) ids(t, b) = sample.token_ids[static_cast<std::size_t>(t)];
  }
  return ids;
}

Vector sample_gauss(int height, int width, int channels, Rng& rng) {
  return sample_gauss_batch(static_cast<Index>(height) * width * channels, 1, rng).col(0);
}

Matrix sample_gauss_batch(Index dim, Index batch, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(dim, batch);
  for (Index c = 0; c < batch; ++c)
    for (Index r = 0; r < dim; ++r) g(r, c) = normal(rng);
  return g;
}

std::vector<nn::LayerSpec> semantic_encoder_layers(Index source_dim, const CodecArch& arch, Index code_dim) {
  using nn::LayerSpec;
  return {LayerSpec::dense(source_dim, arch.encoder_hidden), LayerSpec::relu(arch.encoder_hidden),
          LayerSpec::dense(arch.encoder_hidden, code_dim)};
}

std::vector<nn::LayerSpec> text_jammer_layers(const CodecArch& arch, Index code_dim) {
  using nn::LayerSpec;
  const Index text_dim = arch.embed_dim * arch.text_len;
  return {LayerSpec::embedding(arch.vocab, arch.embed_dim, arch.text_len), LayerSpec::dense(text_dim, arch.text_hidden),
          LayerSpec::relu(arch.text_hidden), LayerSpec::dense(arch.text_hidden, code_dim)};
}

std::vector<nn::LayerSpec> gauss_jammer_layers(Index source_dim, const CodecArch& arch, Index code_dim) {
  using nn::LayerSpec;
  return {LayerSpec::dense(source_dim, arch.gauss_hidden), LayerSpec::relu(arch.gauss_hidden),
          LayerSpec::dense(arch.gauss_hidden, code_dim)};
}

std::vector<nn::LayerSpec> decoder_layers(Index code_dim, const CodecArch& arch, Index source_dim) {
  using nn::LayerSpec;
  return {LayerSpec::dense(code_dim, arch.decoder_hidden), LayerSpec::relu(arch.decoder_hidden),
          LayerSpec::dense(arch.decoder_hidden, source_dim), LayerSpec::sigmoid(source_dim)};
}

namespace {

Matrix encode_checked(nn::Network& net, const Matrix& input, const CodeShape& shape, const char* what) {
  if (net.output_size() != shape.code_dim()) {
    throw ShapeError(std::string(what) + " emits " + std::to_string(net.output_size()) + " values per item, frame needs " +
                     std::to_string(shape.code_dim()));
  }
  Matrix out = net.forward(input);
  if (!out.allFinite()) throw NumericalError(std::string(what) + " produced non-finite output");
  return out;
}

}  // namespace

Matrix semantic_encode(nn::Network& net, const Matrix& images, const CodeShape& shape) {
  return encode_checked(net, images, shape, "semantic encoder");
}

Matrix text_jam_encode(nn::Network& net, const Matrix& token_ids, const CodeShape& shape) {
  return encode_checked(net, token_ids, shape, "text jamming encoder");
}

Matrix gauss_jam_encode(nn::Network& net, const Matrix& gauss, const CodeShape& shape) {
  return encode_checked(net, gauss, shape, "gaussian jamming encoder");
}

Matrix decode(nn::Network& net, const Matrix& frames, const CodeShape& shape) {
  if (net.input_size() != shape.code_dim()) {
    throw ShapeError("decoder expects " + std::to_string(net.input_size()) + " values per frame, got " +
                     std::to_string(shape.code_dim()));
  }
  if (net.layers().empty() || net.layers().back().kind != nn::LayerKind::sigmoid) {
    throw ConfigError("decoder must end in a sigmoid layer");
  }
  return net.forward(frames);
}

}  // namespace semsec
