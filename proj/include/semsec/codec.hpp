#pragma once

#include "semsec/nn.hpp"
#include "semsec/rng.hpp"
#include "semsec/types.hpp"

#include <string>
#include <vector>

namespace semsec {

// Channel uses per frame follow from the compression knob CU:
//   L_c = CU * H*W*C / (96 * N_m),  CR = N_m * L_c / (H*W*C) = CU / 96.
struct CodeShape {
  int cu = 1;
  Index l_c = 0;
  Index n_antennas = 0;
  Index source_dim = 0;

  double cr() const { return static_cast<double>(cu) / 96.0; }
  Index code_dim() const { return n_antennas * l_c; }
};

CodeShape code_shape(int cu, int height, int width, int channels, int n_m);

/// Images stored one per column, each flattened in H, W, C order with values
/// in [0, 1].
struct ImageSet {
  int height = 0;
  int width = 0;
  int channels = 0;
  Matrix pixels;

  Index dim() const { return static_cast<Index>(height) * width * channels; }
  Index size() const { return pixels.cols(); }
  void validate() const;
  ImageSet slice(Index first, Index count) const;
};

// Smoothed random fields: a low-frequency cosine luminance field plus a
// per-channel tint, squashed into (0, 1).
ImageSet make_synthetic_images(Index count, int height, int width, int channels, Rng& rng);

// Flat binary: back-to-back records of H*W*C unsigned bytes in H, W, C order.
ImageSet load_flat_u8(const std::string& path, int height, int width, int channels, Index max_count = -1);
// CIFAR-10 binary batches: 1 label byte then 3072 bytes in C, H, W order.
ImageSet load_cifar10_bin(const std::string& path, Index max_count = -1);

/// Per-pixel mean image over a set (the constant-mean predictor).
Vector mean_image(const ImageSet& set);

// Whitespace-tokenized text with FNV-1a hash buckets as vocabulary.
struct TextCorpus {
  std::vector<int> tokens;
  int vocab = 1024;

  static TextCorpus from_text(const std::string& text, int vocab);
  static TextCorpus from_file(const std::string& path, int vocab);
};

int token_bucket(const std::string& word, int vocab);

std::string default_corpus_path();

struct TextSample {
  std::vector<int> token_ids;
};

// Uniformly placed window of `length` consecutive tokens.
TextSample sample_text(const TextCorpus& corpus, Rng& rng, int length);
// Token ids of `batch` windows, one window per column.
Matrix sample_text_batch(const TextCorpus& corpus, Rng& rng, int length, Index batch);

Vector sample_gauss(int height, int width, int channels, Rng& rng);
Matrix sample_gauss_batch(Index dim, Index batch, Rng& rng);

// Network shapes for the five codec networks. Hidden widths are configurable.
struct CodecArch {
  Index encoder_hidden = 256;
  Index decoder_hidden = 256;
  Index text_hidden = 64;
  Index gauss_hidden = 64;
  Index embed_dim = 16;
  int text_len = 16;
  int vocab = 1024;
};

std::vector<nn::LayerSpec> semantic_encoder_layers(Index source_dim, const CodecArch& arch, Index code_dim);
std::vector<nn::LayerSpec> text_jammer_layers(const CodecArch& arch, Index code_dim);
std::vector<nn::LayerSpec> gauss_jammer_layers(Index source_dim, const CodecArch& arch, Index code_dim);
std::vector<nn::LayerSpec> decoder_layers(Index code_dim, const CodecArch& arch, Index source_dim);

// Encoders return one flattened N_n x L_c frame per column.
Matrix semantic_encode(nn::Network& net, const Matrix& images, const CodeShape& shape);
Matrix text_jam_encode(nn::Network& net, const Matrix& token_ids, const CodeShape& shape);
Matrix gauss_jam_encode(nn::Network& net, const Matrix& gauss, const CodeShape& shape);

/// Reconstructs images from equalized frames; the decoder must end in a
/// sigmoid so every output lies in [0, 1].
Matrix decode(nn::Network& net, const Matrix& frames, const CodeShape& shape);

/// View of frame `item` of a code matrix as N_n x L_c.
inline Eigen::Map<const Matrix> frame(const Matrix& codes, Index item, const CodeShape& shape) {
  return {codes.col(item).data(), shape.n_antennas, shape.l_c};
}

}  // namespace semsec
