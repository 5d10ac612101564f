#pragma once

#include "semsec/types.hpp"

// Precoding and superposition of the semantic stream with the two jamming
// streams: Y = V1 S1 + V2 S2 + V3 S3.
namespace semsec {

template <typename Scalar>
struct PrecoderSetT {
  MatrixX<Scalar> v1;
  MatrixX<Scalar> v2;
  MatrixX<Scalar> v3;

  static PrecoderSetT identity_sum(Index n) {
    return {MatrixX<Scalar>::Identity(n, n), MatrixX<Scalar>::Identity(n, n), MatrixX<Scalar>::Identity(n, n)};
  }
  static PrecoderSetT semantic_only(Index n) {
    return {MatrixX<Scalar>::Identity(n, n), MatrixX<Scalar>::Zero(n, n), MatrixX<Scalar>::Zero(n, n)};
  }

  Index n_m() const { return v1.rows(); }
  Index n_n() const { return v1.cols(); }
};

using PrecoderSet = PrecoderSetT<double>;

/// Splits a flat action of length 3 N_m N_n into (V1, V2, V3); blocks are
/// consecutive and each block is row-major.
template <typename Derived>
PrecoderSetT<typename Derived::Scalar> reshape_action(const Eigen::MatrixBase<Derived>& action, Index n_m, Index n_n) {
  using Scalar = typename Derived::Scalar;
  const Index block = n_m * n_n;
  if (action.size() != 3 * block) {
    throw ShapeError("action has length " + std::to_string(action.size()) + ", expected " + std::to_string(3 * block));
  }
  auto take = [&](Index k) {
    MatrixX<Scalar> v(n_m, n_n);
    for (Index r = 0; r < n_m; ++r)
      for (Index c = 0; c < n_n; ++c) v(r, c) = action(k * block + r * n_n + c);
    return v;
  };
  return {take(0), take(1), take(2)};
}

template <typename Scalar>
VectorX<Scalar> flatten(const PrecoderSetT<Scalar>& v) {
  const Index n_m = v.n_m(), n_n = v.n_n(), block = n_m * n_n;
  VectorX<Scalar> out(3 * block);
  const MatrixX<Scalar>* parts[3] = {&v.v1, &v.v2, &v.v3};
  for (Index k = 0; k < 3; ++k)
    for (Index r = 0; r < n_m; ++r)
      for (Index c = 0; c < n_n; ++c) out(k * block + r * n_n + c) = (*parts[k])(r, c);
  return out;
}

/// Single-frame superposition of three N_n x L_c streams.
template <typename D1, typename D2, typename D3, typename Scalar>
MatrixX<Scalar> superpose(const Eigen::MatrixBase<D1>& s1, const Eigen::MatrixBase<D2>& s2,
                          const Eigen::MatrixBase<D3>& s3, const PrecoderSetT<Scalar>& v) {
  if (s1.rows() != v.n_n() || s2.rows() != v.n_n() || s3.rows() != v.n_n() || s2.cols() != s1.cols() ||
      s3.cols() != s1.cols()) {
    throw ShapeError("streams must all be " + shape_str(v.n_n(), s1.cols()));
  }
  MatrixX<Scalar> y = v.v1 * s1;
  y.noalias() += v.v2 * s2;
  y.noalias() += v.v3 * s3;
  return y;
}

// Batched form. Each column of a code matrix is one frame stored
// column-major (N_n x L_c), so the whole batch is an N_n x (L_c * batch) view.
inline Eigen::Map<const Matrix> frames_view(const Matrix& codes, Index antennas) {
  return {codes.data(), antennas, codes.size() / antennas};
}
inline Eigen::Map<Matrix> frames_view(Matrix& codes, Index antennas) {
  return {codes.data(), antennas, codes.size() / antennas};
}

/// Batched superposition over code matrices of shape (N_n L_c) x batch.
/// Null jamming streams are treated as zero.
inline Matrix superpose_batch(const Matrix& s1, const Matrix* s2, const Matrix* s3, const PrecoderSet& v) {
  const Index n_n = v.n_n(), n_m = v.n_m();
  if (s1.rows() % n_n != 0) throw ShapeError("code length is not a multiple of the antenna count");
  const Index l_c = s1.rows() / n_n;
  for (const Matrix* s : {s2, s3}) {
    if (s && (s->rows() != s1.rows() || s->cols() != s1.cols())) throw ShapeError("jamming stream shape mismatch");
  }
  Matrix y(n_m * l_c, s1.cols());
  auto yv = frames_view(y, n_m);
  yv.noalias() = v.v1 * frames_view(s1, n_n);
  if (s2) yv.noalias() += v.v2 * frames_view(*s2, n_n);
  if (s3) yv.noalias() += v.v3 * frames_view(*s3, n_n);
  return y;
}

/// Gradient of superpose_batch with respect to stream i given dL/dY.
inline Matrix superpose_backward(const Matrix& grad_y, const Matrix& v_i, Index n_n) {
  const Index n_m = v_i.rows();
  const Index l_c = grad_y.rows() / n_m;
  Matrix g(n_n * l_c, grad_y.cols());
  frames_view(g, n_n).noalias() = v_i.transpose() * frames_view(grad_y, n_m);
  return g;
}

}  // namespace semsec
