#pragma once

#include "semsec/types.hpp"

#include <cmath>
#include <ostream>
#include <random>

// Real-valued MIMO Rayleigh wiretap channel. Frames are antennas x channel
// uses; the channel matrix maps N_m transmit antennas onto N_n receive ones.
namespace semsec {

struct ChannelConfig {
  int n_m = 4;
  int n_n = 4;
  double power = 1.0;
  double snr_leg_db = 10.0;
  double snr_eve_db = 10.0;

  void validate() const {
    if (n_m <= 0 || n_n <= 0) throw ConfigError("antenna counts must be positive");
    if (n_m != n_n) throw ConfigError("transmit and receive antenna counts must match (n_m == n_n)");
    if (!(power > 0.0) || !std::isfinite(power)) throw ConfigError("transmit power must be > 0");
    if (!std::isfinite(snr_leg_db) || !std::isfinite(snr_eve_db)) throw ConfigError("SNR must be finite");
  }
};

/// i.i.d. standard-normal N_n x N_m channel matrix.
template <typename Scalar = double, typename Urbg>
MatrixX<Scalar> sample_channel(const ChannelConfig& cfg, Urbg& rng) {
  cfg.validate();
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  MatrixX<Scalar> h(cfg.n_n, cfg.n_m);
  for (Index c = 0; c < h.cols(); ++c)
    for (Index r = 0; r < h.rows(); ++r) h(r, c) = normal(rng);
  return h;
}

// SNR = 10 log10(P / sigma^2)
template <typename Scalar>
Scalar snr_to_sigma2(Scalar snr_db, Scalar power) {
  if (!(power > Scalar(0))) throw ConfigError("transmit power must be > 0");
  return power / std::pow(Scalar(10), snr_db / Scalar(10));
}

inline constexpr double kDegenerateFrameNorm = 1e-12;

/// Scales a frame so that its mean per-entry energy equals `power` exactly.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_power(const Eigen::MatrixBase<Derived>& y,
                                                  typename Derived::Scalar power) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = y.norm();
  if (!(norm >= Scalar(kDegenerateFrameNorm))) throw NumericalError("degenerate frame: Frobenius norm below 1e-12");
  const Scalar target = std::sqrt(power * static_cast<Scalar>(y.size()));
  return (target / norm) * y;
}

/// Vector-Jacobian product of normalize_power at `y`.
template <typename DerivedY, typename DerivedG>
MatrixX<typename DerivedY::Scalar> normalize_power_backward(const Eigen::MatrixBase<DerivedY>& y,
                                                            typename DerivedY::Scalar power,
                                                            const Eigen::MatrixBase<DerivedG>& grad_out) {
  using Scalar = typename DerivedY::Scalar;
  const Scalar norm = y.norm();
  if (!(norm >= Scalar(kDegenerateFrameNorm))) throw NumericalError("degenerate frame: Frobenius norm below 1e-12");
  const Scalar target = std::sqrt(power * static_cast<Scalar>(y.size()));
  const Scalar along = y.cwiseProduct(grad_out).sum() / (norm * norm);
  return (target / norm) * (grad_out - along * y);
}

template <typename DerivedY, typename DerivedH, typename DerivedN>
MatrixX<typename DerivedY::Scalar> transmit_with_noise(const Eigen::MatrixBase<DerivedY>& y,
                                                       const Eigen::MatrixBase<DerivedH>& h,
                                                       const Eigen::MatrixBase<DerivedN>& noise) {
  if (h.cols() != y.rows()) {
    throw ShapeError("channel is " + shape_str(h.rows(), h.cols()) + " but frame has " + std::to_string(y.rows()) +
                     " antennas");
  }
  if (noise.rows() != h.rows() || noise.cols() != y.cols()) throw ShapeError("noise shape mismatch");
  return h * y + noise;
}

/// H * Y + N with N ~ N(0, sigma2) i.i.d.
template <typename DerivedY, typename DerivedH, typename Urbg>
MatrixX<typename DerivedY::Scalar> transmit(const Eigen::MatrixBase<DerivedY>& y, const Eigen::MatrixBase<DerivedH>& h,
                                            typename DerivedY::Scalar sigma2, Urbg& rng) {
  using Scalar = typename DerivedY::Scalar;
  if (h.cols() != y.rows()) {
    throw ShapeError("channel is " + shape_str(h.rows(), h.cols()) + " but frame has " + std::to_string(y.rows()) +
                     " antennas");
  }
  if (sigma2 < Scalar(0)) throw ConfigError("noise variance must be >= 0");
  MatrixX<Scalar> out = h * y;
  if (sigma2 > Scalar(0)) {
    std::normal_distribution<Scalar> normal(Scalar(0), std::sqrt(sigma2));
    for (Index c = 0; c < out.cols(); ++c)
      for (Index r = 0; r < out.rows(); ++r) out(r, c) += normal(rng);
  }
  return out;
}

/// The linear MMSE operator H^T (H H^T + (sigma2/P) I)^-1, formed with a
/// Cholesky-type solve of the regularized Gram matrix.
template <typename DerivedH>
MatrixX<typename DerivedH::Scalar> mmse_operator(const Eigen::MatrixBase<DerivedH>& h, typename DerivedH::Scalar sigma2,
                                                 typename DerivedH::Scalar power) {
  using Scalar = typename DerivedH::Scalar;
  if (sigma2 < Scalar(0)) throw ConfigError("noise variance must be >= 0");
  if (!(power > Scalar(0))) throw ConfigError("transmit power must be > 0");
  MatrixX<Scalar> gram = h * h.transpose();
  gram.diagonal().array() += sigma2 / power;
  Eigen::LDLT<MatrixX<Scalar>> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > Scalar(1e-14))) {
    throw NumericalError("MMSE Gram matrix is singular");
  }
  // Gram is symmetric, so (Gram^-1 H)^T = H^T Gram^-1.
  return ldlt.solve(MatrixX<Scalar>(h)).transpose();
}

template <typename DerivedY, typename DerivedH>
MatrixX<typename DerivedY::Scalar> mmse_equalize(const Eigen::MatrixBase<DerivedY>& y_recv,
                                                 const Eigen::MatrixBase<DerivedH>& h_hat,
                                                 typename DerivedY::Scalar sigma2, typename DerivedY::Scalar power) {
  if (y_recv.rows() != h_hat.rows()) {
    throw ShapeError("received frame has " + std::to_string(y_recv.rows()) + " rows, channel has " +
                     std::to_string(h_hat.rows()));
  }
  return mmse_operator(h_hat, sigma2, power) * y_recv;
}

/// Right singular vectors of H (columns by descending singular value).
template <typename DerivedH>
MatrixX<typename DerivedH::Scalar> svd_precoder(const Eigen::MatrixBase<DerivedH>& h) {
  using Scalar = typename DerivedH::Scalar;
  if (!h.allFinite()) throw NumericalError("SVD of a non-finite channel");
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed");
  return svd.matrixV();
}

// Debug dump, one line per entry: frame_id,row,col,value
template <typename DerivedH>
void write_channel_csv(std::ostream& out, long frame_id, const Eigen::MatrixBase<DerivedH>& h) {
  for (Index r = 0; r < h.rows(); ++r)
    for (Index c = 0; c < h.cols(); ++c) out << frame_id << ',' << r << ',' << c << ',' << h(r, c) << '\n';
}

}  // namespace semsec
