#include "semsec/nn.hpp"

#include "semsec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace semsec::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh: return "tanh";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::reshape: return "reshape";
    case LayerKind::embedding: return "embedding";
  }
  return "unknown";
}

Index LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::dense: return in * out + out;
    case LayerKind::embedding: return vocab * (in > 0 ? out / in : 0);
    default: return 0;
  }
}

void validate(std::span<const LayerSpec> spec) {
  if (spec.empty()) throw ConfigError("network spec is empty");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto& l = spec[i];
    if (l.in <= 0 || l.out <= 0) {
      throw ConfigError("layer " + std::to_string(i) + " (" + to_string(l.kind) + ") has non-positive size");
    }
    switch (l.kind) {
      case LayerKind::dense: break;
      case LayerKind::embedding:
        if (l.vocab <= 0 || l.out % l.in != 0) {
          throw ConfigError("layer " + std::to_string(i) + ": malformed embedding");
        }
        break;
      default:
        if (l.in != l.out) {
          throw ConfigError("layer " + std::to_string(i) + " (" + to_string(l.kind) + ") must preserve shape");
        }
    }
    if (i > 0 && spec[i - 1].out != l.in) {
      throw ConfigError("layer " + std::to_string(i) + " expects " + std::to_string(l.in) + " inputs but layer " +
                        std::to_string(i - 1) + " produces " + std::to_string(spec[i - 1].out));
    }
  }
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
}

Network::Network(std::vector<LayerSpec> spec) : layers_(std::move(spec)) {
  validate(layers_);
  offsets_.reserve(layers_.size());
  Index total = 0;
  for (const auto& l : layers_) {
    offsets_.push_back(total);
    total += l.param_count();
  }
  params_ = Vector::Zero(total);
  grads_ = Vector::Zero(total);
  reset_optimizer();
}

void Network::reset_optimizer() {
  opt_.m = Vector::Zero(params_.size());
  opt_.v = Vector::Zero(params_.size());
  opt_.step = 0;
}

Eigen::Map<Matrix> Network::weight(std::size_t layer) {
  const auto& l = layers_.at(layer);
  if (l.kind == LayerKind::dense) return {params_.data() + offsets_[layer], l.out, l.in};
  if (l.kind == LayerKind::embedding) return {params_.data() + offsets_[layer], l.out / l.in, l.vocab};
  throw StateError(std::string("layer kind ") + to_string(l.kind) + " has no weights");
}

Eigen::Map<Vector> Network::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  if (l.kind != LayerKind::dense) throw StateError("only dense layers have a bias");
  return {params_.data() + offsets_[layer] + l.in * l.out, l.out};
}

namespace {

Index token_id(double v, Index vocab) {
  const double r = std::round(v);
  if (r != v || r < 0.0 || r >= static_cast<double>(vocab)) {
    throw ShapeError("embedding input " + std::to_string(v) + " is not a token id below " + std::to_string(vocab));
  }
  return static_cast<Index>(r);
}

}  // namespace

Matrix Network::forward(const Matrix& input) {
  if (layers_.empty()) throw StateError("forward on an empty network");
  if (input.rows() != input_size()) {
    throw ShapeError("network expects " + std::to_string(input_size()) + " input features, got " +
                     std::to_string(input.rows()));
  }
  if (!input.allFinite()) throw NumericalError("non-finite network input");

  cache_.resize(layers_.size() + 1);
  cache_[0] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const Matrix& x = cache_[i];
    Matrix& y = cache_[i + 1];
    switch (l.kind) {
      case LayerKind::dense: {
        Eigen::Map<const Matrix> w(params_.data() + offsets_[i], l.out, l.in);
        Eigen::Map<const Vector> b(params_.data() + offsets_[i] + l.in * l.out, l.out);
        y.resize(l.out, x.cols());
        y.noalias() = w * x;
        y.colwise() += b;
        break;
      }
      case LayerKind::relu: y = x.cwiseMax(0.0); break;
      case LayerKind::tanh: y = x.array().tanh().matrix(); break;
      case LayerKind::sigmoid: y = (1.0 / (1.0 + (-x.array()).exp())).matrix(); break;
      case LayerKind::reshape: y = x; break;
      case LayerKind::embedding: {
        const Index dim = l.out / l.in;
        Eigen::Map<const Matrix> table(params_.data() + offsets_[i], dim, l.vocab);
        y.resize(l.out, x.cols());
        for (Index c = 0; c < x.cols(); ++c) {
          for (Index t = 0; t < l.in; ++t) y.col(c).segment(t * dim, dim) = table.col(token_id(x(t, c), l.vocab));
        }
        break;
      }
    }
  }
  has_cache_ = true;
  return cache_.back();
}

Matrix Network::backward(const Matrix& output_grad) {
  if (!has_cache_) throw StateError("backward called without a prior forward");
  const Matrix& out = cache_.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw ShapeError("output gradient is " + shape_str(output_grad.rows(), output_grad.cols()) + ", expected " +
                     shape_str(out.rows(), out.cols()));
  }

  Matrix g = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    const Matrix& x = cache_[k];
    const Matrix& y = cache_[k + 1];
    switch (l.kind) {
      case LayerKind::dense: {
        Eigen::Map<const Matrix> w(params_.data() + offsets_[k], l.out, l.in);
        if (trainable_) {
          Eigen::Map<Matrix> gw(grads_.data() + offsets_[k], l.out, l.in);
          Eigen::Map<Vector> gb(grads_.data() + offsets_[k] + l.in * l.out, l.out);
          gw.noalias() += g * x.transpose();
          gb += g.rowwise().sum();
        }
        Matrix gin(l.in, g.cols());
        gin.noalias() = w.transpose() * g;
        g.swap(gin);
        break;
      }
      case LayerKind::relu: g = (x.array() > 0.0).select(g, 0.0); break;
      case LayerKind::tanh: g.array() *= 1.0 - y.array().square(); break;
      case LayerKind::sigmoid: g.array() *= y.array() * (1.0 - y.array()); break;
      case LayerKind::reshape: break;
      case LayerKind::embedding: {
        const Index dim = l.out / l.in;
        if (trainable_) {
          Eigen::Map<Matrix> gt(grads_.data() + offsets_[k], dim, l.vocab);
          for (Index c = 0; c < x.cols(); ++c) {
            for (Index t = 0; t < l.in; ++t) {
              gt.col(token_id(x(t, c), l.vocab)) += g.col(c).segment(t * dim, dim);
            }
          }
        }
        // Token ids are not differentiable.
        g = Matrix::Zero(l.in, g.cols());
        break;
      }
    }
  }
  return g;
}

Network init_network(std::vector<LayerSpec> spec, std::uint64_t seed) {
  Network net(std::move(spec));
  Rng rng(seed);
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    if (l.kind == LayerKind::dense) {
      const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto w = net.weight(i);
      for (Index c = 0; c < w.cols(); ++c)
        for (Index r = 0; r < w.rows(); ++r) w(r, c) = u(rng);
      net.bias(i).setZero();
    } else if (l.kind == LayerKind::embedding) {
      auto t = net.weight(i);
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + 1));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Index c = 0; c < t.cols(); ++c)
        for (Index r = 0; r < t.rows(); ++r) t(r, c) = u(rng);
    }
  }
  return net;
}

void optimizer_step(Network& net, const OptimizerConfig& cfg) {
  cfg.validate();
  if (!net.grads_.allFinite()) throw NumericalError("non-finite gradient; optimizer step skipped");

  Vector g = net.grads_;
  if (cfg.weight_decay > 0.0) g += cfg.weight_decay * net.params_;

  if (cfg.kind == OptimizerKind::sgd) {
    net.params_ -= cfg.learning_rate * g;
  } else {
    auto& s = net.opt_;
    if (s.m.size() != g.size()) net.reset_optimizer();
    ++s.step;
    s.m = cfg.beta1 * s.m + (1.0 - cfg.beta1) * g;
    s.v = cfg.beta2 * s.v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
    net.params_.array() -=
        cfg.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg.epsilon);
  }
  net.zero_grad();
}

LossFn mse_loss(const Matrix& target) {
  return [target](const Matrix& out, Matrix* grad) {
    if (out.rows() != target.rows() || out.cols() != target.cols()) throw ShapeError("mse target shape mismatch");
    const Matrix diff = out - target;
    const double n = static_cast<double>(diff.size());
    if (grad) *grad = (2.0 / n) * diff;
    return diff.squaredNorm() / n;
  };
}

Vector numerical_gradient(const std::function<double()>& loss, Vector& params, double eps) {
  Vector out(params.size());
  for (Index i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss();
    params[i] = saved - eps;
    const double down = loss();
    params[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw NumericalError("non-finite loss during finite differences");
    out[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

double max_relative_error(const Vector& analytic, const Vector& numerical) {
  if (analytic.size() != numerical.size()) throw ShapeError("gradient vectors differ in length");
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i];
    const double n = numerical[i];
    const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, std::abs(a - n) / denom);
  }
  return worst;
}

double grad_check(Network& net, const Matrix& input, const LossFn& loss, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw ConfigError("grad_check eps must lie in (0, 1e-2]");
  const bool was_trainable = net.trainable();
  net.set_trainable(true);
  net.zero_grad();

  Matrix out_grad;
  const double base = loss(net.forward(input), &out_grad);
  if (!std::isfinite(base)) throw NumericalError("non-finite loss in grad_check");
  net.backward(out_grad);
  const Vector analytic = net.grads();
  net.zero_grad();

  const Vector numerical =
      numerical_gradient([&] { return loss(net.forward(input), nullptr); }, net.params(), eps);
  net.set_trainable(was_trainable);
  return max_relative_error(analytic, numerical);
}

}  // namespace semsec::nn
