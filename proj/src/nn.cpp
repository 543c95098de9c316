#include "snot/nn.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "snot/error.hpp"

namespace snot {
namespace {

std::atomic<bool> g_backward_fault{false};

template <class Fn>
void for_each_tensor(MlpParams& p, Fn fn) {
  fn(p.W1.data(), p.W1.size());
  fn(p.b1.data(), p.b1.size());
  fn(p.W2.data(), p.W2.size());
  fn(p.b2.data(), p.b2.size());
}

Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

}  // namespace

MlpParams MlpParams::zeros(Index d_in, Index hidden, Index d_out) {
  if (d_in < 1 || hidden < 1 || d_out < 1) throw ShapeError("mlp: dimensions must be positive");
  MlpParams p;
  p.W1 = Matrix::Zero(hidden, d_in);
  p.b1 = Vector::Zero(hidden);
  p.W2 = Matrix::Zero(d_out, hidden);
  p.b2 = Vector::Zero(d_out);
  return p;
}

MlpParams MlpParams::init(Index d_in, Index hidden, Index d_out, Rng& rng) {
  MlpParams p = zeros(d_in, hidden, d_out);
  auto fill = [&](double* data, Index n, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Index k = 0; k < n; ++k) data[k] = u(rng);
  };
  const double b_in = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double b_hid = 1.0 / std::sqrt(static_cast<double>(hidden));
  fill(p.W1.data(), p.W1.size(), b_in);
  fill(p.b1.data(), p.b1.size(), b_in);
  fill(p.W2.data(), p.W2.size(), b_hid);
  fill(p.b2.data(), p.b2.size(), b_hid);
  return p;
}

bool MlpParams::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
}

void MlpParams::validate() const {
  if (W1.rows() < 1 || W1.cols() < 1 || W2.rows() < 1) throw ShapeError("mlp: empty tensor");
  if (b1.size() != W1.rows() || W2.cols() != W1.rows() || b2.size() != W2.rows()) {
    throw ShapeError("mlp: inconsistent tensor shapes");
  }
}

MlpParams MlpParams::zero_like() const {
  MlpParams z = zeros(input_dim(), hidden_dim(), output_dim());
  return z;
}

void MlpParams::add_scaled(const MlpParams& other, double s) {
  W1 += s * other.W1;
  b1 += s * other.b1;
  W2 += s * other.W2;
  b2 += s * other.b2;
  ++revision;
}

Index MlpParams::parameter_count() const { return W1.size() + b1.size() + W2.size() + b2.size(); }

double& MlpParams::at(Index k) {
  if (k < W1.size()) return W1.data()[k];
  k -= W1.size();
  if (k < b1.size()) return b1[k];
  k -= b1.size();
  if (k < W2.size()) return W2.data()[k];
  k -= W2.size();
  if (k < b2.size()) return b2[k];
  throw ShapeError("mlp: flat index out of range");
}

double MlpParams::at(Index k) const { return const_cast<MlpParams*>(this)->at(k); }

Matrix forward(const MlpParams& p, const Matrix& x, ForwardCache* cache) {
  p.validate();
  if (x.cols() != p.input_dim()) throw ShapeError("mlp forward: input has the wrong width");
  Matrix pre = x * p.W1.transpose();
  pre.rowwise() += p.b1.transpose();
  Matrix hidden = pre.cwiseMax(0.0);
  Matrix y = hidden * p.W2.transpose();
  y.rowwise() += p.b2.transpose();
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
    cache->revision = p.revision;
    cache->owner = &p;
  }
  return y;
}

MlpParams backward(const MlpParams& p, const ForwardCache& cache, const Matrix& grad_out, Matrix* dx) {
  if (cache.owner != &p || cache.revision != p.revision) throw ShapeError("mlp backward: stale cache");
  if (grad_out.rows() != cache.hidden.rows() || grad_out.cols() != p.output_dim()) {
    throw ShapeError("mlp backward: grad_out has the wrong shape");
  }
  MlpParams g;
  g.W2 = grad_out.transpose() * cache.hidden;
  g.b2 = grad_out.colwise().sum().transpose();
  // ReLU subgradient at exactly 0 is 0.
  const Matrix dpre = (grad_out * p.W2).cwiseProduct(relu_mask(cache.pre));
  g.W1 = dpre.transpose() * cache.x;
  g.b1 = dpre.colwise().sum().transpose();
  if (dx) *dx = dpre * p.W1;
  if (g_backward_fault.load(std::memory_order_relaxed)) {
    g.W1 = -g.W1;
    g.b1 = -g.b1;
    g.W2 = -g.W2;
    g.b2 = -g.b2;
    if (dx) *dx = -*dx;
  }
  return g;
}

Matrix jacobian_map(const MlpParams& p, const Vector& x) {
  p.validate();
  if (x.size() != p.input_dim()) throw ShapeError("mlp jacobian: input has the wrong size");
  const Vector pre = p.W1 * x + p.b1;
  const Vector mask = (pre.array() > 0.0).cast<double>().matrix();
  return p.W2 * mask.asDiagonal() * p.W1;
}

double r1_penalty(const MlpParams& p, const Matrix& y, MlpParams* grad) {
  p.validate();
  if (p.output_dim() != 1) throw ShapeError("r1_penalty: potential network must be scalar");
  if (y.cols() != p.input_dim() || y.rows() < 1) throw ShapeError("r1_penalty: batch has the wrong shape");
  const double inv_b = 1.0 / static_cast<double>(y.rows());
  Matrix pre = y * p.W1.transpose();
  pre.rowwise() += p.b1.transpose();
  // Row b of mw is mask_b * w2; the input gradient of V at y_b is W1^T (mask_b * w2).
  Matrix mw = relu_mask(pre);
  mw.array().rowwise() *= p.W2.row(0).array();
  const Matrix g = mw * p.W1;  // B x d_in
  const double value = g.squaredNorm() * inv_b;
  if (grad) {
    *grad = p.zero_like();
    grad->W1 = 2.0 * inv_b * mw.transpose() * g;
    const Matrix gw = g * p.W1.transpose();  // B x h
    grad->W2.row(0) = 2.0 * inv_b * (relu_mask(pre).cwiseProduct(gw)).colwise().sum();
  }
  return value;
}

AdamState AdamState::for_params(const MlpParams& p, double learning_rate, double beta1, double beta2,
                                double eps_div) {
  AdamState s;
  s.m = p.zero_like();
  s.v = p.zero_like();
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_div = eps_div;
  return s;
}

void adam_step(MlpParams& p, const MlpParams& grad, AdamState& state) {
  if (!grad.all_finite()) throw TrainingFault("adam: non-finite gradient");
  if (grad.parameter_count() != p.parameter_count() || state.m.parameter_count() != p.parameter_count()) {
    throw ShapeError("adam: shape mismatch");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    param.array() -= state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps_div);
  };
  update(p.W1, grad.W1, state.m.W1, state.v.W1);
  update(p.b1, grad.b1, state.m.b1, state.v.b1);
  update(p.W2, grad.W2, state.m.W2, state.v.W2);
  update(p.b2, grad.b2, state.m.b2, state.v.b2);
  ++p.revision;
  if (!p.all_finite()) throw TrainingFault("adam: parameters became non-finite");
}

void save_checkpoint(std::ostream& os, const MlpParams& p) {
  p.validate();
  os << "snot-mlp v1\n" << p.input_dim() << ' ' << p.hidden_dim() << ' ' << p.output_dim() << '\n';
  os << std::setprecision(17);
  auto rows = [&](const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
      os << '\n';
    }
  };
  auto line = [&](const Vector& v) {
    for (Index j = 0; j < v.size(); ++j) os << (j ? " " : "") << v[j];
    os << '\n';
  };
  rows(p.W1);
  line(p.b1);
  rows(p.W2);
  line(p.b2);
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& p) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(os, p);
}

MlpParams load_checkpoint(std::istream& is) {
  std::string magic;
  std::getline(is, magic);
  if (magic != "snot-mlp v1") throw ConfigError("checkpoint: bad header");
  Index d_in = 0, h = 0, d_out = 0;
  if (!(is >> d_in >> h >> d_out)) throw ConfigError("checkpoint: bad dimensions");
  MlpParams p = MlpParams::zeros(d_in, h, d_out);
  for_each_tensor(p, [&](double* data, Index n) {
    for (Index k = 0; k < n; ++k) {
      if (!(is >> data[k])) throw ConfigError("checkpoint: truncated tensor data");
    }
  });
  return p;
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path.string() + "'");
  return load_checkpoint(is);
}

namespace testing {
void set_backward_sign_fault(bool enabled) { g_backward_fault.store(enabled); }
bool backward_sign_fault() { return g_backward_fault.load(); }
}  // namespace testing

}  // namespace snot
