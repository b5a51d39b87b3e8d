#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rllab/errors.hpp"
#include "rllab/rng.hpp"

namespace rllab {

enum class Activation : std::uint8_t { relu = 0, tanh = 1, identity = 2 };

// Row-major dense matrix.
template <typename T>
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, T(0)) {}

  T* row(std::size_t i) { return v.data() + i * cols; }
  const T* row(std::size_t i) const { return v.data() + i * cols; }
  T& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  const T& at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
  std::size_t size() const { return v.size(); }
};

// Fully connected feedforward net. Hidden layers are relu; the output layer
// activation is configurable per network role. weights[l] maps activations of
// layer l (layer_sizes[l]) to pre-activations of layer l+1, stored as a
// (layer_sizes[l+1] x layer_sizes[l]) row-major matrix.
template <typename T>
struct Mlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<Mat<T>> weights;
  std::vector<std::vector<T>> biases;
  Activation output_act = Activation::identity;

  std::size_t in_dim() const { return layer_sizes.front(); }
  std::size_t out_dim() const { return layer_sizes.back(); }
  std::size_t n_layers() const { return weights.size(); }

  std::size_t n_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }
};

// Parameter-shaped gradient container.
template <typename T>
struct MlpGrads {
  std::vector<Mat<T>> weights;
  std::vector<std::vector<T>> biases;

  static MlpGrads zeros_like(const Mlp<T>& net) {
    MlpGrads g;
    g.weights.reserve(net.weights.size());
    g.biases.reserve(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      g.weights.emplace_back(net.weights[l].rows, net.weights[l].cols);
      g.biases.emplace_back(net.biases[l].size(), T(0));
    }
    return g;
  }
};

namespace detail {

template <typename T>
inline void check_same_shape(const Mlp<T>& a, const Mlp<T>& b, const char* what) {
  if (a.layer_sizes != b.layer_sizes)
    throw ShapeError(std::string(what) + ": layer sizes differ");
}

template <typename T>
inline void check_grad_shape(const Mlp<T>& net, const MlpGrads<T>& g, const char* what) {
  if (g.weights.size() != net.weights.size() || g.biases.size() != net.biases.size())
    throw ShapeError(std::string(what) + ": layer count differs");
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    if (g.weights[l].rows != net.weights[l].rows || g.weights[l].cols != net.weights[l].cols ||
        g.biases[l].size() != net.biases[l].size())
      throw ShapeError(std::string(what) + ": shape differs at layer " + std::to_string(l));
  }
}

template <typename T>
inline void apply_activation(Mat<T>& z, Activation act) {
  switch (act) {
    case Activation::relu:
      for (auto& x : z.v) x = x > T(0) ? x : T(0);
      break;
    case Activation::tanh:
      for (auto& x : z.v) x = std::tanh(x);
      break;
    case Activation::identity:
      break;
  }
}

// In-place g *= act'(post_activation). relu and tanh derivatives are
// recoverable from the post-activation value alone.
template <typename T>
inline void apply_activation_grad(Mat<T>& g, const Mat<T>& post, Activation act) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = post.v[i] > T(0) ? g.v[i] : T(0);
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] *= T(1) - post.v[i] * post.v[i];
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace detail

// Seed-deterministic initialization: weights uniform in
// +-sqrt(6 / (fan_in + fan_out)), biases zero.
template <typename T>
Mlp<T> mlp_init(const std::vector<std::size_t>& layer_sizes, Activation output_act,
                std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("mlp_init: need at least input and output sizes");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw ConfigError("mlp_init: layer sizes must be >= 1");

  Mlp<T> net;
  net.layer_sizes = layer_sizes;
  net.output_act = output_act;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat<T> w(fan_out, fan_in);
    for (auto& x : w.v) x = static_cast<T>(rng.uniform(-bound, bound));
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, T(0));
  }
  return net;
}

// Post-activation record of one forward pass; acts[0] is the input batch.
template <typename T>
struct ForwardCache {
  std::vector<Mat<T>> acts;
};

// Batched forward pass: input is (batch x in_dim), result (batch x out_dim).
template <typename T>
Mat<T> mlp_forward(const Mlp<T>& net, const Mat<T>& input, ForwardCache<T>* cache = nullptr) {
  if (input.cols != net.in_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(input.cols) +
                     " columns, net expects " + std::to_string(net.in_dim()));
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(input);
  }
  Mat<T> cur = input;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const Mat<T>& w = net.weights[l];
    const std::vector<T>& b = net.biases[l];
    Mat<T> next(cur.rows, w.rows);
    for (std::size_t i = 0; i < cur.rows; ++i) {
      const T* x = cur.row(i);
      T* y = next.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const T* wr = w.row(o);
        T acc = b[o];
        for (std::size_t k = 0; k < w.cols; ++k) acc += wr[k] * x[k];
        y[o] = acc;
      }
    }
    detail::apply_activation(next, l + 1 == net.n_layers() ? net.output_act : Activation::relu);
    if (cache) cache->acts.push_back(next);
    cur = std::move(next);
  }
  return cur;
}

template <typename T>
std::vector<T> mlp_forward(const Mlp<T>& net, std::span<const T> input) {
  Mat<T> in(1, input.size());
  std::copy(input.begin(), input.end(), in.v.begin());
  Mat<T> out = mlp_forward(net, in);
  return out.v;
}

// Backward pass for L = sum_ij out(i,j) * out_grad(i,j). Fills parameter
// gradients into *grads (skipped when null) and d L / d input into
// *input_grads (skipped when null). The cache must come from a forward pass
// over the same parameters.
template <typename T>
void mlp_backward(const Mlp<T>& net, const ForwardCache<T>& cache, const Mat<T>& out_grad,
                  MlpGrads<T>* grads, Mat<T>* input_grads = nullptr) {
  const std::size_t L = net.n_layers();
  if (cache.acts.size() != L + 1) throw ShapeError("mlp_backward: cache does not match net depth");
  for (std::size_t l = 0; l <= L; ++l)
    if (cache.acts[l].cols != net.layer_sizes[l])
      throw ShapeError("mlp_backward: stale cache at layer " + std::to_string(l));
  const std::size_t batch = cache.acts[0].rows;
  if (out_grad.rows != batch || out_grad.cols != net.out_dim())
    throw ShapeError("mlp_backward: out_grad shape mismatch");

  if (grads) {
    grads->weights.assign(L, Mat<T>());
    grads->biases.assign(L, {});
    for (std::size_t l = 0; l < L; ++l) {
      grads->weights[l] = Mat<T>(net.weights[l].rows, net.weights[l].cols);
      grads->biases[l].assign(net.biases[l].size(), T(0));
    }
  }

  Mat<T> g = out_grad;
  detail::apply_activation_grad(g, cache.acts[L], net.output_act);

  for (std::size_t l = L; l-- > 0;) {
    const Mat<T>& w = net.weights[l];
    const Mat<T>& x = cache.acts[l];

    if (grads) {
      Mat<T>& dw = grads->weights[l];
      std::vector<T>& db = grads->biases[l];
      for (std::size_t i = 0; i < batch; ++i) {
        const T* gi = g.row(i);
        const T* xi = x.row(i);
        for (std::size_t o = 0; o < w.rows; ++o) {
          const T go = gi[o];
          if (go == T(0)) continue;
          db[o] += go;
          T* dwo = dw.row(o);
          for (std::size_t k = 0; k < w.cols; ++k) dwo[k] += go * xi[k];
        }
      }
    }

    const bool need_prev = l > 0 || input_grads != nullptr;
    if (!need_prev) break;

    Mat<T> gprev(batch, w.cols);
    for (std::size_t i = 0; i < batch; ++i) {
      const T* gi = g.row(i);
      T* gp = gprev.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const T go = gi[o];
        if (go == T(0)) continue;
        const T* wr = w.row(o);
        for (std::size_t k = 0; k < w.cols; ++k) gp[k] += go * wr[k];
      }
    }
    if (l > 0) {
      detail::apply_activation_grad(gprev, cache.acts[l], Activation::relu);
      g = std::move(gprev);
    } else {
      if (input_grads) *input_grads = std::move(gprev);
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
struct AdamState {
  std::vector<Mat<T>> m_w, v_w;
  std::vector<std::vector<T>> m_b, v_b;
  std::uint64_t step = 0;
  T lr = T(3e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <typename T>
AdamState<T> adam_init(const Mlp<T>& net, T lr) {
  AdamState<T> st;
  st.lr = lr;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    st.m_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
    st.v_w.emplace_back(net.weights[l].rows, net.weights[l].cols);
    st.m_b.emplace_back(net.biases[l].size(), T(0));
    st.v_b.emplace_back(net.biases[l].size(), T(0));
  }
  return st;
}

// Standard Adam with bias correction, applied in place.
template <typename T>
void adam_step(AdamState<T>& st, Mlp<T>& net, const MlpGrads<T>& grads) {
  detail::check_grad_shape(net, grads, "adam_step");
  if (st.m_w.size() != net.n_layers()) throw ShapeError("adam_step: optimizer state mismatch");

  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    for (const T g : grads.weights[l].v)
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite weight gradient in layer " + std::to_string(l));
    for (const T g : grads.biases[l])
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite bias gradient in layer " + std::to_string(l));
  }

  st.step += 1;
  const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(st.beta1), static_cast<double>(st.step)));
  const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(st.beta2), static_cast<double>(st.step)));

  auto update = [&](T* p, T* m, T* v, const T* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = st.beta1 * m[i] + (T(1) - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (T(1) - st.beta2) * g[i] * g[i];
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      p[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  };

  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    update(net.weights[l].v.data(), st.m_w[l].v.data(), st.v_w[l].v.data(),
           grads.weights[l].v.data(), net.weights[l].size());
    update(net.biases[l].data(), st.m_b[l].data(), st.v_b[l].data(), grads.biases[l].data(),
           net.biases[l].size());
  }
}

// target <- tau * online + (1 - tau) * target
template <typename T>
void polyak_update(Mlp<T>& target, const Mlp<T>& online, T tau) {
  if (!(tau > T(0)) || tau > T(1)) throw ConfigError("polyak_update: tau must be in (0, 1]");
  detail::check_same_shape(target, online, "polyak_update");
  for (std::size_t l = 0; l < target.n_layers(); ++l) {
    T* t = target.weights[l].v.data();
    const T* o = online.weights[l].v.data();
    for (std::size_t i = 0; i < target.weights[l].size(); ++i)
      t[i] = tau * o[i] + (T(1) - tau) * t[i];
    T* tb = target.biases[l].data();
    const T* ob = online.biases[l].data();
    for (std::size_t i = 0; i < target.biases[l].size(); ++i)
      tb[i] = tau * ob[i] + (T(1) - tau) * tb[i];
  }
}

// ---------------------------------------------------------------------------
// Flat parameter indexing (used by the finite-difference checker).

template <typename T>
T& param_at(Mlp<T>& net, std::size_t flat) {
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    if (flat < net.weights[l].size()) return net.weights[l].v[flat];
    flat -= net.weights[l].size();
    if (flat < net.biases[l].size()) return net.biases[l][flat];
    flat -= net.biases[l].size();
  }
  throw ShapeError("param_at: index out of range");
}

template <typename T>
T grad_at(const MlpGrads<T>& g, std::size_t flat) {
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    if (flat < g.weights[l].size()) return g.weights[l].v[flat];
    flat -= g.weights[l].size();
    if (flat < g.biases[l].size()) return g.biases[l][flat];
    flat -= g.biases[l].size();
  }
  throw ShapeError("grad_at: index out of range");
}

// Central-difference check of an analytic gradient against loss_fn, over an
// evenly spaced subsample of at most max_coords parameter coordinates (all of
// them when the net is small). Returns the worst relative error.
template <typename T>
double grad_check(const std::function<double(const Mlp<T>&)>& loss_fn, const Mlp<T>& params,
                  const MlpGrads<T>& analytic, double h, std::size_t max_coords = 200) {
  detail::check_grad_shape(params, analytic, "grad_check");
  const std::size_t n = params.n_params();
  const std::size_t n_check = std::min(n, max_coords);
  const double stride = static_cast<double>(n) / static_cast<double>(n_check);

  Mlp<T> work = params;
  double worst = 0.0;
  for (std::size_t j = 0; j < n_check; ++j) {
    const std::size_t idx = std::min(n - 1, static_cast<std::size_t>(j * stride));
    T& p = param_at(work, idx);
    const T saved = p;
    p = saved + static_cast<T>(h);
    const double lp = loss_fn(work);
    p = saved - static_cast<T>(h);
    const double lm = loss_fn(work);
    p = saved;
    if (!std::isfinite(lp) || !std::isfinite(lm)) throw NumericError("grad_check: non-finite loss");
    const double fd = (lp - lm) / (2.0 * h);
    const double an = static_cast<double>(grad_at(analytic, idx));
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-12});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

// Smallest |pre-activation| over all hidden relu units for this input batch.
// Central differences are only trustworthy when this margin comfortably
// exceeds the FD step: a unit whose pre-activation sits within the step of
// zero can change sign under perturbation, and the loss is not differentiable
// there. Callers of grad_check filter test instances on this value.
template <typename T>
double relu_kink_margin(const Mlp<T>& net, const Mat<T>& input) {
  if (input.cols != net.in_dim()) throw ShapeError("relu_kink_margin: input width mismatch");
  double margin = std::numeric_limits<double>::infinity();
  Mat<T> cur = input;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const Mat<T>& w = net.weights[l];
    const std::vector<T>& b = net.biases[l];
    Mat<T> next(cur.rows, w.rows);
    for (std::size_t i = 0; i < cur.rows; ++i) {
      const T* x = cur.row(i);
      T* y = next.row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const T* wr = w.row(o);
        T acc = b[o];
        for (std::size_t k = 0; k < w.cols; ++k) acc += wr[k] * x[k];
        y[o] = acc;
      }
    }
    const bool last = l + 1 == net.n_layers();
    if (!last)
      for (const T z : next.v) margin = std::min(margin, std::abs(static_cast<double>(z)));
    detail::apply_activation(next, last ? net.output_act : Activation::relu);
    cur = std::move(next);
  }
  return margin;
}

// ---------------------------------------------------------------------------
// Serialization: self-describing binary, bit-exact at the stored precision.

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw ValidationError("checkpoint: truncated stream");
}

template <typename V>
inline void write_pod(std::ostream& os, const V& v) {
  write_bytes(os, &v, sizeof(V));
}

template <typename V>
inline V read_pod(std::istream& is) {
  V v;
  read_bytes(is, &v, sizeof(V));
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kMlpMagic = 0x314c504d;  // "MLP1"

template <typename T>
void mlp_save(const Mlp<T>& net, std::ostream& os) {
  detail::write_pod(os, kMlpMagic);
  detail::write_pod(os, static_cast<std::uint8_t>(sizeof(T)));
  detail::write_pod(os, static_cast<std::uint8_t>(net.output_act));
  detail::write_pod(os, static_cast<std::uint32_t>(net.layer_sizes.size()));
  for (std::size_t s : net.layer_sizes) detail::write_pod(os, static_cast<std::uint64_t>(s));
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    detail::write_bytes(os, net.weights[l].v.data(), net.weights[l].size() * sizeof(T));
    detail::write_bytes(os, net.biases[l].data(), net.biases[l].size() * sizeof(T));
  }
}

template <typename T>
Mlp<T> mlp_load(std::istream& is) {
  if (detail::read_pod<std::uint32_t>(is) != kMlpMagic)
    throw ValidationError("mlp_load: bad magic");
  if (detail::read_pod<std::uint8_t>(is) != sizeof(T))
    throw ValidationError("mlp_load: stored precision does not match requested scalar type");
  const auto act = static_cast<Activation>(detail::read_pod<std::uint8_t>(is));
  const auto n_sizes = detail::read_pod<std::uint32_t>(is);
  if (n_sizes < 2 || n_sizes > 64) throw ValidationError("mlp_load: implausible layer count");
  std::vector<std::size_t> sizes(n_sizes);
  for (auto& s : sizes) {
    s = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is));
    if (s == 0 || s > (1u << 20)) throw ValidationError("mlp_load: implausible layer size");
  }
  Mlp<T> net = mlp_init<T>(sizes, act, 0);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    detail::read_bytes(is, net.weights[l].v.data(), net.weights[l].size() * sizeof(T));
    detail::read_bytes(is, net.biases[l].data(), net.biases[l].size() * sizeof(T));
  }
  return net;
}

}  // namespace rllab
