#pragma once

// Minimal dense/convolutional stack with reverse-mode gradients, templated
// on scalar precision (float for speed, double for verification). Activations
// are canonically (N, C, D, H, W); 2-D layers run with D = 1. The network
// builders produce the four reference architectures.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "pressim/core.hpp"
#include "pressim/rng.hpp"

namespace pressim::nn {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(numel(), T(0));
  }
  std::size_t numel() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
  void fill(T x) { std::fill(v.begin(), v.end(), x); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Dimensions of one sample as it flows through a network.
struct Dims {
  int c = 1, d = 1, h = 1, w = 1;
  std::size_t numel() const {
    return static_cast<std::size_t>(c) * d * h * w;
  }
  bool operator==(const Dims& o) const {
    return c == o.c && d == o.d && h == o.h && w == o.w;
  }
  std::string str() const {
    return std::to_string(c) + "x" + std::to_string(d) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;      // null for non-trainable statistics
  bool trainable;
  int fan_in;           // for initialization; 0 = leave at preset value
};

namespace kernels {

// y += a * x. Unit stride; vectorizes as written.
template <typename T>
inline void axpy(T* y, const T* x, T a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Four accumulators make the reduction order explicit and vector-friendly.
template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += x[i] * y[i];
    a1 += x[i + 1] * y[i + 1];
    a2 += x[i + 2] * y[i + 2];
    a3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) a0 += x[i] * y[i];
  return (a0 + a1) + (a2 + a3);
}

}  // namespace kernels

struct ForwardCtx {
  bool training = false;
  bool dropout_enabled = true;  // grad checks turn dropout off
  Rng* rng = nullptr;           // required when training with dropout
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* type() const = 0;
  virtual Dims out_dims(const Dims& in) const = 0;
  // out is pre-sized to (N, out_dims). May cache statistics for backward.
  virtual void forward(const Tensor<T>& in, Tensor<T>& out, int batch,
                       const Dims& din_shape, ForwardCtx& ctx) = 0;
  // dout -> din; accumulates parameter gradients.
  virtual void backward(const Tensor<T>& in, const Tensor<T>& out,
                        const Tensor<T>& dout, Tensor<T>& din, int batch,
                        const Dims& din_shape) = 0;
  virtual void collect_params(const std::string& prefix,
                              std::vector<ParamRef<T>>& out) {}
};

// ---------------------------------------------------------------------------
// Convolution (3-D; 2-D layers use a kernel of temporal extent 1)
// ---------------------------------------------------------------------------

template <typename T>
class Conv3d final : public Layer<T> {
 public:
  Conv3d(int in_c, int out_c, std::array<int, 3> kernel,
         std::array<int, 3> stride, std::array<int, 3> pad, bool temporal)
      : in_c_(in_c), out_c_(out_c), k_(kernel), s_(stride), p_(pad),
        temporal_(temporal) {
    weight_ = Tensor<T>({out_c, in_c, k_[0], k_[1], k_[2]});
    bias_ = Tensor<T>({out_c});
    dweight_ = Tensor<T>(weight_.shape);
    dbias_ = Tensor<T>(bias_.shape);
  }

  const char* type() const override {
    return temporal_ ? "temporal-conv-3d" : "conv-2d";
  }

  Dims out_dims(const Dims& in) const override {
    if (in.c != in_c_)
      throw ShapeMismatch(std::string(type()) + ": expected " +
                          std::to_string(in_c_) + " channels, got " +
                          std::to_string(in.c));
    auto ext = [](int n, int k, int s, int p) {
      int o = (n + 2 * p - k) / s + 1;
      if (o < 1)
        throw ShapeMismatch("convolution output extent < 1");
      return o;
    };
    return {out_c_, ext(in.d, k_[0], s_[0], p_[0]),
            ext(in.h, k_[1], s_[1], p_[1]), ext(in.w, k_[2], s_[2], p_[2])};
  }

  // im2col formulation, per sample: out[M x N] = W[M x K] * col[K x N],
  // K = in_c * kernel volume, N = output positions. The inner loops run over
  // N with unit stride.
  void forward(const Tensor<T>& in, Tensor<T>& out, int batch,
               const Dims& di, ForwardCtx&) override {
    const Dims doo = out_dims(di);
    const std::size_t N = doo.numel() / out_c_;
    const std::size_t K = static_cast<std::size_t>(in_c_) * k_[0] * k_[1] * k_[2];
    const std::size_t in_sample = di.numel();
    col_.resize(K * N);
    for (int n = 0; n < batch; ++n) {
      im2col(in.data() + n * in_sample, di, doo);
      T* out_n = out.data() + static_cast<std::size_t>(n) * out_c_ * N;
      for (int oc = 0; oc < out_c_; ++oc) {
        T* row = out_n + oc * N;
        const T b = bias_.v[oc];
        for (std::size_t i = 0; i < N; ++i) row[i] = b;
        const T* w = weight_.data() + static_cast<std::size_t>(oc) * K;
        for (std::size_t k = 0; k < K; ++k)
          if (w[k] != T(0)) kernels::axpy(row, col_.data() + k * N, w[k], N);
      }
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int batch, const Dims& di) override {
    const Dims doo = out_dims(di);
    const std::size_t N = doo.numel() / out_c_;
    const std::size_t K = static_cast<std::size_t>(in_c_) * k_[0] * k_[1] * k_[2];
    const std::size_t in_sample = di.numel();
    col_.resize(K * N);
    dcol_.resize(K * N);
    for (int n = 0; n < batch; ++n) {
      im2col(in.data() + n * in_sample, di, doo);
      std::fill(dcol_.begin(), dcol_.end(), T(0));
      const T* dout_n =
          dout.data() + static_cast<std::size_t>(n) * out_c_ * N;
      for (int oc = 0; oc < out_c_; ++oc) {
        const T* g = dout_n + oc * N;
        T acc = 0;
        for (std::size_t i = 0; i < N; ++i) acc += g[i];
        dbias_.v[oc] += acc;
        const T* w = weight_.data() + static_cast<std::size_t>(oc) * K;
        T* dw = dweight_.data() + static_cast<std::size_t>(oc) * K;
        for (std::size_t k = 0; k < K; ++k) {
          dw[k] += kernels::dot(g, col_.data() + k * N, N);
          if (w[k] != T(0)) kernels::axpy(dcol_.data() + k * N, g, w[k], N);
        }
      }
      col2im(din.data() + n * in_sample, di, doo);
    }
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    const int fan_in = in_c_ * k_[0] * k_[1] * k_[2];
    out.push_back({prefix + ".weight", &weight_, &dweight_, true, fan_in});
    out.push_back({prefix + ".bias", &bias_, &dbias_, true, 0});
  }

 private:
  // Output-column range keeping iw = ow*sw - pw + kw inside [0, IW).
  void col_range(int IW, int OW, int kw, int& lo, int& hi) const {
    const int off = kw - p_[2];
    lo = off >= 0 ? 0 : (-off + s_[2] - 1) / s_[2];
    const int max_iw = IW - 1 - off;
    hi = max_iw < 0 ? -1 : std::min(OW - 1, max_iw / s_[2]);
  }

  void im2col(const T* in_n, const Dims& di, const Dims& doo) {
    const int ID = di.d, IH = di.h, IW = di.w;
    const int OD = doo.d, OH = doo.h, OW = doo.w;
    const std::size_t N = static_cast<std::size_t>(OD) * OH * OW;
    std::size_t k = 0;
    for (int ic = 0; ic < in_c_; ++ic) {
      const T* in_ch = in_n + static_cast<std::size_t>(ic) * ID * IH * IW;
      for (int kd = 0; kd < k_[0]; ++kd)
        for (int kh = 0; kh < k_[1]; ++kh)
          for (int kw = 0; kw < k_[2]; ++kw, ++k) {
            T* dst = col_.data() + k * N;
            int ow_lo, ow_hi;
            col_range(IW, OW, kw, ow_lo, ow_hi);
            for (int od = 0; od < OD; ++od) {
              const int id = od * s_[0] - p_[0] + kd;
              for (int oh = 0; oh < OH; ++oh) {
                T* drow = dst + (static_cast<std::size_t>(od) * OH + oh) * OW;
                const int ih = oh * s_[1] - p_[1] + kh;
                if (id < 0 || id >= ID || ih < 0 || ih >= IH) {
                  for (int ow = 0; ow < OW; ++ow) drow[ow] = T(0);
                  continue;
                }
                const T* in_row =
                    in_ch + (static_cast<std::size_t>(id) * IH + ih) * IW;
                for (int ow = 0; ow < ow_lo; ++ow) drow[ow] = T(0);
                int iw = ow_lo * s_[2] - p_[2] + kw;
                if (s_[2] == 1) {
                  for (int ow = ow_lo; ow <= ow_hi; ++ow, ++iw)
                    drow[ow] = in_row[iw];
                } else {
                  for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += s_[2])
                    drow[ow] = in_row[iw];
                }
                for (int ow = ow_hi + 1; ow < OW; ++ow) drow[ow] = T(0);
              }
            }
          }
    }
  }

  // Scatter-add of dcol_ back onto the input gradient.
  void col2im(T* din_n, const Dims& di, const Dims& doo) {
    const int ID = di.d, IH = di.h, IW = di.w;
    const int OD = doo.d, OH = doo.h, OW = doo.w;
    const std::size_t N = static_cast<std::size_t>(OD) * OH * OW;
    std::size_t k = 0;
    for (int ic = 0; ic < in_c_; ++ic) {
      T* din_ch = din_n + static_cast<std::size_t>(ic) * ID * IH * IW;
      for (int kd = 0; kd < k_[0]; ++kd)
        for (int kh = 0; kh < k_[1]; ++kh)
          for (int kw = 0; kw < k_[2]; ++kw, ++k) {
            const T* src = dcol_.data() + k * N;
            int ow_lo, ow_hi;
            col_range(IW, OW, kw, ow_lo, ow_hi);
            for (int od = 0; od < OD; ++od) {
              const int id = od * s_[0] - p_[0] + kd;
              if (id < 0 || id >= ID) continue;
              for (int oh = 0; oh < OH; ++oh) {
                const int ih = oh * s_[1] - p_[1] + kh;
                if (ih < 0 || ih >= IH) continue;
                const T* srow =
                    src + (static_cast<std::size_t>(od) * OH + oh) * OW;
                T* din_row =
                    din_ch + (static_cast<std::size_t>(id) * IH + ih) * IW;
                int iw = ow_lo * s_[2] - p_[2] + kw;
                if (s_[2] == 1) {
                  for (int ow = ow_lo; ow <= ow_hi; ++ow, ++iw)
                    din_row[iw] += srow[ow];
                } else {
                  for (int ow = ow_lo; ow <= ow_hi; ++ow, iw += s_[2])
                    din_row[iw] += srow[ow];
                }
              }
            }
          }
    }
  }

  int in_c_, out_c_;
  std::array<int, 3> k_, s_, p_;
  bool temporal_;
  Tensor<T> weight_, bias_, dweight_, dbias_;
  std::vector<T> col_, dcol_;
};

// ---------------------------------------------------------------------------
// Batch normalization over the channel dimension
// ---------------------------------------------------------------------------

template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(int channels) : c_(channels) {
    gamma_ = Tensor<T>({channels});
    beta_ = Tensor<T>({channels});
    running_mean_ = Tensor<T>({channels});
    running_var_ = Tensor<T>({channels});
    gamma_.fill(T(1));
    running_var_.fill(T(1));
    dgamma_ = Tensor<T>(gamma_.shape);
    dbeta_ = Tensor<T>(beta_.shape);
    mean_.assign(channels, T(0));
    inv_std_.assign(channels, T(1));
  }

  const char* type() const override { return "batch-norm"; }
  Dims out_dims(const Dims& in) const override {
    if (in.c != c_) throw ShapeMismatch("batch-norm channel mismatch");
    return in;
  }

  void forward(const Tensor<T>& in, Tensor<T>& out, int batch, const Dims& di,
               ForwardCtx& ctx) override {
    const std::size_t plane = static_cast<std::size_t>(di.d) * di.h * di.w;
    const std::size_t sample = plane * c_;
    const double m_count = static_cast<double>(batch) * plane;
    batch_mode_ = ctx.training;
    for (int c = 0; c < c_; ++c) {
      T mean, inv_std;
      if (ctx.training) {
        double sum = 0.0;
        for (int n = 0; n < batch; ++n) {
          const T* x = in.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) sum += x[i];
        }
        const double mu = sum / m_count;
        double var = 0.0;
        for (int n = 0; n < batch; ++n) {
          const T* x = in.data() + n * sample + c * plane;
          for (std::size_t i = 0; i < plane; ++i) {
            const double d = x[i] - mu;
            var += d * d;
          }
        }
        var /= m_count;
        mean = static_cast<T>(mu);
        inv_std = static_cast<T>(1.0 / std::sqrt(var + kEps));
        running_mean_.v[c] = static_cast<T>((1.0 - kMomentum) *
                                            running_mean_.v[c] +
                                            kMomentum * mu);
        running_var_.v[c] = static_cast<T>((1.0 - kMomentum) *
                                           running_var_.v[c] +
                                           kMomentum * var);
      } else {
        mean = running_mean_.v[c];
        inv_std = static_cast<T>(
            1.0 / std::sqrt(static_cast<double>(running_var_.v[c]) + kEps));
      }
      mean_[c] = mean;
      inv_std_[c] = inv_std;
      const T g = gamma_.v[c], b = beta_.v[c];
      for (int n = 0; n < batch; ++n) {
        const T* x = in.data() + n * sample + c * plane;
        T* y = out.data() + n * sample + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
          y[i] = g * (x[i] - mean) * inv_std + b;
      }
    }
  }

  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int batch, const Dims& di) override {
    const std::size_t plane = static_cast<std::size_t>(di.d) * di.h * di.w;
    const std::size_t sample = plane * c_;
    const double m_count = static_cast<double>(batch) * plane;
    for (int c = 0; c < c_; ++c) {
      const T mean = mean_[c], inv_std = inv_std_[c], g = gamma_.v[c];
      double s1 = 0.0, s2 = 0.0;
      for (int n = 0; n < batch; ++n) {
        const T* x = in.data() + n * sample + c * plane;
        const T* dy = dout.data() + n * sample + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T xhat = (x[i] - mean) * inv_std;
          s1 += dy[i];
          s2 += dy[i] * xhat;
        }
      }
      dbeta_.v[c] += static_cast<T>(s1);
      dgamma_.v[c] += static_cast<T>(s2);
      const T k1 = static_cast<T>(s1 / m_count);
      const T k2 = static_cast<T>(s2 / m_count);
      for (int n = 0; n < batch; ++n) {
        const T* x = in.data() + n * sample + c * plane;
        const T* dy = dout.data() + n * sample + c * plane;
        T* dx = din.data() + n * sample + c * plane;
        if (batch_mode_) {
          for (std::size_t i = 0; i < plane; ++i) {
            const T xhat = (x[i] - mean) * inv_std;
            dx[i] = g * inv_std * (dy[i] - k1 - xhat * k2);
          }
        } else {
          for (std::size_t i = 0; i < plane; ++i)
            dx[i] = g * inv_std * dy[i];
        }
      }
    }
  }

  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_, true, 0});
    out.push_back({prefix + ".beta", &beta_, &dbeta_, true, 0});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr, false, 0});
    out.push_back({prefix + ".running_var", &running_var_, nullptr, false, 0});
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  int c_;
  bool batch_mode_ = false;
  Tensor<T> gamma_, beta_, running_mean_, running_var_, dgamma_, dbeta_;
  std::vector<T> mean_, inv_std_;
};

// ---------------------------------------------------------------------------
// Parameter-free layers
// ---------------------------------------------------------------------------

template <typename T>
class Relu final : public Layer<T> {
 public:
  const char* type() const override { return "relu"; }
  Dims out_dims(const Dims& in) const override { return in; }
  void forward(const Tensor<T>& in, Tensor<T>& out, int, const Dims&,
               ForwardCtx&) override {
    for (std::size_t i = 0; i < in.v.size(); ++i)
      out.v[i] = in.v[i] > T(0) ? in.v[i] : T(0);
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int, const Dims&) override {
    for (std::size_t i = 0; i < in.v.size(); ++i)
      din.v[i] = in.v[i] > T(0) ? dout.v[i] : T(0);
  }
};

template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  const char* type() const override { return "dropout"; }
  double rate() const { return rate_; }
  Dims out_dims(const Dims& in) const override { return in; }

  void forward(const Tensor<T>& in, Tensor<T>& out, int, const Dims&,
               ForwardCtx& ctx) override {
    active_ = ctx.training && ctx.dropout_enabled && rate_ > 0.0;
    if (!active_) {
      out.v = in.v;
      return;
    }
    if (!ctx.rng)
      throw InvalidSpec("dropout in training mode requires an RNG");
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    mask_.resize(in.v.size());
    for (std::size_t i = 0; i < in.v.size(); ++i) {
      const bool keep = ctx.rng->next_double() >= rate_;
      mask_[i] = keep ? 1 : 0;
      out.v[i] = keep ? in.v[i] * scale : T(0);
    }
  }

  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int, const Dims&) override {
    if (!active_) {
      din.v = dout.v;
      return;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    for (std::size_t i = 0; i < dout.v.size(); ++i)
      din.v[i] = mask_[i] ? dout.v[i] * scale : T(0);
  }

 private:
  double rate_;
  bool active_ = false;
  std::vector<std::uint8_t> mask_;
};

template <typename T>
class UpsampleNearest final : public Layer<T> {
 public:
  UpsampleNearest(int fy, int fx) : fy_(fy), fx_(fx) {}
  const char* type() const override { return "upsample-nearest"; }
  Dims out_dims(const Dims& in) const override {
    return {in.c, in.d, in.h * fy_, in.w * fx_};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, int batch, const Dims& di,
               ForwardCtx&) override {
    const int OH = di.h * fy_, OW = di.w * fx_;
    const std::size_t planes = static_cast<std::size_t>(batch) * di.c * di.d;
    for (std::size_t p = 0; p < planes; ++p) {
      const T* src = in.data() + p * di.h * di.w;
      T* dst = out.data() + p * static_cast<std::size_t>(OH) * OW;
      for (int oh = 0; oh < OH; ++oh) {
        const T* srow = src + (oh / fy_) * di.w;
        T* drow = dst + static_cast<std::size_t>(oh) * OW;
        for (int ow = 0; ow < OW; ++ow) drow[ow] = srow[ow / fx_];
      }
    }
  }
  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int batch, const Dims& di) override {
    const int OH = di.h * fy_, OW = di.w * fx_;
    const std::size_t planes = static_cast<std::size_t>(batch) * di.c * di.d;
    din.fill(T(0));
    for (std::size_t p = 0; p < planes; ++p) {
      T* dst = din.data() + p * di.h * di.w;
      const T* src = dout.data() + p * static_cast<std::size_t>(OH) * OW;
      for (int oh = 0; oh < OH; ++oh) {
        T* drow = dst + (oh / fy_) * di.w;
        const T* srow = src + static_cast<std::size_t>(oh) * OW;
        for (int ow = 0; ow < OW; ++ow) drow[ow / fx_] += srow[ow];
      }
    }
  }

 private:
  int fy_, fx_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  const char* type() const override { return "flatten"; }
  Dims out_dims(const Dims& in) const override {
    return {static_cast<int>(in.numel()), 1, 1, 1};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, int, const Dims&,
               ForwardCtx&) override {
    out.v = in.v;
  }
  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int, const Dims&) override {
    din.v = dout.v;
  }
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_f, int out_f) : in_f_(in_f), out_f_(out_f) {
    weight_ = Tensor<T>({out_f, in_f});
    bias_ = Tensor<T>({out_f});
    dweight_ = Tensor<T>(weight_.shape);
    dbias_ = Tensor<T>(bias_.shape);
  }
  const char* type() const override { return "dense"; }
  Dims out_dims(const Dims& in) const override {
    if (static_cast<int>(in.numel()) != in_f_)
      throw ShapeMismatch("dense expects " + std::to_string(in_f_) +
                          " features, got " + std::to_string(in.numel()));
    return {out_f_, 1, 1, 1};
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, int batch, const Dims&,
               ForwardCtx&) override {
    for (int n = 0; n < batch; ++n) {
      const T* x = in.data() + static_cast<std::size_t>(n) * in_f_;
      T* y = out.data() + static_cast<std::size_t>(n) * out_f_;
      for (int g = 0; g < out_f_; ++g) {
        const T* w = weight_.data() + static_cast<std::size_t>(g) * in_f_;
        y[g] = bias_.v[g] + kernels::dot(w, x, in_f_);
      }
    }
  }
  void backward(const Tensor<T>& in, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int batch, const Dims&) override {
    din.fill(T(0));
    for (int n = 0; n < batch; ++n) {
      const T* x = in.data() + static_cast<std::size_t>(n) * in_f_;
      const T* dy = dout.data() + static_cast<std::size_t>(n) * out_f_;
      T* dx = din.data() + static_cast<std::size_t>(n) * in_f_;
      for (int g = 0; g < out_f_; ++g) {
        const T gy = dy[g];
        if (gy == T(0)) continue;
        dbias_.v[g] += gy;
        kernels::axpy(dweight_.data() + static_cast<std::size_t>(g) * in_f_, x,
                      gy, in_f_);
        kernels::axpy(dx, weight_.data() + static_cast<std::size_t>(g) * in_f_,
                      gy, in_f_);
      }
    }
  }
  void collect_params(const std::string& prefix,
                      std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_, true, in_f_});
    out.push_back({prefix + ".bias", &bias_, &dbias_, true, 0});
  }

 private:
  int in_f_, out_f_;
  Tensor<T> weight_, bias_, dweight_, dbias_;
};

// Entry marker for the fusion network: validates that its two 80x28 inputs
// arrive stacked channelwise.
template <typename T>
class ConcatInputs final : public Layer<T> {
 public:
  explicit ConcatInputs(int inputs) : inputs_(inputs) {}
  const char* type() const override { return "concat-inputs"; }
  Dims out_dims(const Dims& in) const override {
    if (in.c != inputs_)
      throw ShapeMismatch("concat-inputs expects " + std::to_string(inputs_) +
                          " stacked inputs, got " + std::to_string(in.c));
    return in;
  }
  void forward(const Tensor<T>& in, Tensor<T>& out, int, const Dims&,
               ForwardCtx&) override {
    out.v = in.v;
  }
  void backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>& dout,
                Tensor<T>& din, int, const Dims&) override {
    din.v = dout.v;
  }

 private:
  int inputs_;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

enum class NetworkKind : std::uint8_t { TPN = 0, TDN = 1, PSN = 2, Baseline = 3 };

inline const char* to_string(NetworkKind k) {
  switch (k) {
    case NetworkKind::TPN: return "tpn";
    case NetworkKind::TDN: return "tdn";
    case NetworkKind::PSN: return "psn";
    case NetworkKind::Baseline: return "baseline";
  }
  return "?";
}

inline NetworkKind network_kind_from_string(const std::string& s) {
  for (int i = 0; i <= 3; ++i) {
    auto k = static_cast<NetworkKind>(i);
    if (s == to_string(k)) return k;
  }
  throw InvalidSpec("unknown network kind: " + s);
}

template <typename T>
class Network {
 public:
  NetworkKind kind = NetworkKind::TPN;
  Dims input_shape;
  std::uint64_t rng_seed = 0;
  std::vector<std::unique_ptr<Layer<T>>> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      char prefix[32];
      std::snprintf(prefix, sizeof(prefix), "l%02zu.%s", i,
                    layers[i]->type());
      layers[i]->collect_params(prefix, out);
    }
    return out;
  }

  std::size_t parameter_count(bool trainable_only = false) {
    std::size_t n = 0;
    for (const auto& p : params())
      if (!trainable_only || p.trainable) n += p.value->numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params())
      if (p.grad) p.grad->fill(T(0));
  }

  // Per-layer sample dims, resolved once from input_shape.
  const std::vector<Dims>& dims_chain() {
    if (dims_.empty()) {
      dims_.push_back(input_shape);
      for (auto& l : layers) dims_.push_back(l->out_dims(dims_.back()));
    }
    return dims_;
  }

  Dims output_shape() {
    return dims_chain().back();
  }

  // batch shaped (N, C, D, H, W) flattened; returns (N, rows, cols) when the
  // output has 2240 cells, otherwise (N, features).
  Tensor<T> forward(const Tensor<T>& batch, bool training, Rng* rng = nullptr,
                    bool dropout_enabled = true) {
    const int n = check_batch(batch);
    ForwardCtx ctx{training, dropout_enabled, rng};
    const auto& dims = dims_chain();
    acts_.resize(layers.size() + 1);
    acts_[0] = batch;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Tensor<T> out(shape_of(n, dims[i + 1]));
      layers[i]->forward(acts_[i], out, n, dims[i], ctx);
      acts_[i + 1] = std::move(out);
    }
    Tensor<T> out = acts_.back();
    if (out.numel() == static_cast<std::size_t>(n) * kGridCells)
      out.shape = {n, kGridRows, kGridCols};
    return out;
  }

  // dout shaped like forward's return; fills parameter gradients and returns
  // the input gradient. Must follow a forward pass.
  Tensor<T> backward(Tensor<T> dout) {
    const auto& dims = dims_chain();
    const int n = acts_.empty() ? 0 : acts_[0].shape[0];
    if (acts_.size() != layers.size() + 1)
      throw ShapeMismatch("backward without a preceding forward");
    dout.shape = shape_of(n, dims.back());
    Tensor<T> grad = std::move(dout);
    for (std::size_t i = layers.size(); i-- > 0;) {
      Tensor<T> din(shape_of(n, dims[i]));
      layers[i]->backward(acts_[i], acts_[i + 1], grad, din, n, dims[i]);
      grad = std::move(din);
    }
    return grad;
  }

  void release_activations() {
    acts_.clear();
    acts_.shrink_to_fit();
  }

 private:
  int check_batch(const Tensor<T>& batch) const {
    if (batch.shape.empty()) throw ShapeMismatch("empty batch");
    const int n = batch.shape[0];
    const std::size_t per = input_shape.numel();
    if (batch.numel() != static_cast<std::size_t>(n) * per)
      throw ShapeMismatch("batch payload does not match input shape " +
                          input_shape.str());
    return n;
  }
  static std::vector<int> shape_of(int n, const Dims& d) {
    return {n, d.c, d.d, d.h, d.w};
  }

  std::vector<Dims> dims_;
  std::vector<Tensor<T>> acts_;
};

// ---------------------------------------------------------------------------
// Reference architectures
// ---------------------------------------------------------------------------

inline constexpr double kDropoutRate = 0.30;

namespace builder_detail {

template <typename T>
void init_params(Network<T>& net) {
  Rng rng(derive_seed(net.rng_seed, "init",
                      static_cast<std::uint64_t>(net.kind)));
  for (auto& p : net.params()) {
    if (!p.trainable || p.fan_in == 0) continue;  // biases/BN keep presets
    const double limit = std::sqrt(6.0 / p.fan_in);
    for (auto& w : p.value->v)
      w = static_cast<T>(rng.uniform(-limit, limit));
  }
}

template <typename T>
void append_tpn_trunk(Network<T>& net) {
  using A3 = std::array<int, 3>;
  net.layers.emplace_back(new Conv3d<T>(1, 8, A3{3, 3, 3}, A3{1, 1, 1},
                                        A3{0, 1, 1}, true));
  net.layers.emplace_back(new BatchNorm<T>(8));
  net.layers.emplace_back(new Relu<T>());
  net.layers.emplace_back(new Dropout<T>(kDropoutRate));
  net.layers.emplace_back(new Conv3d<T>(8, 16, A3{3, 3, 3}, A3{2, 1, 1},
                                        A3{0, 1, 1}, true));
  net.layers.emplace_back(new BatchNorm<T>(16));
  net.layers.emplace_back(new Relu<T>());
  net.layers.emplace_back(new Conv3d<T>(16, 24, A3{3, 3, 3}, A3{1, 1, 1},
                                        A3{0, 1, 1}, true));
  net.layers.emplace_back(new BatchNorm<T>(24));
  net.layers.emplace_back(new Relu<T>());
  net.layers.emplace_back(new UpsampleNearest<T>(5, 10));
  net.layers.emplace_back(new Conv3d<T>(24, 1, A3{1, 6, 3}, A3{1, 1, 1},
                                        A3{0, 0, 0}, false));
}

}  // namespace builder_detail

// Deterministic build: same (kind, seed) gives bit-identical parameters.
template <typename T = float>
Network<T> build_model(NetworkKind kind, std::uint64_t seed) {
  using A3 = std::array<int, 3>;
  Network<T> net;
  net.kind = kind;
  net.rng_seed = seed;
  switch (kind) {
    case NetworkKind::TPN:
      net.input_shape = {1, 10, 17, 3};
      builder_detail::append_tpn_trunk(net);
      break;
    case NetworkKind::TDN:
      net.input_shape = {1, 10, 80, 28};
      net.layers.emplace_back(new Conv3d<T>(1, 16, A3{3, 3, 3}, A3{1, 2, 2},
                                            A3{0, 1, 1}, true));
      net.layers.emplace_back(new BatchNorm<T>(16));
      net.layers.emplace_back(new Relu<T>());
      net.layers.emplace_back(new Dropout<T>(kDropoutRate));
      net.layers.emplace_back(new Conv3d<T>(16, 32, A3{4, 3, 3}, A3{4, 2, 2},
                                            A3{0, 1, 1}, true));
      net.layers.emplace_back(new BatchNorm<T>(32));
      net.layers.emplace_back(new Relu<T>());
      net.layers.emplace_back(new Conv3d<T>(32, 48, A3{2, 3, 3}, A3{1, 1, 1},
                                            A3{0, 1, 1}, true));
      net.layers.emplace_back(new BatchNorm<T>(48));
      net.layers.emplace_back(new UpsampleNearest<T>(4, 4));
      net.layers.emplace_back(new Conv3d<T>(48, 1, A3{1, 3, 3}, A3{1, 1, 1},
                                            A3{0, 1, 1}, false));
      break;
    case NetworkKind::PSN:
      net.input_shape = {2, 1, 80, 28};
      net.layers.emplace_back(new ConcatInputs<T>(2));
      net.layers.emplace_back(new Conv3d<T>(2, 16, A3{1, 5, 5}, A3{1, 1, 1},
                                            A3{0, 2, 2}, false));
      net.layers.emplace_back(new BatchNorm<T>(16));
      net.layers.emplace_back(new Relu<T>());
      net.layers.emplace_back(new Conv3d<T>(16, 32, A3{1, 5, 5}, A3{1, 1, 1},
                                            A3{0, 2, 2}, false));
      net.layers.emplace_back(new BatchNorm<T>(32));
      net.layers.emplace_back(new Relu<T>());
      net.layers.emplace_back(new Conv3d<T>(32, 1, A3{1, 5, 5}, A3{1, 1, 1},
                                            A3{0, 2, 2}, false));
      break;
    case NetworkKind::Baseline:
      // The pose network plus fully connected layers, pose input only.
      net.input_shape = {1, 10, 17, 3};
      builder_detail::append_tpn_trunk(net);
      net.layers.emplace_back(new Flatten<T>());
      net.layers.emplace_back(new Dense<T>(kGridCells, 256));
      net.layers.emplace_back(new Relu<T>());
      net.layers.emplace_back(new Dense<T>(256, kGridCells));
      break;
  }
  builder_detail::init_params(net);
  // Resolve the dims chain now so malformed stacks fail at build time.
  const Dims out = net.output_shape();
  if (out.numel() != kGridCells)
    throw ShapeMismatch("network output is " + out.str() +
                        ", expected 2240 cells");
  return net;
}

}  // namespace pressim::nn
