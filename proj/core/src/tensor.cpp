#include "ecgdnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "ecgdnn/parallel.hpp"

namespace ecgdnn {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

template <typename T>
void check_3d(const Tensor<T>& x, const char* what) {
  if (!x.defined() || x.shape().size() != 3) {
    throw ShapeMismatch(std::string(what) + " must be a B x C x L tensor");
  }
}

template <typename T>
T stable_sigmoid(T v) {
  if (v >= T(0)) {
    const T e = std::exp(-v);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T v) {
  return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v)));
}

}  // namespace

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeMismatch("backward expects a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw Error("backward on a tensor that does not require grad");
  }
  // Reset intermediate gradients so each call contributes exactly one full
  // gradient; leaves keep accumulating.
  for (auto& entry : entries_) {
    entry.output->grad.assign(entry.output->value.size(), T(0));
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    it->fn();
  }
}

template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, int stride,
                 int pad, Tape<T>* tape) {
  check_3d(x, "conv1d input");
  if (!w.defined() || w.shape().size() != 3) {
    throw ShapeMismatch("conv1d weight must be Cout x Cin x k");
  }
  if (stride < 1 || pad < 0) throw ShapeMismatch("conv1d needs stride >= 1, pad >= 0");
  const std::int64_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::int64_t cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeMismatch("conv1d weight expects " + std::to_string(cin) + " input channels, got " +
                        std::to_string(w.dim(1)));
  }
  if (bias.defined() && bias.numel() != cout) {
    throw ShapeMismatch("conv1d bias must have Cout entries");
  }
  if (len + 2 * pad < kernel) throw ShapeMismatch("conv1d input shorter than kernel");
  const std::int64_t out_len = (len + 2 * pad - kernel) / stride + 1;

  Tensor<T> out = Tensor<T>::zeros({batch, cout, out_len});
  const T* xp = x.data();
  const T* wp = w.data();
  const T* bp = bias.defined() ? bias.data() : nullptr;
  T* op = out.data();

  parallel_for(static_cast<std::size_t>(batch * cout), [&](std::size_t idx) {
    const std::int64_t b = static_cast<std::int64_t>(idx) / cout;
    const std::int64_t co = static_cast<std::int64_t>(idx) % cout;
    T* orow = op + (b * cout + co) * out_len;
    if (bp) {
      for (std::int64_t l = 0; l < out_len; ++l) orow[l] = bp[co];
    }
    for (std::int64_t ci = 0; ci < cin; ++ci) {
      const T* xrow = xp + (b * cin + ci) * len;
      const T* wrow = wp + (co * cin + ci) * kernel;
      for (std::int64_t t = 0; t < kernel; ++t) {
        const T wv = wrow[t];
        const std::int64_t shift = t - pad;
        const std::int64_t l_lo = std::max<std::int64_t>(0, ceil_div(-shift, stride));
        const std::int64_t l_hi = std::min(out_len - 1, (len - 1 - shift) / stride);
        const T* xs = xrow + l_lo * stride + shift;
        T* os = orow + l_lo;
        const std::int64_t span = l_hi - l_lo;
        if (stride == 1) {
          for (std::int64_t i = 0; i <= span; ++i) os[i] += wv * xs[i];
        } else {
          for (std::int64_t i = 0; i <= span; ++i) os[i] += wv * xs[i * stride];
        }
      }
    }
  });

  const bool needs = x.requires_grad() || w.requires_grad() ||
                     (bias.defined() && bias.requires_grad());
  if (tape && needs) {
    out.set_requires_grad(true);
    auto xn = x.node(), wn = w.node(), on = out.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    tape->record(out, [xn, wn, bn, on, stride, pad, batch, cin, cout, kernel, len, out_len] {
      const T* dy = on->grad.data();
      if (bn && bn->requires_grad) {
        bn->ensure_grad();
        T* db = bn->grad.data();
        parallel_for(static_cast<std::size_t>(cout), [&](std::size_t co) {
          double acc = 0.0;
          for (std::int64_t b = 0; b < batch; ++b) {
            const T* row = dy + (b * cout + static_cast<std::int64_t>(co)) * out_len;
            for (std::int64_t l = 0; l < out_len; ++l) acc += row[l];
          }
          db[co] += static_cast<T>(acc);
        });
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        T* dw = wn->grad.data();
        const T* xv = xn->value.data();
        parallel_for(static_cast<std::size_t>(cout), [&](std::size_t co_idx) {
          const std::int64_t co = static_cast<std::int64_t>(co_idx);
          for (std::int64_t b = 0; b < batch; ++b) {
            const T* dyrow = dy + (b * cout + co) * out_len;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const T* xrow = xv + (b * cin + ci) * len;
              T* dwrow = dw + (co * cin + ci) * kernel;
              for (std::int64_t t = 0; t < kernel; ++t) {
                const std::int64_t shift = t - pad;
                const std::int64_t l_lo = std::max<std::int64_t>(0, ceil_div(-shift, stride));
                const std::int64_t l_hi = std::min(out_len - 1, (len - 1 - shift) / stride);
                const T* xs = xrow + l_lo * stride + shift;
                const T* ds = dyrow + l_lo;
                T acc = T(0);
                const std::int64_t span = l_hi - l_lo;
                if (stride == 1) {
                  for (std::int64_t i = 0; i <= span; ++i) acc += xs[i] * ds[i];
                } else {
                  for (std::int64_t i = 0; i <= span; ++i) acc += xs[i * stride] * ds[i];
                }
                dwrow[t] += acc;
              }
            }
          }
        });
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        T* dx = xn->grad.data();
        const T* wv = wn->value.data();
        parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b_idx) {
          const std::int64_t b = static_cast<std::int64_t>(b_idx);
          for (std::int64_t co = 0; co < cout; ++co) {
            const T* dyrow = dy + (b * cout + co) * out_len;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              T* dxrow = dx + (b * cin + ci) * len;
              const T* wrow = wv + (co * cin + ci) * kernel;
              for (std::int64_t t = 0; t < kernel; ++t) {
                const T wvv = wrow[t];
                const std::int64_t shift = t - pad;
                const std::int64_t l_lo = std::max<std::int64_t>(0, ceil_div(-shift, stride));
                const std::int64_t l_hi = std::min(out_len - 1, (len - 1 - shift) / stride);
                T* xs = dxrow + l_lo * stride + shift;
                const T* ds = dyrow + l_lo;
                const std::int64_t span = l_hi - l_lo;
                if (stride == 1) {
                  for (std::int64_t i = 0; i <= span; ++i) xs[i] += wvv * ds[i];
                } else {
                  for (std::int64_t i = 0; i <= span; ++i) xs[i * stride] += wvv * ds[i];
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm1d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, BatchNormMode mode,
                      double momentum, double eps, Tape<T>* tape) {
  check_3d(x, "batchnorm1d input");
  const std::int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (gamma.numel() != channels || beta.numel() != channels ||
      running_mean.numel() != channels || running_var.numel() != channels) {
    throw ShapeMismatch("batchnorm1d parameter size must equal channel count");
  }
  const std::int64_t n = batch * len;
  if (mode == BatchNormMode::kTrain && n < 2) {
    throw DegenerateBatch("batchnorm1d train mode needs B*L > 1");
  }

  Tensor<T> out = Tensor<T>::zeros({batch, channels, len});
  std::vector<T> mean_used(static_cast<std::size_t>(channels));
  std::vector<T> invstd_used(static_cast<std::size_t>(channels));

  const T* xp = x.data();
  T* op = out.data();
  const T* gp = gamma.data();
  const T* bp = beta.data();
  T* rm = running_mean.data();
  T* rv = running_var.data();

  if (mode == BatchNormMode::kTrain) {
    parallel_for(static_cast<std::size_t>(channels), [&](std::size_t c) {
      double sum = 0.0, sumsq = 0.0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const T* row = xp + (b * channels + static_cast<std::int64_t>(c)) * len;
        for (std::int64_t l = 0; l < len; ++l) {
          const double v = static_cast<double>(row[l]);
          sum += v;
          sumsq += v * v;
        }
      }
      const double mu = sum / static_cast<double>(n);
      double var = sumsq / static_cast<double>(n) - mu * mu;
      if (var < 0.0) var = 0.0;  // guard rounding
      mean_used[c] = static_cast<T>(mu);
      invstd_used[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1)
                                    : var;
      rm[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(rm[c]) + momentum * mu);
      rv[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(rv[c]) +
                             momentum * unbiased);
    });
  } else {
    for (std::int64_t c = 0; c < channels; ++c) {
      mean_used[static_cast<std::size_t>(c)] = rm[c];
      invstd_used[static_cast<std::size_t>(c)] =
          static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + eps));
    }
  }

  parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
    const std::int64_t b = static_cast<std::int64_t>(idx) / channels;
    const std::int64_t c = static_cast<std::int64_t>(idx) % channels;
    const T mu = mean_used[static_cast<std::size_t>(c)];
    const T is = invstd_used[static_cast<std::size_t>(c)];
    const T g = gp[c], be = bp[c];
    const T* xrow = xp + (b * channels + c) * len;
    T* orow = op + (b * channels + c) * len;
    for (std::int64_t l = 0; l < len; ++l) {
      orow[l] = g * (xrow[l] - mu) * is + be;
    }
  });

  const bool needs = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  if (tape && needs) {
    out.set_requires_grad(true);
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
    const bool train = mode == BatchNormMode::kTrain;
    tape->record(out, [xn, gn, bn, on, mean_used, invstd_used, train, batch, channels, len] {
      const std::int64_t n = batch * len;
      const T* dy = on->grad.data();
      const T* xv = xn->value.data();
      const T* gv = gn->value.data();
      const bool need_g = gn->requires_grad;
      const bool need_b = bn->requires_grad;
      const bool need_x = xn->requires_grad;
      if (need_g) gn->ensure_grad();
      if (need_b) bn->ensure_grad();
      if (need_x) xn->ensure_grad();
      parallel_for(static_cast<std::size_t>(channels), [&](std::size_t c_idx) {
        const std::int64_t c = static_cast<std::int64_t>(c_idx);
        const T mu = mean_used[c_idx];
        const T is = invstd_used[c_idx];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::int64_t b = 0; b < batch; ++b) {
          const T* dyrow = dy + (b * channels + c) * len;
          const T* xrow = xv + (b * channels + c) * len;
          for (std::int64_t l = 0; l < len; ++l) {
            const double d = static_cast<double>(dyrow[l]);
            sum_dy += d;
            sum_dy_xhat += d * static_cast<double>((xrow[l] - mu) * is);
          }
        }
        if (need_b) bn->grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
        if (need_g) gn->grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xhat);
        if (need_x) {
          const T g = gv[c];
          if (train) {
            const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(n));
            const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(n));
            for (std::int64_t b = 0; b < batch; ++b) {
              const T* dyrow = dy + (b * channels + c) * len;
              const T* xrow = xv + (b * channels + c) * len;
              T* dxrow = xn->grad.data() + (b * channels + c) * len;
              for (std::int64_t l = 0; l < len; ++l) {
                const T xhat = (xrow[l] - mu) * is;
                dxrow[l] += g * is * (dyrow[l] - mean_dy - xhat * mean_dy_xhat);
              }
            }
          } else {
            for (std::int64_t b = 0; b < batch; ++b) {
              const T* dyrow = dy + (b * channels + c) * len;
              T* dxrow = xn->grad.data() + (b * channels + c) * len;
              for (std::int64_t l = 0; l < len; ++l) {
                dxrow[l] += g * is * dyrow[l];
              }
            }
          }
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x, Tape<T>* tape) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xp = x.data();
  T* op = out.data();
  const std::size_t n = static_cast<std::size_t>(x.numel());
  parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
  });
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on, n] {
      xn->ensure_grad();
      const T* xv = xn->value.data();
      const T* dy = on->grad.data();
      T* dx = xn->grad.data();
      parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          if (xv[i] > T(0)) dx[i] += dy[i];
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x, Tape<T>* tape) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const T* xp = x.data();
  T* op = out.data();
  const std::size_t n = static_cast<std::size_t>(x.numel());
  parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) op[i] = stable_sigmoid(xp[i]);
  });
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on, n] {
      xn->ensure_grad();
      const T* yv = on->value.data();
      const T* dy = on->grad.data();
      T* dx = xn->grad.data();
      parallel_for_chunks(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          dx[i] += dy[i] * yv[i] * (T(1) - yv[i]);
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> maxpool1d(const Tensor<T>& x, int kernel, int stride, int pad, Tape<T>* tape) {
  check_3d(x, "maxpool1d input");
  if (kernel < 1 || stride < 1 || pad < 0 || pad >= kernel) {
    throw ShapeMismatch("maxpool1d needs kernel >= 1, stride >= 1, 0 <= pad < kernel");
  }
  const std::int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (len + 2 * pad < kernel) throw ShapeMismatch("maxpool1d input shorter than kernel");
  const std::int64_t out_len = (len + 2 * pad - kernel) / stride + 1;

  Tensor<T> out = Tensor<T>::zeros({batch, channels, out_len});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(
      static_cast<std::size_t>(batch * channels * out_len));
  const T* xp = x.data();
  T* op = out.data();
  std::int32_t* am = argmax->data();

  parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
    const T* xrow = xp + idx * static_cast<std::size_t>(len);
    T* orow = op + idx * static_cast<std::size_t>(out_len);
    std::int32_t* arow = am + idx * static_cast<std::size_t>(out_len);
    for (std::int64_t l = 0; l < out_len; ++l) {
      const std::int64_t start = l * stride - pad;
      T best{};
      std::int64_t best_idx = -1;
      for (std::int64_t t = 0; t < kernel; ++t) {
        const std::int64_t j = start + t;
        if (j < 0 || j >= len) continue;
        if (best_idx < 0 || xrow[j] > best) {  // strict: ties keep lowest index
          best = xrow[j];
          best_idx = j;
        }
      }
      orow[l] = best;
      arow[l] = static_cast<std::int32_t>(best_idx);
    }
  });

  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on, argmax, batch, channels, len, out_len] {
      xn->ensure_grad();
      const T* dy = on->grad.data();
      const std::int32_t* am = argmax->data();
      T* dx = xn->grad.data();
      parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
        const T* dyrow = dy + idx * static_cast<std::size_t>(out_len);
        const std::int32_t* arow = am + idx * static_cast<std::size_t>(out_len);
        T* dxrow = dx + idx * static_cast<std::size_t>(len);
        for (std::int64_t l = 0; l < out_len; ++l) {
          dxrow[arow[l]] += dyrow[l];
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> avgpool1d(const Tensor<T>& x, int kernel, int stride, Tape<T>* tape) {
  check_3d(x, "avgpool1d input");
  if (kernel < 1 || stride < 1) throw ShapeMismatch("avgpool1d needs kernel, stride >= 1");
  const std::int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (len < kernel) throw ShapeMismatch("avgpool1d input shorter than kernel");
  const std::int64_t out_len = (len - kernel) / stride + 1;

  Tensor<T> out = Tensor<T>::zeros({batch, channels, out_len});
  const T* xp = x.data();
  T* op = out.data();
  const T inv_k = T(1) / static_cast<T>(kernel);

  parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
    const T* xrow = xp + idx * static_cast<std::size_t>(len);
    T* orow = op + idx * static_cast<std::size_t>(out_len);
    for (std::int64_t l = 0; l < out_len; ++l) {
      T acc = T(0);
      const T* win = xrow + l * stride;
      for (std::int64_t t = 0; t < kernel; ++t) acc += win[t];
      orow[l] = acc * inv_k;
    }
  });

  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on, kernel, stride, batch, channels, len, out_len, inv_k] {
      xn->ensure_grad();
      const T* dy = on->grad.data();
      T* dx = xn->grad.data();
      parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
        const T* dyrow = dy + idx * static_cast<std::size_t>(out_len);
        T* dxrow = dx + idx * static_cast<std::size_t>(len);
        for (std::int64_t l = 0; l < out_len; ++l) {
          const T g = dyrow[l] * inv_k;
          T* win = dxrow + l * stride;
          for (std::int64_t t = 0; t < kernel; ++t) win[t] += g;
        }
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> adaptive_avg_pool1d(const Tensor<T>& x, Tape<T>* tape) {
  check_3d(x, "adaptive_avg_pool1d input");
  const std::int64_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (len < 1) throw ShapeMismatch("adaptive_avg_pool1d needs L >= 1");

  Tensor<T> out = Tensor<T>::zeros({batch, channels, 1});
  const T* xp = x.data();
  T* op = out.data();
  parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
    const T* xrow = xp + idx * static_cast<std::size_t>(len);
    double acc = 0.0;
    for (std::int64_t l = 0; l < len; ++l) acc += static_cast<double>(xrow[l]);
    op[idx] = static_cast<T>(acc / static_cast<double>(len));
  });

  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on, batch, channels, len] {
      xn->ensure_grad();
      const T* dy = on->grad.data();
      T* dx = xn->grad.data();
      const T inv = T(1) / static_cast<T>(len);
      parallel_for(static_cast<std::size_t>(batch * channels), [&](std::size_t idx) {
        const T g = dy[idx] * inv;
        T* dxrow = dx + idx * static_cast<std::size_t>(len);
        for (std::int64_t l = 0; l < len; ++l) dxrow[l] += g;
      });
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs, Tape<T>* tape) {
  if (xs.empty()) throw ShapeMismatch("concat_channels needs at least one input");
  for (const auto& x : xs) check_3d(x, "concat_channels input");
  const std::int64_t batch = xs[0].dim(0), len = xs[0].dim(2);
  std::int64_t total_c = 0;
  for (const auto& x : xs) {
    if (x.dim(0) != batch || x.dim(2) != len) {
      throw ShapeMismatch("concat_channels inputs must share batch and length");
    }
    total_c += x.dim(1);
  }

  Tensor<T> out = Tensor<T>::zeros({batch, total_c, len});
  T* op = out.data();
  bool needs = false;
  std::int64_t c_off = 0;
  std::vector<std::int64_t> offsets;
  for (const auto& x : xs) {
    offsets.push_back(c_off);
    const std::int64_t c = x.dim(1);
    const T* xp = x.data();
    parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
      std::copy(xp + static_cast<std::int64_t>(b) * c * len,
                xp + (static_cast<std::int64_t>(b) + 1) * c * len,
                op + (static_cast<std::int64_t>(b) * total_c + c_off) * len);
    });
    c_off += c;
    needs = needs || x.requires_grad();
  }

  if (tape && needs) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node());
    auto on = out.node();
    tape->record(out, [nodes, offsets, on, batch, total_c, len] {
      const T* dy = on->grad.data();
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto& node = nodes[i];
        if (!node->requires_grad) continue;
        node->ensure_grad();
        const std::int64_t c = node->shape[1];
        const std::int64_t off = offsets[i];
        T* dx = node->grad.data();
        for (std::int64_t b = 0; b < batch; ++b) {
          const T* src = dy + (b * total_c + off) * len;
          T* dst = dx + b * c * len;
          for (std::int64_t j = 0; j < c * len; ++j) dst[j] += src[j];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Tape<T>* tape) {
  if (!x.defined() || x.shape().size() != 2) throw ShapeMismatch("linear input must be B x F");
  if (!w.defined() || w.shape().size() != 2) throw ShapeMismatch("linear weight must be O x F");
  const std::int64_t batch = x.dim(0), features = x.dim(1), out_dim = w.dim(0);
  if (w.dim(1) != features) {
    throw ShapeMismatch("linear weight expects " + std::to_string(features) + " features");
  }
  if (bias.defined() && bias.numel() != out_dim) {
    throw ShapeMismatch("linear bias must have O entries");
  }

  Tensor<T> out = Tensor<T>::zeros({batch, out_dim});
  const T* xp = x.data();
  const T* wp = w.data();
  const T* bp = bias.defined() ? bias.data() : nullptr;
  T* op = out.data();
  parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
    const T* xrow = xp + b * static_cast<std::size_t>(features);
    T* orow = op + b * static_cast<std::size_t>(out_dim);
    for (std::int64_t o = 0; o < out_dim; ++o) {
      const T* wrow = wp + o * features;
      T acc = bp ? bp[o] : T(0);
      for (std::int64_t f = 0; f < features; ++f) acc += xrow[f] * wrow[f];
      orow[o] = acc;
    }
  });

  const bool needs = x.requires_grad() || w.requires_grad() ||
                     (bias.defined() && bias.requires_grad());
  if (tape && needs) {
    out.set_requires_grad(true);
    auto xn = x.node(), wn = w.node(), on = out.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    tape->record(out, [xn, wn, bn, on, batch, features, out_dim] {
      const T* dy = on->grad.data();
      if (bn && bn->requires_grad) {
        bn->ensure_grad();
        T* db = bn->grad.data();
        for (std::int64_t o = 0; o < out_dim; ++o) {
          T acc = T(0);
          for (std::int64_t b = 0; b < batch; ++b) acc += dy[b * out_dim + o];
          db[o] += acc;
        }
      }
      if (wn->requires_grad) {
        wn->ensure_grad();
        T* dw = wn->grad.data();
        const T* xv = xn->value.data();
        parallel_for(static_cast<std::size_t>(out_dim), [&](std::size_t o) {
          T* dwrow = dw + o * static_cast<std::size_t>(features);
          for (std::int64_t b = 0; b < batch; ++b) {
            const T g = dy[b * out_dim + static_cast<std::int64_t>(o)];
            const T* xrow = xv + b * features;
            for (std::int64_t f = 0; f < features; ++f) dwrow[f] += g * xrow[f];
          }
        });
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        T* dx = xn->grad.data();
        const T* wv = wn->value.data();
        parallel_for(static_cast<std::size_t>(batch), [&](std::size_t b) {
          T* dxrow = dx + b * static_cast<std::size_t>(features);
          for (std::int64_t o = 0; o < out_dim; ++o) {
            const T g = dy[static_cast<std::int64_t>(b) * out_dim + o];
            const T* wrow = wv + o * features;
            for (std::int64_t f = 0; f < features; ++f) dxrow[f] += g * wrow[f];
          }
        });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape, Tape<T>* tape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeMismatch("reshape cannot change element count");
  }
  Tensor<T> out = Tensor<T>::from_values(std::move(shape), x.values());
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xn = x.node(), on = out.node();
    tape->record(out, [xn, on] {
      xn->ensure_grad();
      const T* dy = on->grad.data();
      T* dx = xn->grad.data();
      for (std::size_t i = 0; i < xn->grad.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& z, const Tensor<T>& y, double pos_weight,
                          Tape<T>* tape) {
  if (!z.defined() || !y.defined() || z.numel() != y.numel() || z.numel() == 0) {
    throw ShapeMismatch("bce_with_logits needs equal nonzero logit/label counts");
  }
  const std::int64_t n = z.numel();
  const T* zp = z.data();
  const T* yp = y.data();
  const T pw = static_cast<T>(pos_weight);

  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const T zi = zp[i];
    const T yi = yp[i];
    acc += static_cast<double>(pw * yi * softplus(-zi) + (T(1) - yi) * softplus(zi));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));

  if (tape && z.requires_grad()) {
    out.set_requires_grad(true);
    auto zn = z.node(), yn = y.node(), on = out.node();
    tape->record(out, [zn, yn, on, pw, n] {
      zn->ensure_grad();
      const T g = on->grad[0] / static_cast<T>(n);
      const T* zv = zn->value.data();
      const T* yv = yn->value.data();
      T* dz = zn->grad.data();
      for (std::int64_t i = 0; i < n; ++i) {
        dz[i] += g * (-pw * yv[i] * stable_sigmoid(-zv[i]) +
                      (T(1) - yv[i]) * stable_sigmoid(zv[i]));
      }
    });
  }
  return out;
}

template <typename T>
void fill_normal(Tensor<T>& t, Prng& prng, double mean, double stddev) {
  T* p = t.data();
  const std::int64_t n = t.numel();
  for (std::int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(prng.normal(mean, stddev));
}

// Explicit instantiations: float for training, double for verification.
template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

#define ECGDNN_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv1d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int,     \
                               int, Tape<T>*);                                                 \
  template Tensor<T> batchnorm1d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                    Tensor<T>&, Tensor<T>&, BatchNormMode, double, double,    \
                                    Tape<T>*);                                                 \
  template Tensor<T> relu<T>(const Tensor<T>&, Tape<T>*);                                     \
  template Tensor<T> sigmoid<T>(const Tensor<T>&, Tape<T>*);                                  \
  template Tensor<T> maxpool1d<T>(const Tensor<T>&, int, int, int, Tape<T>*);                 \
  template Tensor<T> avgpool1d<T>(const Tensor<T>&, int, int, Tape<T>*);                      \
  template Tensor<T> adaptive_avg_pool1d<T>(const Tensor<T>&, Tape<T>*);                      \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&, Tape<T>*);             \
  template Tensor<T> linear<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                               Tape<T>*);                                                      \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape, Tape<T>*);                           \
  template Tensor<T> bce_with_logits<T>(const Tensor<T>&, const Tensor<T>&, double,           \
                                        Tape<T>*);                                             \
  template void fill_normal<T>(Tensor<T>&, Prng&, double, double);

ECGDNN_INSTANTIATE_OPS(float)
ECGDNN_INSTANTIATE_OPS(double)

#undef ECGDNN_INSTANTIATE_OPS

}  // namespace ecgdnn
