#include "petrecon/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace petrecon::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

constexpr int kTaps = 9;  // 3x3 kernel

enum class OpKind { Conv, TransposedConv, BatchNorm, Relu, SaveSkip, AddSkip };

struct Op {
  OpKind kind;
  int cin = 0;
  int cout = 0;
  int stride = 1;
  int weight = -1;
  int bias = -1;
  int gamma = -1;
  int beta = -1;
  int running_mean = -1;
  int running_var = -1;
  int bn_index = -1;
  int level = 0;
};

struct Plan {
  std::vector<Op> ops;
  std::vector<ParamBlock> blocks;
  int bn_layers = 0;
};

Plan make_plan(const NetworkConfig& cfg) {
  cfg.validate();
  Plan plan;
  auto add_block = [&](std::string name, std::vector<int> shape, bool trainable) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    plan.blocks.push_back({std::move(name), std::move(shape), std::vector<double>(n, 0.0), trainable});
    return static_cast<int>(plan.blocks.size() - 1);
  };
  auto conv = [&](const std::string& prefix, OpKind kind, int cin, int cout, int stride, bool bias) {
    Op op{kind};
    op.cin = cin;
    op.cout = cout;
    op.stride = stride;
    op.weight = kind == OpKind::Conv ? add_block(prefix + ".weight", {cout, cin, 3, 3}, true)
                                     : add_block(prefix + ".weight", {cin, cout, 3, 3}, true);
    if (bias) op.bias = add_block(prefix + ".bias", {cout}, true);
    plan.ops.push_back(op);
  };
  auto norm_relu = [&](const std::string& prefix, int c) {
    if (cfg.batch_norm) {
      Op op{OpKind::BatchNorm};
      op.cin = op.cout = c;
      op.gamma = add_block(prefix + ".gamma", {c}, true);
      op.beta = add_block(prefix + ".beta", {c}, true);
      op.running_mean = add_block(prefix + ".running_mean", {c}, false);
      op.running_var = add_block(prefix + ".running_var", {c}, false);
      op.bn_index = plan.bn_layers++;
      plan.ops.push_back(op);
    }
    plan.ops.push_back(Op{OpKind::Relu});
  };
  const bool conv_bias = !cfg.batch_norm;
  const int scales = cfg.scales();

  for (int l = 0; l < scales; ++l) {
    for (int k = 0; k < cfg.convs_per_scale; ++k) {
      const std::string prefix = "enc" + std::to_string(l) + ".conv" + std::to_string(k);
      const int cin = k > 0 ? cfg.channels[l] : (l == 0 ? cfg.in_channels : cfg.channels[l - 1]);
      const int stride = (l > 0 && k == 0) ? 2 : 1;
      conv(prefix, OpKind::Conv, cin, cfg.channels[l], stride, conv_bias);
      norm_relu("enc" + std::to_string(l) + ".bn" + std::to_string(k), cfg.channels[l]);
    }
    if (l + 1 < scales) {
      Op save{OpKind::SaveSkip};
      save.level = l;
      plan.ops.push_back(save);
    }
  }
  for (int l = scales - 2; l >= 0; --l) {
    const std::string prefix = "dec" + std::to_string(l);
    conv(prefix + ".up", OpKind::TransposedConv, cfg.channels[l + 1], cfg.channels[l], 2, conv_bias);
    norm_relu(prefix + ".bn0", cfg.channels[l]);
    Op add{OpKind::AddSkip};
    add.level = l;
    plan.ops.push_back(add);
    for (int k = 1; k < cfg.convs_per_scale; ++k) {
      conv(prefix + ".conv" + std::to_string(k), OpKind::Conv, cfg.channels[l], cfg.channels[l], 1, conv_bias);
      norm_relu(prefix + ".bn" + std::to_string(k), cfg.channels[l]);
    }
  }
  conv("out", OpKind::Conv, cfg.channels[0], 1, 1, true);
  return plan;
}

// ---- convolution kernels -------------------------------------------------

// col[(ci*9 + ky*3 + kx), oy*ow + ox] = in[ci, clamp(s*oy+ky-1), clamp(s*ox+kx-1)]
void im2col_replicate(const double* in, int c, int h, int w, int stride, double* col) {
  const int oh = h / stride;
  const int ow = w / stride;
  const std::size_t p = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = in + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + (static_cast<std::size_t>(ci) * kTaps + ky * 3 + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = std::clamp(stride * oy + ky - 1, 0, h - 1);
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          double* dst = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) dst[ox] = src[std::clamp(stride * ox + kx - 1, 0, w - 1)];
        }
      }
    }
  }
}

void col2im_replicate_add(const double* col, int c, int h, int w, int stride, double* in) {
  const int oh = h / stride;
  const int ow = w / stride;
  const std::size_t p = static_cast<std::size_t>(oh) * ow;
  for (int ci = 0; ci < c; ++ci) {
    double* plane = in + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + (static_cast<std::size_t>(ci) * kTaps + ky * 3 + kx) * p;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = std::clamp(stride * oy + ky - 1, 0, h - 1);
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          const double* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) dst[std::clamp(stride * ox + kx - 1, 0, w - 1)] += src[ox];
        }
      }
    }
  }
}

// Transposed stride-2 conv scatter: out[co, 2y+ky-1, 2x+kx-1] += col[co*9+ky*3+kx, y*w+x],
// positions outside the (2h, 2w) output are dropped.
void col2im_upsample_add(const double* col, int c, int h, int w, double* out) {
  const int oh = 2 * h;
  const int ow = 2 * w;
  const std::size_t p = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < c; ++co) {
    double* plane = out + static_cast<std::size_t>(co) * oh * ow;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col + (static_cast<std::size_t>(co) * kTaps + ky * 3 + kx) * p;
        for (int y = 0; y < h; ++y) {
          const int oy = 2 * y + ky - 1;
          if (oy < 0 || oy >= oh) continue;
          double* dst = plane + static_cast<std::size_t>(oy) * ow;
          const double* src = row + static_cast<std::size_t>(y) * w;
          for (int x = 0; x < w; ++x) {
            const int ox = 2 * x + kx - 1;
            if (ox >= 0 && ox < ow) dst[ox] += src[x];
          }
        }
      }
    }
  }
}

// Adjoint gather of col2im_upsample_add.
void im2col_upsample(const double* out, int c, int h, int w, double* col) {
  const int oh = 2 * h;
  const int ow = 2 * w;
  const std::size_t p = static_cast<std::size_t>(h) * w;
  for (int co = 0; co < c; ++co) {
    const double* plane = out + static_cast<std::size_t>(co) * oh * ow;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col + (static_cast<std::size_t>(co) * kTaps + ky * 3 + kx) * p;
        for (int y = 0; y < h; ++y) {
          const int oy = 2 * y + ky - 1;
          double* dst = row + static_cast<std::size_t>(y) * w;
          if (oy < 0 || oy >= oh) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(oy) * ow;
          for (int x = 0; x < w; ++x) {
            const int ox = 2 * x + kx - 1;
            dst[x] = (ox >= 0 && ox < ow) ? src[ox] : 0.0;
          }
        }
      }
    }
  }
}

AlignedBuffer aligned_copy(const std::vector<double>& v) { return AlignedBuffer(v.begin(), v.end()); }

void accumulate(std::vector<double>& dst, const AlignedBuffer& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// db[c] += sum of row c of a (rows x cols) row-major block.
void add_row_sums(std::span<const double> block, int rows, std::size_t cols, std::vector<double>& db) {
  for (int c = 0; c < rows; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < cols; ++i) s += block[c * cols + i];
    db[c] += s;
  }
}

Tensor conv_forward(const Tensor& in, const Op& op, const std::vector<ParamBlock>& blocks) {
  const Shape is = in.shape();
  const Shape os{is.n, op.cout, is.h / op.stride, is.w / op.stride};
  Tensor out(os);
  const std::size_t k = static_cast<std::size_t>(op.cin) * kTaps;
  const std::size_t p = os.plane();
  AlignedBuffer col(k * p);
  const AlignedBuffer wbuf = aligned_copy(blocks[op.weight].values);
  ConstMatMap weight(wbuf.data(), op.cout, k);
  for (int n = 0; n < is.n; ++n) {
    im2col_replicate(in.item(n).data(), op.cin, is.h, is.w, op.stride, col.data());
    MatMap dst(out.item(n).data(), op.cout, p);
    dst.noalias() = weight * ConstMatMap(col.data(), k, p);
    if (op.bias >= 0) {
      for (int c = 0; c < op.cout; ++c) dst.row(c).array() += blocks[op.bias].values[c];
    }
  }
  return out;
}

// Returns d(input); accumulates weight/bias gradients when `grads` is non-null.
Tensor conv_backward(const Tensor& in, const Tensor& dout, const Op& op, const std::vector<ParamBlock>& blocks,
                     std::vector<std::vector<double>>* grads) {
  const Shape is = in.shape();
  const Shape os = dout.shape();
  Tensor din(is);
  const std::size_t k = static_cast<std::size_t>(op.cin) * kTaps;
  const std::size_t p = os.plane();
  AlignedBuffer col(k * p);
  AlignedBuffer dcol(k * p);
  AlignedBuffer dwbuf(grads ? op.cout * k : 0, 0.0);
  const AlignedBuffer wbuf = aligned_copy(blocks[op.weight].values);
  ConstMatMap weight(wbuf.data(), op.cout, k);
  for (int n = 0; n < is.n; ++n) {
    ConstMatMap g(dout.item(n).data(), op.cout, p);
    if (grads) {
      im2col_replicate(in.item(n).data(), op.cin, is.h, is.w, op.stride, col.data());
      MatMap(dwbuf.data(), op.cout, k).noalias() += g * ConstMatMap(col.data(), k, p).transpose();
      if (op.bias >= 0) add_row_sums(dout.item(n), op.cout, p, (*grads)[op.bias]);
    }
    MatMap(dcol.data(), k, p).noalias() = weight.transpose() * g;
    col2im_replicate_add(dcol.data(), op.cin, is.h, is.w, op.stride, din.item(n).data());
  }
  if (grads) accumulate((*grads)[op.weight], dwbuf);
  return din;
}

Tensor tconv_forward(const Tensor& in, const Op& op, const std::vector<ParamBlock>& blocks) {
  const Shape is = in.shape();
  const Shape os{is.n, op.cout, is.h * 2, is.w * 2};
  Tensor out(os);
  const std::size_t k = static_cast<std::size_t>(op.cout) * kTaps;
  const std::size_t p = is.plane();
  AlignedBuffer col(k * p);
  const AlignedBuffer wbuf = aligned_copy(blocks[op.weight].values);
  ConstMatMap weight(wbuf.data(), op.cin, k);
  for (int n = 0; n < is.n; ++n) {
    MatMap(col.data(), k, p).noalias() = weight.transpose() * ConstMatMap(in.item(n).data(), op.cin, p);
    col2im_upsample_add(col.data(), op.cout, is.h, is.w, out.item(n).data());
    if (op.bias >= 0) {
      MatMap dst(out.item(n).data(), op.cout, os.plane());
      for (int c = 0; c < op.cout; ++c) dst.row(c).array() += blocks[op.bias].values[c];
    }
  }
  return out;
}

Tensor tconv_backward(const Tensor& in, const Tensor& dout, const Op& op, const std::vector<ParamBlock>& blocks,
                      std::vector<std::vector<double>>* grads) {
  const Shape is = in.shape();
  Tensor din(is);
  const std::size_t k = static_cast<std::size_t>(op.cout) * kTaps;
  const std::size_t p = is.plane();
  AlignedBuffer dcol(k * p);
  AlignedBuffer dwbuf(grads ? op.cin * k : 0, 0.0);
  const AlignedBuffer wbuf = aligned_copy(blocks[op.weight].values);
  ConstMatMap weight(wbuf.data(), op.cin, k);
  for (int n = 0; n < is.n; ++n) {
    im2col_upsample(dout.item(n).data(), op.cout, is.h, is.w, dcol.data());
    ConstMatMap dc(dcol.data(), k, p);
    MatMap(din.item(n).data(), op.cin, p).noalias() = weight * dc;
    if (grads) {
      MatMap(dwbuf.data(), op.cin, k).noalias() += ConstMatMap(in.item(n).data(), op.cin, p) * dc.transpose();
      if (op.bias >= 0) add_row_sums(dout.item(n), op.cout, dout.shape().plane(), (*grads)[op.bias]);
    }
  }
  if (grads) accumulate((*grads)[op.weight], dwbuf);
  return din;
}

// ---- forward/backward over the plan -------------------------------------

struct BatchNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
};

struct Trace {
  std::vector<Tensor> inputs;  // input of each op
  std::vector<Tensor> outputs; // ReLU outputs
  std::vector<BatchNormCache> bn;
  std::vector<BatchNormStats> stats;
};

Tensor batch_norm_forward(const Tensor& in, const Op& op, const NetworkWeights& w, Mode mode, Trace* trace) {
  const Shape s = in.shape();
  const auto& gamma = w.blocks[op.gamma].values;
  const auto& beta = w.blocks[op.beta].values;
  const double eps = w.config.bn_epsilon;
  Tensor out(s);
  const std::size_t plane = s.plane();
  const double m = static_cast<double>(s.n) * plane;

  if (mode == Mode::Eval) {
    const auto& rm = w.blocks[op.running_mean].values;
    const auto& rv = w.blocks[op.running_var].values;
    for (int c = 0; c < s.c; ++c) {
      const double scale = gamma[c] / std::sqrt(rv[c] + eps);
      const double shift = beta[c] - scale * rm[c];
      for (int n = 0; n < s.n; ++n) {
        const auto src = in.plane(n, c);
        auto dst = out.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = scale * src[i] + shift;
      }
    }
    return out;
  }

  BatchNormCache cache{Tensor(s), std::vector<double>(s.c)};
  BatchNormStats stats{std::vector<double>(s.c), std::vector<double>(s.c)};
  for (int c = 0; c < s.c; ++c) {
    double mu = 0.0;
    for (int n = 0; n < s.n; ++n) {
      for (double v : in.plane(n, c)) mu += v;
    }
    mu /= m;
    double var = 0.0;
    for (int n = 0; n < s.n; ++n) {
      for (double v : in.plane(n, c)) var += (v - mu) * (v - mu);
    }
    var /= m;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std[c] = inv_std;
    stats.mean[c] = mu;
    stats.var[c] = m > 1 ? var * m / (m - 1) : var;
    for (int n = 0; n < s.n; ++n) {
      const auto src = in.plane(n, c);
      auto xh = cache.xhat.plane(n, c);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (src[i] - mu) * inv_std;
        dst[i] = gamma[c] * xh[i] + beta[c];
      }
    }
  }
  if (trace) {
    trace->bn[op.bn_index] = std::move(cache);
    trace->stats[op.bn_index] = std::move(stats);
  }
  return out;
}

Tensor batch_norm_backward(const Tensor& dout, const Op& op, const NetworkWeights& w, Mode mode,
                           const Trace& trace, std::vector<std::vector<double>>* grads) {
  const Shape s = dout.shape();
  const auto& gamma = w.blocks[op.gamma].values;
  const std::size_t plane = s.plane();
  Tensor din(s);
  if (mode == Mode::Eval) {
    const auto& rv = w.blocks[op.running_var].values;
    for (int c = 0; c < s.c; ++c) {
      const double scale = gamma[c] / std::sqrt(rv[c] + w.config.bn_epsilon);
      for (int n = 0; n < s.n; ++n) {
        const auto g = dout.plane(n, c);
        auto dst = din.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) dst[i] = scale * g[i];
      }
    }
    return din;
  }
  const auto& cache = trace.bn[op.bn_index];
  const double m = static_cast<double>(s.n) * plane;
  for (int c = 0; c < s.c; ++c) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const auto g = dout.plane(n, c);
      const auto xh = cache.xhat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += g[i];
        sum_gx += g[i] * xh[i];
      }
    }
    if (grads) {
      (*grads)[op.gamma][c] += sum_gx;
      (*grads)[op.beta][c] += sum_g;
    }
    const double k = gamma[c] * cache.inv_std[c] / m;
    for (int n = 0; n < s.n; ++n) {
      const auto g = dout.plane(n, c);
      const auto xh = cache.xhat.plane(n, c);
      auto dst = din.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = k * (m * g[i] - sum_g - xh[i] * sum_gx);
    }
  }
  return din;
}

void check_input(const NetworkConfig& cfg, const Tensor& input) {
  const Shape s = input.shape();
  if (s.c != cfg.in_channels) {
    throw DimensionError("network input needs " + std::to_string(cfg.in_channels) + " channels, got " +
                         std::to_string(s.c));
  }
  const int factor = 1 << (cfg.scales() - 1);
  if (s.n < 1 || s.h < 1 || s.w < 1 || s.h % factor != 0 || s.w % factor != 0) {
    throw DimensionError("network input spatial size must be a positive multiple of " + std::to_string(factor));
  }
}

const Plan& cached_plan(const NetworkConfig& cfg) {
  thread_local NetworkConfig last_cfg;
  thread_local Plan last_plan;
  thread_local bool valid = false;
  if (!valid || !(last_cfg == cfg)) {
    last_plan = make_plan(cfg);
    last_cfg = cfg;
    valid = true;
  }
  return last_plan;
}

void check_weights(const NetworkWeights& w, const Plan& plan) {
  if (w.blocks.size() != plan.blocks.size()) throw DimensionError("network weights do not match configuration");
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    if (w.blocks[b].values.size() != plan.blocks[b].values.size()) {
      throw DimensionError("network weight block '" + plan.blocks[b].name + "' has the wrong size");
    }
  }
}

// Runs the layer stack on the (already scaled) input; the residual is added by the caller.
Tensor run_forward(const NetworkWeights& w, const Plan& plan, const Tensor& input, Mode mode, Trace* trace) {
  std::vector<Tensor> skips(w.config.scales());
  if (trace) {
    trace->inputs.assign(plan.ops.size(), Tensor());
    trace->outputs.assign(plan.ops.size(), Tensor());
    trace->bn.assign(plan.bn_layers, {});
    trace->stats.assign(plan.bn_layers, {});
  }
  Tensor h = input;
  for (std::size_t i = 0; i < plan.ops.size(); ++i) {
    const Op& op = plan.ops[i];
    switch (op.kind) {
      case OpKind::Conv:
        if (trace) trace->inputs[i] = h;
        h = conv_forward(h, op, w.blocks);
        break;
      case OpKind::TransposedConv:
        if (trace) trace->inputs[i] = h;
        h = tconv_forward(h, op, w.blocks);
        break;
      case OpKind::BatchNorm:
        h = batch_norm_forward(h, op, w, mode, trace);
        break;
      case OpKind::Relu:
        for (auto& v : h.values()) v = v > 0.0 ? v : 0.0;
        if (trace) trace->outputs[i] = h;
        break;
      case OpKind::SaveSkip:
        skips[op.level] = h;
        break;
      case OpKind::AddSkip: {
        const auto& s = skips[op.level];
        if (!(s.shape() == h.shape())) throw DimensionError("skip connection shape mismatch");
        for (std::size_t k = 0; k < h.numel(); ++k) h[k] += s[k];
        break;
      }
    }
  }
  return h;
}

Tensor run_backward(const NetworkWeights& w, const Plan& plan, const Trace& trace, Tensor grad, Mode mode,
                    std::vector<std::vector<double>>* grads) {
  std::vector<Tensor> skip_grads(w.config.scales());
  for (std::size_t i = plan.ops.size(); i-- > 0;) {
    const Op& op = plan.ops[i];
    switch (op.kind) {
      case OpKind::Conv:
        grad = conv_backward(trace.inputs[i], grad, op, w.blocks, grads);
        break;
      case OpKind::TransposedConv:
        grad = tconv_backward(trace.inputs[i], grad, op, w.blocks, grads);
        break;
      case OpKind::BatchNorm:
        grad = batch_norm_backward(grad, op, w, mode, trace, grads);
        break;
      case OpKind::Relu: {
        const auto& out = trace.outputs[i];
        for (std::size_t k = 0; k < grad.numel(); ++k) {
          if (!(out[k] > 0.0)) grad[k] = 0.0;
        }
        break;
      }
      case OpKind::SaveSkip: {
        const auto& sg = skip_grads[op.level];
        for (std::size_t k = 0; k < grad.numel(); ++k) grad[k] += sg[k];
        break;
      }
      case OpKind::AddSkip:
        skip_grads[op.level] = grad;
        break;
    }
  }
  return grad;
}

Tensor scaled_copy(const Tensor& t, double s) {
  Tensor out = t;
  if (s != 1.0) {
    for (auto& v : out.values()) v *= s;
  }
  return out;
}

// Full network output (with residual and input scaling) given the scaled input
// and the layer-stack output.
Tensor finish_output(const NetworkWeights& w, const Tensor& scaled_input, Tensor stack_out) {
  const int center = w.config.center_channel();
  if (w.config.residual) {
    for (int n = 0; n < stack_out.shape().n; ++n) {
      auto dst = stack_out.plane(n, 0);
      const auto src = scaled_input.plane(n, center);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  if (w.input_scale != 1.0) {
    const double inv = 1.0 / w.input_scale;
    for (auto& v : stack_out.values()) v *= inv;
  }
  return stack_out;
}

// Gradient w.r.t. the unscaled input from the gradient w.r.t. the final output.
Tensor input_gradient(const NetworkWeights& w, const Plan& plan, const Trace& trace, const Tensor& dout,
                      const Shape& input_shape, Mode mode, std::vector<std::vector<double>>* grads) {
  const double k = w.input_scale;
  Tensor dstack = scaled_copy(dout, 1.0 / k);
  Tensor din = run_backward(w, plan, trace, dstack, mode, grads);
  if (k != 1.0) {
    for (auto& v : din.values()) v *= k;
  }
  if (!(din.shape() == input_shape)) throw DimensionError("input gradient shape mismatch");
  if (w.config.residual) {
    const int center = w.config.center_channel();
    for (int n = 0; n < input_shape.n; ++n) {
      auto dst = din.plane(n, center);
      const auto src = dout.plane(n, 0);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return din;
}

}  // namespace

void NetworkConfig::validate() const {
  if (in_channels != 5) throw ConfigError("network input must have 5 channels");
  if (kernel_size != 3) throw ConfigError("only 3x3 kernels are supported");
  if (channels.empty()) throw ConfigError("network needs at least one scale");
  for (int c : channels) {
    if (c < 1) throw ConfigError("channel counts must be >= 1");
  }
  if (convs_per_scale < 1) throw ConfigError("convs_per_scale must be >= 1");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in [0, 1)");
  if (!(bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be > 0");
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.values.size();
  return n;
}

std::vector<ParamBlock> expected_blocks(const NetworkConfig& config) { return make_plan(config).blocks; }

NetworkWeights init_weights(const NetworkConfig& config, std::uint64_t seed) {
  Plan plan = make_plan(config);
  NetworkWeights w{config, 1.0, std::move(plan.blocks)};
  std::mt19937_64 rng(seed);
  for (auto& b : w.blocks) {
    const auto& name = b.name;
    auto ends_with = [&](const char* s) { return name.size() >= std::string(s).size() &&
                                                 name.compare(name.size() - std::string(s).size(), std::string::npos, s) == 0; };
    if (ends_with(".weight")) {
      // fan-in: cin * 9 for convs, shape (cout, cin, 3, 3); (cin, cout, 3, 3) for transposed.
      const bool transposed = name.find(".up.") != std::string::npos;
      const int fan_in = (transposed ? b.shape[0] : b.shape[1]) * kTaps;
      double stdev = std::sqrt(2.0 / fan_in);
      if (name.rfind("out.", 0) == 0) stdev *= 0.1;
      std::normal_distribution<double> dist(0.0, stdev);
      for (auto& v : b.values) v = dist(rng);
    } else if (ends_with(".gamma") || ends_with(".running_var")) {
      std::fill(b.values.begin(), b.values.end(), 1.0);
    } else {
      std::fill(b.values.begin(), b.values.end(), 0.0);
    }
  }
  return w;
}

NetworkWeights identity_weights(const NetworkConfig& config) {
  Plan plan = make_plan(config);
  NetworkWeights w{config, 1.0, std::move(plan.blocks)};
  for (auto& b : w.blocks) {
    const bool is_var = b.name.size() >= 12 && b.name.compare(b.name.size() - 12, 12, ".running_var") == 0;
    std::fill(b.values.begin(), b.values.end(), is_var ? 1.0 : 0.0);
  }
  return w;
}

Tensor forward(const NetworkWeights& w, const Tensor& input, Mode mode) {
  check_input(w.config, input);
  const Plan& plan = cached_plan(w.config);
  check_weights(w, plan);
  const Tensor scaled = scaled_copy(input, w.input_scale);
  return finish_output(w, scaled, run_forward(w, plan, scaled, mode, nullptr));
}

double l2_loss(const Tensor& pred, const Tensor& label) {
  if (!(pred.shape() == label.shape())) throw DimensionError("l2_loss: shape mismatch");
  if (pred.numel() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = pred[i] - label[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

WeightGradients backward_weights(const NetworkWeights& w, const Tensor& input, const Tensor& label) {
  check_input(w.config, input);
  const Plan& plan = cached_plan(w.config);
  check_weights(w, plan);
  Trace trace;
  const Tensor scaled = scaled_copy(input, w.input_scale);
  WeightGradients out;
  out.prediction = finish_output(w, scaled, run_forward(w, plan, scaled, Mode::Train, &trace));
  out.loss = l2_loss(out.prediction, label);

  Tensor dout(out.prediction.shape());
  const double k = 2.0 / static_cast<double>(dout.numel());
  for (std::size_t i = 0; i < dout.numel(); ++i) dout[i] = k * (out.prediction[i] - label[i]);

  out.grads.resize(w.blocks.size());
  for (std::size_t b = 0; b < w.blocks.size(); ++b) out.grads[b].assign(w.blocks[b].values.size(), 0.0);
  input_gradient(w, plan, trace, dout, input.shape(), Mode::Train, &out.grads);
  out.batch_stats = std::move(trace.stats);
  return out;
}

void update_running_statistics(NetworkWeights& w, const std::vector<BatchNormStats>& stats) {
  const Plan& plan = cached_plan(w.config);
  const double mom = w.config.bn_momentum;
  for (const auto& op : plan.ops) {
    if (op.kind != OpKind::BatchNorm) continue;
    const auto& s = stats.at(op.bn_index);
    auto& rm = w.blocks[op.running_mean].values;
    auto& rv = w.blocks[op.running_var].values;
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = mom * rm[c] + (1.0 - mom) * s.mean[c];
      rv[c] = mom * rv[c] + (1.0 - mom) * s.var[c];
    }
  }
}

InputVjp vjp_input(const NetworkWeights& w, const Tensor& input, const Tensor& cotangent, Mode mode) {
  check_input(w.config, input);
  const Plan& plan = cached_plan(w.config);
  check_weights(w, plan);
  Trace trace;
  const Tensor scaled = scaled_copy(input, w.input_scale);
  InputVjp out;
  out.output = finish_output(w, scaled, run_forward(w, plan, scaled, mode, &trace));
  if (!(cotangent.shape() == out.output.shape())) throw DimensionError("vjp_input: cotangent shape mismatch");
  out.gradient = input_gradient(w, plan, trace, cotangent, input.shape(), mode, nullptr);
  return out;
}

Tensor slice_windows(const Volume& v, int in_channels) {
  const auto& g = v.grid();
  Tensor t(Shape{g.nz, in_channels, g.ny, g.nx});
  const int half = in_channels / 2;
  for (int k = 0; k < g.nz; ++k) {
    for (int c = 0; c < in_channels; ++c) {
      const int src = std::clamp(k + c - half, 0, g.nz - 1);
      const auto s = v.slice(src);
      std::copy(s.begin(), s.end(), t.plane(k, c).begin());
    }
  }
  return t;
}

namespace {
Volume output_volume(const Tensor& out, const ImageGrid& grid) {
  Volume v(grid);
  for (int k = 0; k < grid.nz; ++k) {
    const auto src = out.plane(k, 0);
    std::copy(src.begin(), src.end(), v.slice(k).begin());
  }
  return v;
}
}  // namespace

Volume apply_to_volume(const NetworkWeights& w, const Volume& alpha) {
  return output_volume(forward(w, slice_windows(alpha, w.config.in_channels), Mode::Eval), alpha.grid());
}

VolumeVjp volume_vjp(const NetworkWeights& w, const Volume& alpha, const Volume& cotangent) {
  require_same_grid(alpha, cotangent, "volume_vjp");
  const auto& g = alpha.grid();
  Tensor cot(Shape{g.nz, 1, g.ny, g.nx});
  for (int k = 0; k < g.nz; ++k) {
    const auto s = cotangent.slice(k);
    std::copy(s.begin(), s.end(), cot.plane(k, 0).begin());
  }
  const InputVjp r = vjp_input(w, slice_windows(alpha, w.config.in_channels), cot, Mode::Eval);
  VolumeVjp out{output_volume(r.output, g), Volume(g)};
  const int half = w.config.in_channels / 2;
  for (int k = 0; k < g.nz; ++k) {
    for (int c = 0; c < w.config.in_channels; ++c) {
      auto dst = out.gradient.slice(std::clamp(k + c - half, 0, g.nz - 1));
      const auto src = r.gradient.plane(k, c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return out;
}

Volume denoise_volume(const NetworkWeights& w, const Volume& volume) {
  if (volume.grid().nz < 1) throw DimensionError("denoise_volume needs at least one slice");
  Volume out = apply_to_volume(w, volume);
  for (auto& v : out.values()) v = std::max(v, 0.0);
  return out;
}

}  // namespace petrecon::nn
