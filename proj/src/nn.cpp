#include "mixinterp/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mixinterp/random.hpp"

namespace mixinterp {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void im2col(const float* x, int c, int h, int w, const Conv2d& conv, int ho, int wo, float* col) {
  const int k = conv.kernel;
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = x + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * conv.stride - conv.pad + ky;
          float* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * conv.stride - conv.pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int c, int h, int w, const Conv2d& conv, int ho, int wo, float* x) {
  const int k = conv.kernel;
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  for (int ch = 0; ch < c; ++ch) {
    float* plane = x + static_cast<std::size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(ch) * k * k + ky * k + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * conv.stride - conv.pad + ky;
          if (iy < 0 || iy >= h) continue;
          const float* src = row + static_cast<std::size_t>(oy) * wo;
          float* dst = plane + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * conv.stride - conv.pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void relu_inplace(Tensor& t) {
  for (float& v : t.data) v = v > 0.0f ? v : 0.0f;
}

// dy masked by (activation > 0).
Tensor relu_backward(const Tensor& activation, const Tensor& dy) {
  Tensor out = dy;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (!(activation.data[i] > 0.0f)) out.data[i] = 0.0f;
  return out;
}

Conv2d make_conv(int in, int out, int kernel, int stride, double init_scale, SeededRandom& rng) {
  Conv2d conv;
  conv.in = in;
  conv.out = out;
  conv.kernel = kernel;
  conv.stride = stride;
  conv.pad = kernel / 2;
  const double fan_in = static_cast<double>(in) * kernel * kernel;
  const double std = init_scale * std::sqrt(2.0 / fan_in);
  conv.weight.resize(static_cast<std::size_t>(out) * in * kernel * kernel);
  for (float& v : conv.weight) v = static_cast<float>(rng.normal(0.0, std));
  conv.bias.assign(out, 0.0f);
  return conv;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

int ArchConfig::depth() const { return 2 + 2 * num_blocks(); }

int ArchConfig::final_resolution() const {
  int r = image_size;
  for (int s : stage_strides) r = (r + 2 - 3) / s + 1;
  return r;
}

void ArchConfig::validate() const {
  if (in_channels <= 0 || image_size <= 0 || num_classes <= 1 || stem_width <= 0)
    throw std::invalid_argument("architecture needs positive channels/size and at least two classes");
  if (stage_widths.size() != stage_strides.size())
    throw std::invalid_argument("stage_widths and stage_strides differ in length");
  if (!stage_widths.empty() && blocks_per_stage <= 0)
    throw std::invalid_argument("blocks_per_stage must be positive when stages are present");
  for (int w : stage_widths)
    if (w <= 0) throw std::invalid_argument("stage widths must be positive");
  for (int s : stage_strides)
    if (s != 1 && s != 2) throw std::invalid_argument("stage strides must be 1 or 2");
  if (final_resolution() < 1) throw std::invalid_argument("image too small for the stage strides");
}

std::string ArchConfig::descriptor() const {
  std::ostringstream os;
  os << "in_channels=" << in_channels << '\n'
     << "image_size=" << image_size << '\n'
     << "num_classes=" << num_classes << '\n'
     << "stem_width=" << stem_width << '\n'
     << "stage_widths=" << join_ints(stage_widths) << '\n'
     << "stage_strides=" << join_ints(stage_strides) << '\n'
     << "blocks_per_stage=" << blocks_per_stage << '\n'
     << "batch_norm=" << (batch_norm ? 1 : 0) << '\n';
  return os.str();
}

ArchConfig ArchConfig::parse_descriptor(const std::string& text) {
  ArchConfig a;
  a.stage_widths.clear();
  a.stage_strides.clear();
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("malformed architecture line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "in_channels") a.in_channels = std::stoi(val);
    else if (key == "image_size") a.image_size = std::stoi(val);
    else if (key == "num_classes") a.num_classes = std::stoi(val);
    else if (key == "stem_width") a.stem_width = std::stoi(val);
    else if (key == "stage_widths") a.stage_widths = parse_int_list(val);
    else if (key == "stage_strides") a.stage_strides = parse_int_list(val);
    else if (key == "blocks_per_stage") a.blocks_per_stage = std::stoi(val);
    else if (key == "batch_norm") a.batch_norm = std::stoi(val) != 0;
    else throw std::invalid_argument("unknown architecture key: " + key);
  }
  a.validate();
  return a;
}

Tensor Conv2d::forward(const Tensor& x) const {
  if (x.c != in) throw std::invalid_argument("conv input channel mismatch");
  const int ho = out_size(x.h);
  const int wo = out_size(x.w);
  const int kk = in * kernel * kernel;
  const int p = ho * wo;
  Tensor y(x.n, out, ho, wo);
  std::vector<float> col(static_cast<std::size_t>(kk) * p);
  ConstMapMat wmat(weight.data(), out, kk);
  Eigen::Map<const Eigen::VectorXf> b(bias.data(), out);
  for (int i = 0; i < x.n; ++i) {
    im2col(x.sample(i), x.c, x.h, x.w, *this, ho, wo, col.data());
    MapMat ymat(y.sample(i), out, p);
    ymat.noalias() = wmat * ConstMapMat(col.data(), kk, p);
    ymat.colwise() += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy, Conv2d* grad, bool need_input_grad) const {
  const int ho = dy.h;
  const int wo = dy.w;
  const int kk = in * kernel * kernel;
  const int p = ho * wo;
  Tensor dx;
  if (need_input_grad) dx = Tensor(x.n, x.c, x.h, x.w);
  std::vector<float> col(static_cast<std::size_t>(kk) * p);
  ConstMapMat wmat(weight.data(), out, kk);
  for (int i = 0; i < x.n; ++i) {
    ConstMapMat dymat(dy.sample(i), out, p);
    if (grad != nullptr) {
      im2col(x.sample(i), x.c, x.h, x.w, *this, ho, wo, col.data());
      MapMat gw(grad->weight.data(), out, kk);
      gw.noalias() += dymat * ConstMapMat(col.data(), kk, p).transpose();
      // Fixed-order sum: Eigen's vectorised reduction depends on buffer alignment.
      for (int o = 0; o < out; ++o) {
        const float* row = dy.sample(i) + static_cast<std::size_t>(o) * p;
        double s = 0.0;
        for (int k = 0; k < p; ++k) s += row[k];
        grad->bias[o] += static_cast<float>(s);
      }
    }
    if (!need_input_grad) continue;
    MapMat(col.data(), kk, p).noalias() = wmat.transpose() * dymat;
    col2im(col.data(), x.c, x.h, x.w, *this, ho, wo, dx.sample(i));
  }
  return dx;
}

namespace {

BatchNorm make_norm(int channels) {
  BatchNorm bn;
  bn.channels = channels;
  bn.gamma.assign(channels, 1.0f);
  bn.beta.assign(channels, 0.0f);
  bn.running_mean.assign(channels, 0.0f);
  bn.running_var.assign(channels, 1.0f);
  return bn;
}

// Normalises x in place (no-op for a disabled norm with zero channels).
void norm_forward(const BatchNorm& bn, Tensor& x, Mode mode, NormCache& cache) {
  if (bn.channels == 0) return;
  const std::size_t plane = x.plane();
  const double count = static_cast<double>(x.n) * plane;
  cache.inv_std.assign(x.c, 0.0f);
  cache.batch_mean.assign(x.c, 0.0f);
  cache.batch_var.assign(x.c, 0.0f);
  for (int c = 0; c < x.c; ++c) {
    double mean;
    double var;
    if (mode == Mode::training) {
      double s = 0.0;
      double s2 = 0.0;
      for (int i = 0; i < x.n; ++i) {
        const float* p = x.sample(i) + c * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          s += p[j];
          s2 += static_cast<double>(p[j]) * p[j];
        }
      }
      mean = s / count;
      var = std::max(0.0, s2 / count - mean * mean);
      cache.batch_mean[c] = static_cast<float>(mean);
      cache.batch_var[c] = static_cast<float>(count > 1 ? var * count / (count - 1) : var);
    } else {
      mean = bn.running_mean[c];
      var = bn.running_var[c];
    }
    cache.inv_std[c] = static_cast<float>(1.0 / std::sqrt(var + bn.eps));
  }
  cache.normalized = Tensor(x.n, x.c, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      const float mean = mode == Mode::training ? cache.batch_mean[c] : bn.running_mean[c];
      const float inv = cache.inv_std[c];
      float* p = x.sample(i) + c * plane;
      float* xh = cache.normalized.sample(i) + c * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        xh[j] = (p[j] - mean) * inv;
        p[j] = bn.gamma[c] * xh[j] + bn.beta[c];
      }
    }
  }
}

Tensor norm_backward(const BatchNorm& bn, const NormCache& cache, const Tensor& dy, Mode mode, BatchNorm* grad) {
  if (bn.channels == 0) return dy;
  const std::size_t plane = dy.plane();
  const double count = static_cast<double>(dy.n) * plane;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.sample(i) + c * plane;
      const float* xh = cache.normalized.sample(i) + c * plane;
      for (std::size_t j = 0; j < plane; ++j) {
        sum_dy += g[j];
        sum_dy_xh += static_cast<double>(g[j]) * xh[j];
      }
    }
    if (grad != nullptr) {
      grad->gamma[c] += static_cast<float>(sum_dy_xh);
      grad->beta[c] += static_cast<float>(sum_dy);
    }
    const float scale = bn.gamma[c] * cache.inv_std[c];
    const float mean_dy = static_cast<float>(sum_dy / count);
    const float mean_dy_xh = static_cast<float>(sum_dy_xh / count);
    for (int i = 0; i < dy.n; ++i) {
      const float* g = dy.sample(i) + c * plane;
      const float* xh = cache.normalized.sample(i) + c * plane;
      float* d = dx.sample(i) + c * plane;
      if (mode == Mode::training) {
        for (std::size_t j = 0; j < plane; ++j) d[j] = scale * (g[j] - mean_dy - xh[j] * mean_dy_xh);
      } else {
        for (std::size_t j = 0; j < plane; ++j) d[j] = scale * g[j];
      }
    }
  }
  return dx;
}

void fold_running(BatchNorm& bn, const NormCache& cache) {
  if (bn.channels == 0 || cache.batch_mean.empty()) return;
  for (int c = 0; c < bn.channels; ++c) {
    bn.running_mean[c] = (1.0f - bn.momentum) * bn.running_mean[c] + bn.momentum * cache.batch_mean[c];
    bn.running_var[c] = (1.0f - bn.momentum) * bn.running_var[c] + bn.momentum * cache.batch_var[c];
  }
}

void add_inplace(Tensor& a, const Tensor& b) {
  for (std::size_t j = 0; j < a.data.size(); ++j) a.data[j] += b.data[j];
}

}  // namespace

Model Model::build(const ArchConfig& arch, std::uint64_t seed) {
  arch.validate();
  SeededRandom rng(seed);
  Model m;
  m.arch_ = arch;
  const bool bn = arch.batch_norm;
  m.stem_ = make_conv(arch.in_channels, arch.stem_width, 3, 1, 1.0, rng);
  if (bn) m.stem_bn_ = make_norm(arch.stem_width);
  int width = arch.stem_width;
  for (std::size_t s = 0; s < arch.stage_widths.size(); ++s) {
    for (int b = 0; b < arch.blocks_per_stage; ++b) {
      const int stride = b == 0 ? arch.stage_strides[s] : 1;
      const int out = arch.stage_widths[s];
      ResidualBlock block;
      block.conv1 = make_conv(width, out, 3, stride, 1.0, rng);
      // Damped residual branch keeps the stack well conditioned at init.
      block.conv2 = make_conv(out, out, 3, 1, bn ? 1.0 : 0.25, rng);
      if (bn) {
        block.bn1 = make_norm(out);
        block.bn2 = make_norm(out);
        std::fill(block.bn2.gamma.begin(), block.bn2.gamma.end(), 0.25f);
      }
      if (stride != 1 || out != width) {
        block.has_projection = true;
        block.projection = make_conv(width, out, 1, stride, 1.0, rng);
        block.projection.pad = 0;
        if (bn) block.projection_bn = make_norm(out);
      }
      m.blocks_.push_back(std::move(block));
      width = out;
    }
  }
  m.head_.in = width;
  m.head_.out = arch.num_classes;
  m.head_.weight.resize(static_cast<std::size_t>(width) * arch.num_classes);
  const double head_std = std::sqrt(1.0 / width);
  for (float& v : m.head_.weight) v = static_cast<float>(rng.normal(0.0, head_std));
  m.head_.bias.assign(arch.num_classes, 0.0f);
  return m;
}

Model Model::zeros_like() const {
  Model z = *this;
  for (auto* p : z.state()) std::fill(p->begin(), p->end(), 0.0f);
  return z;
}

int Model::stage_output_boundary(int stage) const {
  if (stage < 0) return 1;
  if (stage >= static_cast<int>(arch_.stage_widths.size())) throw std::invalid_argument("stage index out of range");
  return 2 + (stage + 1) * arch_.blocks_per_stage - 1;
}

ForwardTrace Model::forward(const Tensor& x, int from, Mode mode) const {
  if (from < 0 || from >= num_boundaries()) throw std::invalid_argument("forward: boundary out of range");
  ForwardTrace t;
  t.start = from;
  t.mode = mode;
  t.boundary.resize(num_boundaries());
  t.blocks.resize(blocks_.size());
  t.boundary[from] = x;
  if (from == 0) {
    Tensor s = stem_.forward(x);
    norm_forward(stem_bn_, s, mode, t.stem_norm);
    relu_inplace(s);
    t.boundary[1] = std::move(s);
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const int in_b = static_cast<int>(i) + 1;
    if (in_b < from) continue;
    const ResidualBlock& blk = blocks_[i];
    BlockCache& cache = t.blocks[i];
    const Tensor& in = t.boundary[in_b];
    Tensor h = blk.conv1.forward(in);
    norm_forward(blk.bn1, h, mode, cache.norm1);
    relu_inplace(h);
    Tensor y = blk.conv2.forward(h);
    norm_forward(blk.bn2, y, mode, cache.norm2);
    if (blk.has_projection) {
      Tensor sc = blk.projection.forward(in);
      norm_forward(blk.projection_bn, sc, mode, cache.projection_norm);
      add_inplace(y, sc);
    } else {
      add_inplace(y, in);
    }
    relu_inplace(y);
    cache.hidden = std::move(h);
    t.boundary[in_b + 1] = std::move(y);
  }
  const Tensor& last = t.boundary.back();
  t.pooled = Tensor(last.n, last.c, 1, 1);
  const float inv = 1.0f / static_cast<float>(last.plane());
  for (int i = 0; i < last.n; ++i) {
    for (int c = 0; c < last.c; ++c) {
      const float* p = last.sample(i) + c * last.plane();
      double s = 0.0;
      for (std::size_t j = 0; j < last.plane(); ++j) s += p[j];
      t.pooled.at(i, c, 0, 0) = static_cast<float>(s) * inv;
    }
  }
  t.logits = Tensor(last.n, head_.out, 1, 1);
  ConstMapMat w(head_.weight.data(), head_.out, head_.in);
  ConstMapMat pooled(t.pooled.data.data(), last.n, head_.in);
  MapMat logits(t.logits.data.data(), last.n, head_.out);
  logits.noalias() = pooled * w.transpose();
  for (int i = 0; i < last.n; ++i)
    for (int k = 0; k < head_.out; ++k) logits(i, k) += head_.bias[k];
  return t;
}

std::vector<Tensor> Model::backward(const ForwardTrace& trace, const Tensor& dlogits, Model* grads, int to) const {
  if (to < trace.start) throw std::invalid_argument("backward: target boundary precedes the forward start");
  const Mode mode = trace.mode;
  std::vector<Tensor> g(num_boundaries());
  const Tensor& last = trace.boundary.back();
  const int n = last.n;
  ConstMapMat w(head_.weight.data(), head_.out, head_.in);
  ConstMapMat dl(dlogits.data.data(), n, head_.out);
  if (grads != nullptr) {
    MapMat gw(grads->head_.weight.data(), head_.out, head_.in);
    gw.noalias() += dl.transpose() * ConstMapMat(trace.pooled.data.data(), n, head_.in);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < head_.out; ++k) grads->head_.bias[k] += dl(i, k);
  }
  RowMat dpooled = dl * w;
  Tensor dlast(last.n, last.c, last.h, last.w);
  const float inv = 1.0f / static_cast<float>(last.plane());
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < last.c; ++c) {
      float* p = dlast.sample(i) + c * last.plane();
      std::fill(p, p + last.plane(), dpooled(i, c) * inv);
    }
  g.back() = std::move(dlast);

  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
    const int in_b = i + 1;
    if (in_b < to) break;
    const ResidualBlock& blk = blocks_[i];
    const BlockCache& cache = trace.blocks[i];
    ResidualBlock* gblk = grads ? &grads->blocks_[i] : nullptr;
    const Tensor ds = relu_backward(trace.boundary[in_b + 1], g[in_b + 1]);
    const Tensor da2 = norm_backward(blk.bn2, cache.norm2, ds, mode, gblk ? &gblk->bn2 : nullptr);
    const Tensor dh = blk.conv2.backward(cache.hidden, da2, gblk ? &gblk->conv2 : nullptr);
    const Tensor da1 =
        norm_backward(blk.bn1, cache.norm1, relu_backward(cache.hidden, dh), mode, gblk ? &gblk->bn1 : nullptr);
    Tensor dx = blk.conv1.backward(trace.boundary[in_b], da1, gblk ? &gblk->conv1 : nullptr);
    if (blk.has_projection) {
      const Tensor dp = norm_backward(blk.projection_bn, cache.projection_norm, ds, mode,
                                      gblk ? &gblk->projection_bn : nullptr);
      add_inplace(dx, blk.projection.backward(trace.boundary[in_b], dp, gblk ? &gblk->projection : nullptr));
    } else {
      add_inplace(dx, ds);
    }
    g[in_b] = std::move(dx);
  }
  if (to == 0 || (grads != nullptr && trace.start == 0)) {
    const Tensor da = norm_backward(stem_bn_, trace.stem_norm, relu_backward(trace.boundary[1], g[1]), mode,
                                    grads ? &grads->stem_bn_ : nullptr);
    Tensor dx = stem_.backward(trace.boundary[0], da, grads ? &grads->stem_ : nullptr, to == 0);
    if (to == 0) g[0] = std::move(dx);
  }
  return g;
}

void Model::update_running_stats(const ForwardTrace& trace) {
  if (trace.mode != Mode::training) return;
  fold_running(stem_bn_, trace.stem_norm);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    fold_running(blocks_[i].bn1, trace.blocks[i].norm1);
    fold_running(blocks_[i].bn2, trace.blocks[i].norm2);
    fold_running(blocks_[i].projection_bn, trace.blocks[i].projection_norm);
  }
}

namespace {

void push_conv(std::vector<std::vector<float>*>& p, Conv2d& c) {
  p.push_back(&c.weight);
  p.push_back(&c.bias);
}

void push_norm(std::vector<std::vector<float>*>& p, BatchNorm& b, bool with_buffers) {
  if (b.channels == 0) return;
  p.push_back(&b.gamma);
  p.push_back(&b.beta);
  if (with_buffers) {
    p.push_back(&b.running_mean);
    p.push_back(&b.running_var);
  }
}

void name_norm(std::vector<std::string>& names, const BatchNorm& b, const std::string& pre, bool with_buffers) {
  if (b.channels == 0) return;
  names.push_back(pre + ".gamma");
  names.push_back(pre + ".beta");
  if (with_buffers) {
    names.push_back(pre + ".running_mean");
    names.push_back(pre + ".running_var");
  }
}

}  // namespace

static std::vector<std::vector<float>*> collect(Conv2d& stem, BatchNorm& stem_bn, std::vector<ResidualBlock>& blocks,
                                                Linear& head, bool with_buffers) {
  std::vector<std::vector<float>*> p;
  push_conv(p, stem);
  push_norm(p, stem_bn, with_buffers);
  for (auto& b : blocks) {
    push_conv(p, b.conv1);
    push_norm(p, b.bn1, with_buffers);
    push_conv(p, b.conv2);
    push_norm(p, b.bn2, with_buffers);
    if (b.has_projection) {
      push_conv(p, b.projection);
      push_norm(p, b.projection_bn, with_buffers);
    }
  }
  p.push_back(&head.weight);
  p.push_back(&head.bias);
  return p;
}

std::vector<std::vector<float>*> Model::parameters() { return collect(stem_, stem_bn_, blocks_, head_, false); }
std::vector<std::vector<float>*> Model::state() { return collect(stem_, stem_bn_, blocks_, head_, true); }

std::vector<const std::vector<float>*> Model::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<const std::vector<float>*> Model::state() const {
  auto mut = const_cast<Model*>(this)->state();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names{"stem.weight", "stem.bias"};
  name_norm(names, stem_bn_, "stem_bn", false);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string pre = "block" + std::to_string(i) + ".";
    names.push_back(pre + "conv1.weight");
    names.push_back(pre + "conv1.bias");
    name_norm(names, blocks_[i].bn1, pre + "bn1", false);
    names.push_back(pre + "conv2.weight");
    names.push_back(pre + "conv2.bias");
    name_norm(names, blocks_[i].bn2, pre + "bn2", false);
    if (blocks_[i].has_projection) {
      names.push_back(pre + "projection.weight");
      names.push_back(pre + "projection.bias");
      name_norm(names, blocks_[i].projection_bn, pre + "projection_bn", false);
    }
  }
  names.emplace_back("head.weight");
  names.emplace_back("head.bias");
  return names;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

std::size_t Model::state_size() const {
  std::size_t n = 0;
  for (const auto* p : state()) n += p->size();
  return n;
}

std::vector<std::vector<double>> softmax_rows(const Tensor& logits) {
  const int k = logits.c;
  std::vector<std::vector<double>> out(logits.n, std::vector<double>(k));
  for (int i = 0; i < logits.n; ++i) {
    const float* z = logits.sample(i);
    double mx = z[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(z[j]));
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      out[i][j] = std::exp(static_cast<double>(z[j]) - mx);
      sum += out[i][j];
    }
    for (int j = 0; j < k; ++j) out[i][j] /= sum;
  }
  return out;
}

double mixed_cross_entropy(const Tensor& logits, std::span<const int> label_a, std::span<const int> label_b,
                           std::span<const float> weight_a, Tensor* dlogits) {
  const int n = logits.n;
  const int k = logits.c;
  if (static_cast<int>(label_a.size()) != n || static_cast<int>(label_b.size()) != n ||
      static_cast<int>(weight_a.size()) != n)
    throw std::invalid_argument("label arrays must match the batch size");
  const auto probs = softmax_rows(logits);
  if (dlogits != nullptr) *dlogits = Tensor(n, k, 1, 1);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = label_a[i];
    const int b = label_b[i];
    if (a < 0 || a >= k || b < 0 || b >= k) throw std::invalid_argument("label out of range");
    const double w = weight_a[i];
    const double la = -std::log(std::max(probs[i][a], 1e-300));
    const double lb = -std::log(std::max(probs[i][b], 1e-300));
    loss += w * la + (1.0 - w) * lb;
    if (dlogits != nullptr) {
      float* d = dlogits->sample(i);
      for (int j = 0; j < k; ++j) {
        double target = (j == a ? w : 0.0) + (j == b ? 1.0 - w : 0.0);
        d[j] = static_cast<float>((probs[i][j] - target) / n);
      }
    }
  }
  return loss / n;
}

}  // namespace mixinterp
