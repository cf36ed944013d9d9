#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mixinterp/tensor.hpp"

namespace mixinterp {

// Residual CNN layout: 3x3 stem conv + ReLU, then stages of basic residual
// blocks (conv-BN-ReLU-conv-BN + shortcut, ReLU), global average pool, linear
// head. Batch norm is optional; in inference mode it is a fixed per-channel
// affine map using running statistics.
struct ArchConfig {
  int in_channels = 3;
  int image_size = 32;
  int num_classes = 8;
  int stem_width = 8;
  std::vector<int> stage_widths{8, 16, 32};
  std::vector<int> stage_strides{1, 2, 2};
  int blocks_per_stage = 1;
  bool batch_norm = true;

  // Weighted layers: stem + two convs per block + head.
  int depth() const;
  int num_blocks() const { return static_cast<int>(stage_widths.size()) * blocks_per_stage; }
  int final_width() const { return stage_widths.empty() ? stem_width : stage_widths.back(); }
  int final_resolution() const;
  void validate() const;

  // key=value lines, stable across runs; also the checkpoint header.
  std::string descriptor() const;
  static ArchConfig parse_descriptor(const std::string& text);
  bool operator==(const ArchConfig&) const = default;
};

struct Conv2d {
  int in = 0;
  int out = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  std::vector<float> weight;  // out x (in * kernel * kernel)
  std::vector<float> bias;    // out

  int out_size(int in_size) const { return (in_size + 2 * pad - kernel) / stride + 1; }
  Tensor forward(const Tensor& x) const;
  // Returns dL/dx (empty when need_input_grad is false); accumulates
  // parameter gradients into grad when non-null.
  Tensor backward(const Tensor& x, const Tensor& dy, Conv2d* grad, bool need_input_grad = true) const;
};

struct BatchNorm {
  int channels = 0;
  float eps = 1e-5f;
  float momentum = 0.1f;
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> running_mean;
  std::vector<float> running_var;
};

// Per-call state a BatchNorm needs for its backward pass.
struct NormCache {
  Tensor normalized;            // x_hat
  std::vector<float> inv_std;   // per channel
  std::vector<float> batch_mean;
  std::vector<float> batch_var;  // unbiased, for the running update
};

struct ResidualBlock {
  Conv2d conv1;
  BatchNorm bn1;
  Conv2d conv2;
  BatchNorm bn2;
  bool has_projection = false;
  Conv2d projection;  // 1x1, used when stride or width changes
  BatchNorm projection_bn;
};

struct Linear {
  int in = 0;
  int out = 0;
  std::vector<float> weight;  // out x in
  std::vector<float> bias;
};

// Activations of one forward pass. boundary[0] is the network input,
// boundary[1] the stem output and boundary[2 + i] the output of block i.
enum class Mode { inference, training };

struct BlockCache {
  Tensor hidden;  // post-ReLU output of the first conv
  NormCache norm1;
  NormCache norm2;
  NormCache projection_norm;
};

struct ForwardTrace {
  int start = 0;
  Mode mode = Mode::inference;
  std::vector<Tensor> boundary;
  NormCache stem_norm;
  std::vector<BlockCache> blocks;
  Tensor pooled;  // n x c x 1 x 1
  Tensor logits;  // n x classes x 1 x 1
};

class Model {
 public:
  Model() = default;
  static Model build(const ArchConfig& arch, std::uint64_t seed);
  Model zeros_like() const;

  const ArchConfig& arch() const { return arch_; }
  int num_boundaries() const { return static_cast<int>(blocks_.size()) + 2; }
  int last_conv_boundary() const { return num_boundaries() - 1; }
  // Boundary holding the output of the given stage (-1 = stem output).
  int stage_output_boundary(int stage) const;

  // Runs the network from the given boundary; `x` must have that boundary's shape.
  ForwardTrace forward(const Tensor& x, int from = 0, Mode mode = Mode::inference) const;
  Tensor logits(const Tensor& x) const { return forward(x).logits; }

  // Backpropagates dlogits down to boundary `to`. The returned vector is
  // indexed by boundary; entries below `to` are empty. Parameter gradients are
  // accumulated into `grads` when it is non-null.
  std::vector<Tensor> backward(const ForwardTrace& trace, const Tensor& dlogits, Model* grads, int to) const;

  // Folds the batch statistics of a training-mode trace into the running statistics.
  void update_running_stats(const ForwardTrace& trace);

  // Trainable tensors; state() additionally includes the running statistics.
  std::vector<std::vector<float>*> parameters();
  std::vector<const std::vector<float>*> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::vector<std::vector<float>*> state();
  std::vector<const std::vector<float>*> state() const;
  std::size_t parameter_count() const;
  std::size_t state_size() const;

  Conv2d& stem() { return stem_; }
  std::vector<ResidualBlock>& blocks() { return blocks_; }
  Linear& head() { return head_; }
  const Conv2d& stem() const { return stem_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  const Linear& head() const { return head_; }

 private:
  ArchConfig arch_;
  Conv2d stem_;
  BatchNorm stem_bn_;
  std::vector<ResidualBlock> blocks_;
  Linear head_;
};

// Row-wise softmax of an n x k logits tensor (double accumulation).
std::vector<std::vector<double>> softmax_rows(const Tensor& logits);

// Mixed-label cross entropy, mean over the batch:
//   w * CE(label_a) + (1 - w) * CE(label_b).
// Writes dL/dlogits to dlogits when non-null.
double mixed_cross_entropy(const Tensor& logits, std::span<const int> label_a, std::span<const int> label_b,
                           std::span<const float> weight_a, Tensor* dlogits);

}  // namespace mixinterp
