#pragma once

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "reid/autodiff.hpp"
#include "reid/rng.hpp"

namespace reid {

using NamedParams = std::vector<std::pair<std::string, Var>>;

// 2-D convolution as im2col-gather + GEMM. Index plans are cached per input
// shape; instances are not safe for concurrent forward calls.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng);

  Var forward(const Var& x);  // [N,C,H,W] -> [N,K,OH,OW]
  void collect_params(const std::string& prefix, NamedParams& out);

  static int out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
  }

  Var weight;  // [K, C*k*k]
  Var bias;    // [K]
  int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;

 private:
  struct Plan {
    IndexVec im2col;
    Shape cols_shape;
    IndexVec permute;
    Shape out_shape;
  };
  const Plan& plan_for(int n, int h, int w);
  std::map<std::tuple<int, int, int>, Plan> plans_;
};

class MaxPool2d {
 public:
  MaxPool2d() = default;
  MaxPool2d(int ksize, int stride, int pad) : k(ksize), stride(stride), pad(pad) {}
  Var forward(const Var& x);
  int k = 2, stride = 2, pad = 0;
};

class Linear {
 public:
  Linear() = default;
  Linear(int in_dim, int out_dim, Rng& rng);
  Var forward(const Var& x);  // [N,in] -> [N,out]
  void collect_params(const std::string& prefix, NamedParams& out);
  Var weight;  // [out,in]
  Var bias;    // [out]
  int in_dim = 0, out_dim = 0;
};

// Plain (un-normalized) residual block: relu(conv2(relu(conv1(x))) + skip(x)).
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(int in_ch, int out_ch, int stride, Rng& rng);
  Var forward(const Var& x);
  void collect_params(const std::string& prefix, NamedParams& out);

  Conv2d conv1, conv2;
  std::optional<Conv2d> skip;
};

// Two fully-connected layers with a ReLU in between.
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(int in_dim, int hidden, int out_dim, Rng& rng);
  Var forward(const Var& x);
  void collect_params(const std::string& prefix, NamedParams& out);
  Linear fc1, fc2;
};

// [N,K,h,w] -> [N,K] channel means.
Var global_avg_pool(const Var& maps);

// [N,h,w] -> [N,H,W], align_corners=false convention.
Var upsample_bilinear(const Var& x, int out_h, int out_w);

}  // namespace reid
