#include "reid/nn.hpp"

#include <cmath>

namespace reid {

static Tensor he_init(Shape shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  Scalar std = std::sqrt(2.0 / static_cast<Scalar>(fan_in));
  Scalar* p = t.data();
  for (int64_t i = 0, n = t.numel(); i < n; ++i) p[i] = rng.normal(0.0, std);
  return t;
}

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng)
    : in_ch(in_ch), out_ch(out_ch), k(ksize), stride(stride), pad(pad) {
  weight = Var::leaf(he_init({out_ch, in_ch * k * k}, in_ch * k * k, rng));
  bias = Var::leaf(Tensor::zeros({out_ch}));
}

const Conv2d::Plan& Conv2d::plan_for(int n, int h, int w) {
  auto key = std::make_tuple(n, h, w);
  auto it = plans_.find(key);
  if (it != plans_.end()) return it->second;

  int oh = out_size(h, k, stride, pad);
  int ow = out_size(w, k, stride, pad);
  if (oh <= 0 || ow <= 0)
    throw ShapeError("conv2d: input " + std::to_string(h) + "x" + std::to_string(w) +
                     " too small for kernel " + std::to_string(k));
  const int ckk = in_ch * k * k;
  auto im2col = std::make_shared<std::vector<int64_t>>();
  im2col->resize(static_cast<int64_t>(n) * oh * ow * ckk);
  int64_t pos = 0;
  for (int in = 0; in < n; ++in)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int c = 0; c < in_ch; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int iy = oy * stride - pad + ky;
              int ix = ox * stride - pad + kx;
              bool valid = iy >= 0 && iy < h && ix >= 0 && ix < w;
              (*im2col)[pos++] =
                  valid ? ((static_cast<int64_t>(in) * in_ch + c) * h + iy) * w + ix : -1;
            }

  auto permute = std::make_shared<std::vector<int64_t>>();
  permute->resize(static_cast<int64_t>(n) * out_ch * oh * ow);
  pos = 0;
  for (int in = 0; in < n; ++in)
    for (int c = 0; c < out_ch; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
          (*permute)[pos++] = ((static_cast<int64_t>(in) * oh + oy) * ow + ox) * out_ch + c;

  Plan plan;
  plan.im2col = im2col;
  plan.cols_shape = {n * oh * ow, ckk};
  plan.permute = permute;
  plan.out_shape = {n, out_ch, oh, ow};
  return plans_.emplace(key, std::move(plan)).first->second;
}

Var Conv2d::forward(const Var& x) {
  const Tensor& t = x.value();
  if (t.ndim() != 4 || t.dim(1) != in_ch)
    throw ShapeError("conv2d: expected [N," + std::to_string(in_ch) + ",H,W], got " +
                     shape_str(t.shape()));
  const Plan& plan = plan_for(t.dim(0), t.dim(2), t.dim(3));
  Var cols = gather(x, plan.im2col, plan.cols_shape);
  Var y = add(matmul(cols, transpose(weight)), bias);  // [N*OH*OW, K]
  Var flat = reshape(y, {static_cast<int>(y.numel())});
  return reshape(gather(flat, plan.permute, plan.out_shape), plan.out_shape);
}

void Conv2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Var MaxPool2d::forward(const Var& x) {
  const Tensor& t = x.value();
  if (t.ndim() != 4) throw ShapeError("maxpool2d: expected 4-D, got " + shape_str(t.shape()));
  int n = t.dim(0), c = t.dim(1), h = t.dim(2), w = t.dim(3);
  int oh = Conv2d::out_size(h, k, stride, pad);
  int ow = Conv2d::out_size(w, k, stride, pad);
  auto idx = std::make_shared<std::vector<int64_t>>(static_cast<int64_t>(n) * c * oh * ow);
  const Scalar* p = t.data();
  int64_t pos = 0;
  for (int in = 0; in < n; ++in)
    for (int ic = 0; ic < c; ++ic) {
      const int64_t base = (static_cast<int64_t>(in) * c + ic) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          int64_t best = -1;
          Scalar bv = 0;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int iy = oy * stride - pad + ky;
              int ix = ox * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              int64_t j = base + static_cast<int64_t>(iy) * w + ix;
              if (best < 0 || p[j] > bv) {
                best = j;
                bv = p[j];
              }
            }
          (*idx)[pos++] = best;
        }
    }
  return gather(x, idx, {n, c, oh, ow});
}

Linear::Linear(int in_dim, int out_dim, Rng& rng) : in_dim(in_dim), out_dim(out_dim) {
  weight = Var::leaf(he_init({out_dim, in_dim}, in_dim, rng));
  bias = Var::leaf(Tensor::zeros({out_dim}));
}

Var Linear::forward(const Var& x) {
  const Tensor& t = x.value();
  if (t.ndim() != 2 || t.dim(1) != in_dim)
    throw ShapeError("linear: expected [N," + std::to_string(in_dim) + "], got " +
                     shape_str(t.shape()));
  return add(matmul(x, transpose(weight)), bias);
}

void Linear::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

ResidualBlock::ResidualBlock(int in_ch, int out_ch, int stride, Rng& rng)
    : conv1(in_ch, out_ch, 3, stride, 1, rng), conv2(out_ch, out_ch, 3, 1, 1, rng) {
  if (stride != 1 || in_ch != out_ch) skip.emplace(in_ch, out_ch, 1, stride, 0, rng);
}

Var ResidualBlock::forward(const Var& x) {
  Var y = conv2.forward(relu(conv1.forward(x)));
  Var s = skip ? skip->forward(x) : x;
  return relu(add(y, s));
}

void ResidualBlock::collect_params(const std::string& prefix, NamedParams& out) {
  conv1.collect_params(prefix + ".conv1", out);
  conv2.collect_params(prefix + ".conv2", out);
  if (skip) skip->collect_params(prefix + ".skip", out);
}

Mlp2::Mlp2(int in_dim, int hidden, int out_dim, Rng& rng)
    : fc1(in_dim, hidden, rng), fc2(hidden, out_dim, rng) {}

Var Mlp2::forward(const Var& x) { return fc2.forward(relu(fc1.forward(x))); }

void Mlp2::collect_params(const std::string& prefix, NamedParams& out) {
  fc1.collect_params(prefix + ".fc1", out);
  fc2.collect_params(prefix + ".fc2", out);
}

Var global_avg_pool(const Var& maps) {
  const Tensor& t = maps.value();
  if (t.ndim() != 4) throw ShapeError("global_avg_pool: expected 4-D, got " + shape_str(t.shape()));
  int n = t.dim(0), k = t.dim(1), h = t.dim(2), w = t.dim(3);
  Var s = sum_to(maps, {n, k, 1, 1});
  return reshape(s, {n, k}) * (1.0 / static_cast<Scalar>(h * w));
}

Var upsample_bilinear(const Var& x, int out_h, int out_w) {
  const Tensor& t = x.value();
  if (t.ndim() != 3) throw ShapeError("upsample_bilinear: expected [N,h,w], got " + shape_str(t.shape()));
  int n = t.dim(0), h = t.dim(1), w = t.dim(2);
  int64_t on = static_cast<int64_t>(n) * out_h * out_w;
  auto i00 = std::make_shared<std::vector<int64_t>>(on);
  auto i01 = std::make_shared<std::vector<int64_t>>(on);
  auto i10 = std::make_shared<std::vector<int64_t>>(on);
  auto i11 = std::make_shared<std::vector<int64_t>>(on);
  Tensor w00({n, out_h, out_w}), w01({n, out_h, out_w}), w10({n, out_h, out_w}),
      w11({n, out_h, out_w});
  Scalar sy = static_cast<Scalar>(h) / out_h;
  Scalar sx = static_cast<Scalar>(w) / out_w;
  int64_t pos = 0;
  for (int in = 0; in < n; ++in) {
    int64_t base = static_cast<int64_t>(in) * h * w;
    for (int oy = 0; oy < out_h; ++oy) {
      Scalar fy = (oy + 0.5) * sy - 0.5;
      fy = std::max(0.0, std::min(fy, static_cast<Scalar>(h - 1)));
      int y0 = static_cast<int>(fy);
      int y1 = std::min(y0 + 1, h - 1);
      Scalar ry = fy - y0;
      for (int ox = 0; ox < out_w; ++ox) {
        Scalar fx = (ox + 0.5) * sx - 0.5;
        fx = std::max(0.0, std::min(fx, static_cast<Scalar>(w - 1)));
        int x0 = static_cast<int>(fx);
        int x1 = std::min(x0 + 1, w - 1);
        Scalar rx = fx - x0;
        (*i00)[pos] = base + static_cast<int64_t>(y0) * w + x0;
        (*i01)[pos] = base + static_cast<int64_t>(y0) * w + x1;
        (*i10)[pos] = base + static_cast<int64_t>(y1) * w + x0;
        (*i11)[pos] = base + static_cast<int64_t>(y1) * w + x1;
        w00.data()[pos] = (1 - ry) * (1 - rx);
        w01.data()[pos] = (1 - ry) * rx;
        w10.data()[pos] = ry * (1 - rx);
        w11.data()[pos] = ry * rx;
        ++pos;
      }
    }
  }
  Shape os{n, out_h, out_w};
  Var out = mul(gather(x, i00, os), Var::constant(w00));
  out = add(out, mul(gather(x, i01, os), Var::constant(w01)));
  out = add(out, mul(gather(x, i10, os), Var::constant(w10)));
  out = add(out, mul(gather(x, i11, os), Var::constant(w11)));
  return out;
}

}  // namespace reid
