/*
 * Copyright 2026 The spiralrt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>

#include "spiralrt/xsdnet.hpp"

namespace spiralrt::xsdnet {

Tensor::Tensor(std::vector<int> s, float fill) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) {
    require(d >= 0, ErrorCode::InvalidArgument, "Tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  data.assign(n, fill);
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor from_image(const Image<float>& img) {
  Tensor t({1, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), t.data.begin());
  return t;
}

Image<float> to_image(const Tensor& t, int channel) {
  require(t.shape.size() == 3 && channel >= 0 && channel < t.channels(), ErrorCode::ShapeMismatch,
          "to_image: tensor " + t.shape_str() + " has no channel " + std::to_string(channel));
  Image<float> img(t.height(), t.width());
  const auto off = static_cast<std::ptrdiff_t>(img.size()) * channel;
  std::copy(t.data.begin() + off, t.data.begin() + off + static_cast<std::ptrdiff_t>(img.size()), img.data.begin());
  return img;
}

namespace ops {
namespace {

void need_map(const Tensor& x, const std::string& layer) {
  require(x.shape.size() == 3, ErrorCode::ShapeMismatch,
          layer + ": expected a [C,H,W] tensor, got " + x.shape_str());
}

void need_vec(const Tensor& t, int n, const std::string& layer, const char* what) {
  require(static_cast<int>(t.numel()) == n, ErrorCode::ShapeMismatch,
          layer + ": " + what + " has shape " + t.shape_str() + ", expected " + std::to_string(n) + " values");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad, const std::string& layer) {
  need_map(x, layer);
  require(w.shape.size() == 4 && w.shape[2] == w.shape[3], ErrorCode::ShapeMismatch,
          layer + ": weight must be [O,I,k,k], got " + w.shape_str());
  const int o_ch = w.shape[0], i_ch = w.shape[1], k = w.shape[2];
  require(i_ch == x.channels(), ErrorCode::ShapeMismatch,
          layer + ": weight expects " + std::to_string(i_ch) + " input channels, input is " + x.shape_str());
  need_vec(b, o_ch, layer, "bias");
  require(stride >= 1 && pad >= 0, ErrorCode::InvalidArgument, layer + ": bad stride or padding");
  const int h = x.height(), wd = x.width();
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  require(oh >= 1 && ow >= 1, ErrorCode::ShapeMismatch, layer + ": input " + x.shape_str() + " smaller than kernel");
  Tensor y({o_ch, oh, ow});
  std::vector<float> acc(static_cast<std::size_t>(oh) * ow);
  for (int o = 0; o < o_ch; ++o) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    for (int i = 0; i < i_ch; ++i) {
      const float* src = &x.data[static_cast<std::size_t>(i) * h * wd];
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const float wv = w.data[((static_cast<std::size_t>(o) * i_ch + i) * k + ky) * k + kx];
          // Output columns whose input column lies inside the image.
          const int x_lo = std::max(0, (pad - kx + stride - 1) / stride);
          const int num = wd - 1 + pad - kx;
          const int x_hi = num < 0 ? 0 : std::min(ow, num / stride + 1);
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            const float* row = src + static_cast<std::size_t>(iy) * wd;
            float* dst = &acc[static_cast<std::size_t>(oy) * ow];
            if (stride == 1) {
              const float* r = row - pad + kx;
              for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] += wv * r[ox];
            } else {
              for (int ox = x_lo; ox < x_hi; ++ox) dst[ox] += wv * row[ox * stride - pad + kx];
            }
          }
        }
    }
    float* out = &y.data[static_cast<std::size_t>(o) * oh * ow];
    for (std::size_t p = 0; p < acc.size(); ++p) out[p] = acc[p] + b.data[o];
  }
  return y;
}

Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean, const Tensor& var,
                 float eps, const std::string& layer) {
  need_map(x, layer);
  const int c = x.channels();
  need_vec(gamma, c, layer, "gamma");
  need_vec(beta, c, layer, "beta");
  need_vec(mean, c, layer, "running mean");
  need_vec(var, c, layer, "running variance");
  Tensor y = x;
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  for (int ch = 0; ch < c; ++ch) {
    const float scale = gamma.data[ch] / std::sqrt(var.data[ch] + eps);
    const float shift = beta.data[ch] - mean.data[ch] * scale;
    float* p = &y.data[ch * plane];
    for (std::size_t i = 0; i < plane; ++i) p[i] = p[i] * scale + shift;
  }
  return y;
}

Tensor leaky_relu(const Tensor& x, float slope) {
  Tensor y = x;
  for (auto& v : y.data) v = v >= 0.0f ? v : slope * v;
  return y;
}

Tensor maxpool2(const Tensor& x, const std::string& layer) {
  need_map(x, layer);
  const int c = x.channels(), oh = x.height() / 2, ow = x.width() / 2;
  require(oh >= 1 && ow >= 1, ErrorCode::ShapeMismatch, layer + ": input " + x.shape_str() + " too small to pool");
  Tensor y({c, oh, ow});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < oh; ++yy)
      for (int xx = 0; xx < ow; ++xx)
        y.at(ch, yy, xx) = std::max({x.at(ch, 2 * yy, 2 * xx), x.at(ch, 2 * yy, 2 * xx + 1),
                                     x.at(ch, 2 * yy + 1, 2 * xx), x.at(ch, 2 * yy + 1, 2 * xx + 1)});
  return y;
}

Tensor upsample2(const Tensor& x) {
  need_map(x, "upsample2");
  const int c = x.channels(), h = x.height(), w = x.width();
  Tensor y({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch)
    for (int yy = 0; yy < 2 * h; ++yy)
      for (int xx = 0; xx < 2 * w; ++xx) y.at(ch, yy, xx) = x.at(ch, yy / 2, xx / 2);
  return y;
}

Tensor concat(const Tensor& a, const Tensor& b, const std::string& layer) {
  need_map(a, layer);
  need_map(b, layer);
  require(a.height() == b.height() && a.width() == b.width(), ErrorCode::ShapeMismatch,
          layer + ": cannot concatenate " + a.shape_str() + " and " + b.shape_str());
  Tensor y({a.channels() + b.channels(), a.height(), a.width()});
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.numel()));
  return y;
}

Tensor softmax_channels(const Tensor& x) {
  need_map(x, "softmax");
  const int c = x.channels();
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  Tensor y(x.shape);
  std::vector<double> e(c);
  for (std::size_t p = 0; p < plane; ++p) {
    double m = x.data[p];
    for (int ch = 1; ch < c; ++ch) m = std::max(m, static_cast<double>(x.data[ch * plane + p]));
    double s = 0.0;
    for (int ch = 0; ch < c; ++ch) s += e[ch] = std::exp(static_cast<double>(x.data[ch * plane + p]) - m);
    for (int ch = 0; ch < c; ++ch) y.data[ch * plane + p] = static_cast<float>(e[ch] / s);
  }
  return y;
}

Tensor threshold(const Tensor& x, float t) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > t ? 1.0f : 0.0f;
  return y;
}

Tensor global_avgpool(const Tensor& x) {
  need_map(x, "global_avgpool");
  const int c = x.channels();
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  Tensor y({c, 1, 1});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x.data[ch * plane + p];
    y.data[ch] = static_cast<float>(s / static_cast<double>(plane));
  }
  return y;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, const std::string& layer) {
  require(w.shape.size() == 2, ErrorCode::ShapeMismatch, layer + ": weight must be [O,I], got " + w.shape_str());
  const int o = w.shape[0], in = w.shape[1];
  need_vec(x, in, layer, "input");
  need_vec(b, o, layer, "bias");
  Tensor y({o, 1, 1});
  for (int r = 0; r < o; ++r) {
    double s = b.data[r];
    for (int c = 0; c < in; ++c) s += static_cast<double>(w.data[static_cast<std::size_t>(r) * in + c]) * x.data[c];
    y.data[r] = static_cast<float>(s);
  }
  return y;
}

Tensor film(const Tensor& x, const Tensor& gamma, const Tensor& beta, const std::string& layer) {
  need_map(x, layer);
  const int c = x.channels();
  need_vec(gamma, c, layer, "gamma");
  need_vec(beta, c, layer, "beta");
  Tensor y = x;
  const std::size_t plane = static_cast<std::size_t>(x.height()) * x.width();
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < plane; ++p) y.data[ch * plane + p] = gamma.data[ch] * x.data[ch * plane + p] + beta.data[ch];
  return y;
}

}  // namespace ops
}  // namespace spiralrt::xsdnet
