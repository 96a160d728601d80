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

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spiralrt/core.hpp"

namespace spiralrt::xsdnet {

/// Row-major float tensor. Feature maps are [C, H, W]; vectors are [C, 1, 1].
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, float fill = 0.0f);

  std::size_t numel() const { return data.size(); }
  int channels() const { return shape.at(0); }
  int height() const { return shape.at(1); }
  int width() const { return shape.at(2); }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  std::string shape_str() const;
};

Tensor from_image(const Image<float>& img);
Image<float> to_image(const Tensor& t, int channel = 0);

/// Layer primitives on [C, H, W] tensors. `layer` names the caller in errors.
namespace ops {
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              const std::string& layer = "conv2d");
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                 const Tensor& var, float eps, const std::string& layer = "batchnorm");
Tensor leaky_relu(const Tensor& x, float slope = 0.01f);
Tensor maxpool2(const Tensor& x, const std::string& layer = "maxpool2");
Tensor upsample2(const Tensor& x);
Tensor concat(const Tensor& a, const Tensor& b, const std::string& layer = "concat");
Tensor softmax_channels(const Tensor& x);
Tensor threshold(const Tensor& x, float t);
Tensor global_avgpool(const Tensor& x);
/// x is [I, 1, 1] (or any tensor with I elements); w is [O, I]; result [O, 1, 1].
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b, const std::string& layer = "dense");
/// gamma * x + beta with per-channel gamma, beta of shape [C, 1, 1].
Tensor film(const Tensor& x, const Tensor& gamma, const Tensor& beta, const std::string& layer = "film");
}  // namespace ops

inline constexpr const char* kManifestName = "__manifest__";

/// Named tensors in file order. The manifest is the "__manifest__" tensor,
/// one UTF-8 byte per float element, stored first.
class WeightStore {
 public:
  static WeightStore load(const std::string& path);
  static WeightStore from_bytes(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");
  std::vector<std::uint8_t> to_bytes() const;
  void save(const std::string& path) const;

  std::string manifest_json() const;
  void set_manifest(const std::string& json);

  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  /// Inserts or replaces; new names are appended.
  void put(const std::string& name, Tensor t);
  void remove(const std::string& name);
  const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

 private:
  std::vector<std::pair<std::string, Tensor>> tensors_;
  std::map<std::string, std::size_t> index_;
};

/// Topology parameters carried in the manifest. Factor, class and modality
/// sizes are fixed by the architecture; the rest are free.
struct Hyper {
  int n_factors = 8;
  int n_classes = 4;
  int z_dim = 8;
  int depth = 4;  // anatomy U-Net poolings
  int base = 16;
  int kernel = 3;
  int seg_channels = 16;
  int seg_kernel = 3;
  std::vector<int> mod_channels = {16, 32, 64};
  int mod_hidden = 32;
  int dec_channels = 16;
  int dec_blocks = 3;
  int fusion_depth = 4;
  int fusion_base = 16;
  float threshold = 0.5f;
  float slope = 0.01f;
  float bn_eps = 1e-5f;

  void validate() const;
};

struct Layer {
  std::string name;
  std::string type;  // conv2d batchnorm leaky_relu maxpool2 upsample2 concat softmax threshold global_avgpool dense film
  std::vector<std::string> inputs;
  int in = 0, out = 0, kernel = 0, stride = 1, pad = 0;
  float value = 0.0f;  // slope, eps or threshold
};

struct Subnet {
  std::string name;
  std::vector<std::string> inputs;
  std::string output;
  std::vector<Layer> layers;
};

/// The xSDNet graph for a set of topology parameters: anatomy U-Net,
/// segmentor, modality encoder, FiLM decoder and fusion U-Net.
std::vector<Subnet> build_graph(const Hyper& h);
std::string manifest_json(const Hyper& h);
Hyper parse_hyper(const std::string& manifest);

/// Parameter tensor names and shapes of a layer (empty for parameter-free layers).
std::vector<std::pair<std::string, std::vector<int>>> layer_params(const Layer& l);

/// Seeded He-uniform weights; batchnorm as identity. Deterministic across platforms.
WeightStore init_weights(const Hyper& h, std::uint64_t seed);

struct Segmentation {
  Tensor probabilities;  // [n_classes, H, W]
  LabelImage mask;       // argmax
};

struct InferenceOutput {
  Segmentation segmentation;
  Image<float> reconstruction;
  Tensor factors;         // [8, H, W], binary
  std::vector<float> z;   // modality vector
  Tensor film_output;     // [1, H, W]
};

class Model {
 public:
  /// Validates the manifest against build_graph(hyper) and all tensors
  /// against their layers; errors name the offending layer or tensor.
  explicit Model(WeightStore store);

  const Hyper& hyper() const { return hyper_; }
  const WeightStore& weights() const { return store_; }

  Tensor anatomy_encode(const Tensor& interim) const;
  Segmentation segment(const Tensor& factors) const;
  std::vector<float> modality_encode(const Tensor& interim, const Tensor& factors) const;
  Tensor film_decode(const Tensor& factors, std::span<const float> z) const;
  Tensor fuse(const Tensor& film_output, const Tensor& interim) const;
  /// interim: real (magnitude) H x W image.
  InferenceOutput infer(const Image<float>& interim) const;

 private:
  const Subnet& subnet(const std::string& name) const;
  Tensor run(const Subnet& net, const std::vector<const Tensor*>& inputs) const;

  WeightStore store_;
  Hyper hyper_;
  std::vector<Subnet> graph_;
};

}  // namespace spiralrt::xsdnet
