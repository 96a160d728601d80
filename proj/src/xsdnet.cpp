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
#include <random>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "spiralrt/io.hpp"
#include "spiralrt/xsdnet.hpp"

namespace spiralrt::xsdnet {

using nlohmann::json;

// ---------------------------------------------------------------- store

WeightStore WeightStore::load(const std::string& path) { return from_bytes(io::read_file(path), path); }

WeightStore WeightStore::from_bytes(std::span<const std::uint8_t> bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.verify_trailing_crc();
  r.expect_magic("XSDW");
  const std::size_t ver_at = r.offset();
  const std::uint32_t version = r.u32();
  if (version != 1) r.fail_at(ErrorCode::Format, "unsupported XSDW version " + std::to_string(version), ver_at);
  const std::uint32_t count = r.u32();
  WeightStore s;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::size_t at = r.offset();
    const std::uint16_t len = r.u16();
    const std::string name = r.str(len);
    if (name.empty()) r.fail_at(ErrorCode::Format, "tensor " + std::to_string(t) + " has an empty name", at);
    if (s.has(name)) r.fail_at(ErrorCode::Format, "duplicate tensor '" + name + "'", at);
    if (t == 0 && name != kManifestName)
      r.fail_at(ErrorCode::Format, "first tensor is '" + name + "', expected '" + kManifestName + "'", at);
    const int ndim = r.u8();
    std::vector<int> shape(ndim);
    std::uint64_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      const std::uint32_t v = r.u32();
      if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        r.fail(ErrorCode::Format, "tensor '" + name + "' dimension too large");
      shape[d] = static_cast<int>(v);
      n *= v;
      if (n > r.remaining() / 4 + 1) r.fail(ErrorCode::Format, "tensor '" + name + "' payload exceeds the file");
    }
    if (n * 4 > r.remaining()) r.fail(ErrorCode::Format, "tensor '" + name + "' payload exceeds the file");
    Tensor tensor;
    tensor.shape = std::move(shape);
    tensor.data.resize(n);
    for (auto& v : tensor.data) v = r.f32();
    s.put(name, std::move(tensor));
  }
  if (count == 0) r.fail(ErrorCode::Format, std::string("no tensors; expected '") + kManifestName + "' first");
  r.expect_end();
  return s;
}

std::vector<std::uint8_t> WeightStore::to_bytes() const {
  require(has(kManifestName), ErrorCode::InvalidArgument, "WeightStore: no manifest");
  io::ByteWriter w;
  w.str("XSDW");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(tensors_.size()));
  auto emit = [&](const std::string& name, const Tensor& t) {
    require(name.size() <= 0xffff, ErrorCode::InvalidArgument, "WeightStore: tensor name too long");
    require(t.shape.size() <= 0xff, ErrorCode::InvalidArgument, "WeightStore: too many dimensions");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  };
  emit(kManifestName, get(kManifestName));
  for (const auto& [name, t] : tensors_)
    if (name != kManifestName) emit(name, t);
  w.crc();
  return std::move(w.data());
}

void WeightStore::save(const std::string& path) const {
  const auto b = to_bytes();
  io::write_file_atomic(path, b);
}

std::string WeightStore::manifest_json() const {
  require(has(kManifestName), ErrorCode::Format, std::string("missing tensor '") + kManifestName + "'");
  const Tensor& t = get(kManifestName);
  std::string s;
  s.reserve(t.numel());
  for (float v : t.data) {
    require(v >= 0.0f && v <= 255.0f && v == std::floor(v), ErrorCode::Format,
            std::string("tensor '") + kManifestName + "' holds a non-byte value");
    s.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  return s;
}

void WeightStore::set_manifest(const std::string& text) {
  Tensor t({static_cast<int>(text.size())});
  for (std::size_t i = 0; i < text.size(); ++i) t.data[i] = static_cast<float>(static_cast<unsigned char>(text[i]));
  if (has(kManifestName)) {
    tensors_[index_.at(kManifestName)].second = std::move(t);
    return;
  }
  // Keep the manifest first.
  tensors_.insert(tensors_.begin(), {kManifestName, std::move(t)});
  index_.clear();
  for (std::size_t i = 0; i < tensors_.size(); ++i) index_[tensors_[i].first] = i;
}

bool WeightStore::has(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& WeightStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::Format, "missing tensor '" + name + "'");
  return tensors_[it->second].second;
}

void WeightStore::put(const std::string& name, Tensor t) {
  const auto it = index_.find(name);
  if (it != index_.end()) {
    tensors_[it->second].second = std::move(t);
    return;
  }
  index_[name] = tensors_.size();
  tensors_.emplace_back(name, std::move(t));
}

void WeightStore::remove(const std::string& name) {
  const auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::InvalidArgument, "remove: no tensor '" + name + "'");
  tensors_.erase(tensors_.begin() + static_cast<std::ptrdiff_t>(it->second));
  index_.clear();
  for (std::size_t i = 0; i < tensors_.size(); ++i) index_[tensors_[i].first] = i;
}

// ---------------------------------------------------------------- graph

void Hyper::validate() const {
  require(n_factors == 8, ErrorCode::InvalidArgument, "xsdnet: n_factors must be 8");
  require(n_classes == 4, ErrorCode::InvalidArgument, "xsdnet: n_classes must be 4");
  require(z_dim == 8, ErrorCode::InvalidArgument, "xsdnet: z_dim must be 8");
  require(depth >= 1 && depth <= 8 && fusion_depth >= 1 && fusion_depth <= 8, ErrorCode::InvalidArgument,
          "xsdnet: U-Net depths must be in [1, 8]");
  require(base >= 1 && fusion_base >= 1 && seg_channels >= 1 && mod_hidden >= 1 && dec_channels >= 1 &&
              dec_blocks >= 1,
          ErrorCode::InvalidArgument, "xsdnet: channel and block counts must be positive");
  require(kernel >= 1 && kernel % 2 == 1 && seg_kernel >= 1 && seg_kernel % 2 == 1, ErrorCode::InvalidArgument,
          "xsdnet: kernel sizes must be odd");
  require(!mod_channels.empty(), ErrorCode::InvalidArgument, "xsdnet: modality encoder needs at least one layer");
  for (int c : mod_channels) require(c >= 1, ErrorCode::InvalidArgument, "xsdnet: modality channels must be positive");
  require(threshold > 0.0f && threshold < 1.0f, ErrorCode::InvalidArgument, "xsdnet: threshold must be in (0, 1)");
  require(slope >= 0.0f && bn_eps > 0.0f, ErrorCode::InvalidArgument, "xsdnet: bad slope or eps");
}

namespace {

json hyper_to_json(const Hyper& h) {
  return {{"n_factors", h.n_factors},       {"n_classes", h.n_classes},   {"z_dim", h.z_dim},
          {"depth", h.depth},               {"base", h.base},             {"kernel", h.kernel},
          {"seg_channels", h.seg_channels}, {"seg_kernel", h.seg_kernel}, {"mod_channels", h.mod_channels},
          {"mod_hidden", h.mod_hidden},     {"dec_channels", h.dec_channels}, {"dec_blocks", h.dec_blocks},
          {"fusion_depth", h.fusion_depth}, {"fusion_base", h.fusion_base}, {"threshold", h.threshold},
          {"slope", h.slope},               {"bn_eps", h.bn_eps}};
}

json layer_to_json(const Layer& l) {
  json j = {{"name", l.name}, {"type", l.type}, {"inputs", l.inputs}};
  if (l.type == "conv2d") {
    j["in"] = l.in;
    j["out"] = l.out;
    j["kernel"] = l.kernel;
    j["stride"] = l.stride;
    j["pad"] = l.pad;
  } else if (l.type == "dense") {
    j["in"] = l.in;
    j["out"] = l.out;
  } else if (l.type == "batchnorm") {
    j["channels"] = l.in;
    j["eps"] = l.value;
  } else if (l.type == "leaky_relu") {
    j["slope"] = l.value;
  } else if (l.type == "threshold") {
    j["value"] = l.value;
  }
  return j;
}

class Builder {
 public:
  Builder(const Hyper& h, Subnet& net) : h_(h), net_(net) {}

  std::string add(Layer l) {
    net_.layers.push_back(l);
    return l.name;
  }
  std::string conv(const std::string& name, const std::string& in, int ci, int co, int k, int stride = 1) {
    return add({name, "conv2d", {in}, ci, co, k, stride, k / 2, 0.0f});
  }
  std::string bn(const std::string& name, const std::string& in, int c) {
    return add({name, "batchnorm", {in}, c, c, 0, 1, 0, h_.bn_eps});
  }
  std::string act(const std::string& name, const std::string& in) {
    return add({name, "leaky_relu", {in}, 0, 0, 0, 1, 0, h_.slope});
  }
  std::string simple(const std::string& name, const std::string& type, std::vector<std::string> in) {
    return add({name, type, std::move(in), 0, 0, 0, 1, 0, 0.0f});
  }
  std::string dense(const std::string& name, const std::string& in, int ci, int co) {
    return add({name, "dense", {in}, ci, co, 0, 1, 0, 0.0f});
  }
  // conv-bn-act twice.
  std::string block(const std::string& name, const std::string& in, int ci, int co) {
    auto x = conv(name + ".conv1", in, ci, co, h_.kernel);
    x = bn(name + ".bn1", x, co);
    x = act(name + ".act1", x);
    x = conv(name + ".conv2", x, co, co, h_.kernel);
    x = bn(name + ".bn2", x, co);
    return act(name + ".act2", x);
  }
  std::string unet(const std::string& p, const std::string& in, int ci, int co, int base, int depth) {
    std::vector<std::string> skips;
    std::string x = in;
    int ch = ci;
    for (int i = 0; i < depth; ++i) {
      x = block(p + ".enc" + std::to_string(i), x, ch, base << i);
      skips.push_back(x);
      ch = base << i;
      x = simple(p + ".pool" + std::to_string(i), "maxpool2", {x});
    }
    x = block(p + ".mid", x, ch, base << depth);
    ch = base << depth;
    for (int i = depth - 1; i >= 0; --i) {
      const std::string s = std::to_string(i);
      x = simple(p + ".up" + s, "upsample2", {x});
      x = simple(p + ".cat" + s, "concat", {x, skips[i]});
      x = block(p + ".dec" + s, x, ch + (base << i), base << i);
      ch = base << i;
    }
    return conv(p + ".head", x, ch, co, 1);
  }

 private:
  const Hyper& h_;
  Subnet& net_;
};

}  // namespace

std::vector<Subnet> build_graph(const Hyper& h) {
  h.validate();
  std::vector<Subnet> g;

  Subnet anatomy{"anatomy", {"interim"}, "", {}};
  {
    Builder b(h, anatomy);
    auto x = b.unet("anatomy", "interim", 1, h.n_factors, h.base, h.depth);
    x = b.simple("anatomy.softmax", "softmax", {x});
    anatomy.output = b.add({"anatomy.factors", "threshold", {x}, 0, 0, 0, 1, 0, h.threshold});
  }
  g.push_back(anatomy);

  Subnet seg{"segmentor", {"anatomy.factors"}, "", {}};
  {
    Builder b(h, seg);
    auto x = b.conv("segmentor.conv1", "anatomy.factors", h.n_factors, h.seg_channels, h.seg_kernel);
    x = b.bn("segmentor.bn1", x, h.seg_channels);
    x = b.act("segmentor.act1", x);
    x = b.conv("segmentor.conv2", x, h.seg_channels, h.seg_channels, h.seg_kernel);
    x = b.bn("segmentor.bn2", x, h.seg_channels);
    x = b.act("segmentor.act2", x);
    x = b.conv("segmentor.conv3", x, h.seg_channels, h.n_classes, h.seg_kernel);
    seg.output = b.simple("segmentor.probs", "softmax", {x});
  }
  g.push_back(seg);

  Subnet mod{"modality", {"interim", "anatomy.factors"}, "", {}};
  {
    Builder b(h, mod);
    auto x = b.simple("modality.input", "concat", {"interim", "anatomy.factors"});
    int ch = 1 + h.n_factors;
    for (std::size_t j = 0; j < h.mod_channels.size(); ++j) {
      const std::string s = std::to_string(j);
      x = b.conv("modality.conv" + s, x, ch, h.mod_channels[j], 3, 2);
      x = b.bn("modality.bn" + s, x, h.mod_channels[j]);
      x = b.act("modality.act" + s, x);
      ch = h.mod_channels[j];
    }
    x = b.simple("modality.pool", "global_avgpool", {x});
    x = b.dense("modality.fc", x, ch, h.mod_hidden);
    x = b.act("modality.fc_act", x);
    mod.output = b.dense("modality.mu", x, h.mod_hidden, h.z_dim);
    b.dense("modality.logvar", x, h.mod_hidden, h.z_dim);
  }
  g.push_back(mod);

  Subnet dec{"decoder", {"anatomy.factors", "modality.mu"}, "", {}};
  {
    Builder b(h, dec);
    std::string x = "anatomy.factors";
    int ch = h.n_factors;
    for (int j = 0; j < h.dec_blocks; ++j) {
      const std::string s = std::to_string(j);
      x = b.conv("decoder.conv" + s, x, ch, h.dec_channels, h.kernel);
      x = b.bn("decoder.bn" + s, x, h.dec_channels);
      const auto gm = b.dense("decoder.gamma" + s, "modality.mu", h.z_dim, h.dec_channels);
      const auto bt = b.dense("decoder.beta" + s, "modality.mu", h.z_dim, h.dec_channels);
      x = b.simple("decoder.film" + s, "film", {x, gm, bt});
      x = b.act("decoder.act" + s, x);
      ch = h.dec_channels;
    }
    dec.output = b.conv("decoder.out", x, ch, 1, h.kernel);
  }
  g.push_back(dec);

  Subnet fusion{"fusion", {"decoder.out", "interim"}, "", {}};
  {
    Builder b(h, fusion);
    auto x = b.simple("fusion.input", "concat", {"decoder.out", "interim"});
    fusion.output = b.unet("fusion", x, 2, 1, h.fusion_base, h.fusion_depth);
  }
  g.push_back(fusion);
  return g;
}

namespace {

json graph_to_json(const std::vector<Subnet>& g) {
  json subnets = json::array();
  for (const auto& s : g) {
    json layers = json::array();
    for (const auto& l : s.layers) layers.push_back(layer_to_json(l));
    subnets.push_back({{"name", s.name}, {"inputs", s.inputs}, {"output", s.output}, {"layers", layers}});
  }
  return subnets;
}

}  // namespace

std::string manifest_json(const Hyper& h) {
  json j = {{"format", "xsdnet"}, {"version", 1}, {"hyper", hyper_to_json(h)}, {"subnets", graph_to_json(build_graph(h))}};
  return j.dump();
}

Hyper parse_hyper(const std::string& manifest) {
  json j;
  try {
    j = json::parse(manifest);
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("manifest is not valid JSON: ") + e.what());
  }
  require(j.is_object() && j.value("format", "") == "xsdnet", ErrorCode::Format, "manifest: format is not 'xsdnet'");
  require(j.value("version", 0) == 1, ErrorCode::Format, "manifest: unsupported version");
  require(j.contains("hyper") && j["hyper"].is_object(), ErrorCode::Format, "manifest: missing 'hyper'");
  const json& hj = j["hyper"];
  Hyper h;
  try {
    auto get_i = [&](const char* k, int& v) {
      if (hj.contains(k)) v = hj.at(k).get<int>();
    };
    auto get_f = [&](const char* k, float& v) {
      if (hj.contains(k)) v = hj.at(k).get<float>();
    };
    get_i("n_factors", h.n_factors);
    get_i("n_classes", h.n_classes);
    get_i("z_dim", h.z_dim);
    get_i("depth", h.depth);
    get_i("base", h.base);
    get_i("kernel", h.kernel);
    get_i("seg_channels", h.seg_channels);
    get_i("seg_kernel", h.seg_kernel);
    if (hj.contains("mod_channels")) h.mod_channels = hj.at("mod_channels").get<std::vector<int>>();
    get_i("mod_hidden", h.mod_hidden);
    get_i("dec_channels", h.dec_channels);
    get_i("dec_blocks", h.dec_blocks);
    get_i("fusion_depth", h.fusion_depth);
    get_i("fusion_base", h.fusion_base);
    get_f("threshold", h.threshold);
    get_f("slope", h.slope);
    get_f("bn_eps", h.bn_eps);
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("manifest: bad hyper value: ") + e.what());
  }
  h.validate();
  return h;
}

std::vector<std::pair<std::string, std::vector<int>>> layer_params(const Layer& l) {
  if (l.type == "conv2d") return {{l.name + ".weight", {l.out, l.in, l.kernel, l.kernel}}, {l.name + ".bias", {l.out}}};
  if (l.type == "dense") return {{l.name + ".weight", {l.out, l.in}}, {l.name + ".bias", {l.out}}};
  if (l.type == "batchnorm")
    return {{l.name + ".gamma", {l.in}}, {l.name + ".beta", {l.in}}, {l.name + ".mean", {l.in}}, {l.name + ".var", {l.in}}};
  return {};
}

WeightStore init_weights(const Hyper& h, std::uint64_t seed) {
  const auto g = build_graph(h);
  WeightStore s;
  s.set_manifest(manifest_json(h));
  std::mt19937_64 rng(seed);
  // Uniform in [-1, 1) from the top 53 bits; independent of the standard library.
  auto uni = [&] { return static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0); };
  for (const auto& net : g)
    for (const auto& l : net.layers) {
      for (auto& [name, shape] : layer_params(l)) {
        Tensor t(shape);
        const std::string suffix = name.substr(l.name.size() + 1);
        if (suffix == "weight") {
          const int fan_in = l.type == "conv2d" ? l.in * l.kernel * l.kernel : l.in;
          const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
          for (auto& v : t.data) v = bound * uni();
        } else if (suffix == "gamma" || suffix == "var") {
          std::fill(t.data.begin(), t.data.end(), 1.0f);
        } else if (suffix == "bias" && l.name.rfind("decoder.gamma", 0) == 0) {
          std::fill(t.data.begin(), t.data.end(), 1.0f);  // FiLM starts as identity scale
        }
        s.put(name, std::move(t));
      }
    }
  return s;
}

// ---------------------------------------------------------------- model

Model::Model(WeightStore store) : store_(std::move(store)) {
  const std::string text = store_.manifest_json();
  hyper_ = parse_hyper(text);
  graph_ = build_graph(hyper_);
  const json got = json::parse(text);
  require(got.contains("subnets") && got["subnets"].is_array(), ErrorCode::Format, "manifest: missing 'subnets'");
  const json want = graph_to_json(graph_);
  const json& gs = got["subnets"];
  require(gs.size() == want.size(), ErrorCode::Format,
          "manifest: " + std::to_string(gs.size()) + " subnets, expected " + std::to_string(want.size()));
  for (std::size_t i = 0; i < want.size(); ++i) {
    const json& w = want[i];
    const json& s = gs[i];
    const std::string name = w["name"];
    require(s.is_object() && s.value("name", "") == name && s.value("inputs", json()) == w["inputs"] &&
                s.value("output", "") == w["output"],
            ErrorCode::Format, "manifest: subnet " + std::to_string(i) + " does not match '" + name + "'");
    const json& wl = w["layers"];
    const json sl = s.value("layers", json::array());
    for (std::size_t k = 0; k < std::max(wl.size(), sl.size()); ++k) {
      if (k >= sl.size()) fail(ErrorCode::Format, "manifest: subnet '" + name + "' is missing layer '" + wl[k]["name"].get<std::string>() + "'");
      if (k >= wl.size()) fail(ErrorCode::Format, "manifest: subnet '" + name + "' has unexpected layer " + sl[k].dump());
      if (sl[k] != wl[k])
        fail(ErrorCode::Format, "manifest: layer '" + wl[k]["name"].get<std::string>() +
                                    "' does not match the xSDNet topology (expected " + wl[k].dump() + ", got " +
                                    sl[k].dump() + ")");
    }
  }
  std::set<std::string> expected = {kManifestName};
  for (const auto& net : graph_)
    for (const auto& l : net.layers)
      for (const auto& [name, shape] : layer_params(l)) {
        expected.insert(name);
        require(store_.has(name), ErrorCode::Format, "layer '" + l.name + "': missing tensor '" + name + "'");
        const Tensor& t = store_.get(name);
        Tensor want_shape(shape);
        require(t.shape == shape, ErrorCode::ShapeMismatch,
                "tensor '" + name + "' has shape " + t.shape_str() + ", expected " + want_shape.shape_str());
      }
  for (const auto& [name, t] : store_.tensors())
    require(expected.count(name) > 0, ErrorCode::Format, "unexpected tensor '" + name + "'");
}

const Subnet& Model::subnet(const std::string& name) const {
  for (const auto& s : graph_)
    if (s.name == name) return s;
  fail(ErrorCode::Internal, "no subnet '" + name + "'");
}

Tensor Model::run(const Subnet& net, const std::vector<const Tensor*>& inputs) const {
  std::unordered_map<std::string, Tensor> env;
  for (std::size_t i = 0; i < net.inputs.size(); ++i) env[net.inputs[i]] = *inputs[i];
  auto in = [&](const Layer& l, std::size_t k) -> const Tensor& {
    const auto it = env.find(l.inputs.at(k));
    require(it != env.end(), ErrorCode::Internal, "layer '" + l.name + "': input '" + l.inputs[k] + "' not computed");
    return it->second;
  };
  auto p = [&](const Layer& l, const char* s) -> const Tensor& { return store_.get(l.name + "." + s); };
  for (const auto& l : net.layers) {
    Tensor y;
    if (l.type == "conv2d")
      y = ops::conv2d(in(l, 0), p(l, "weight"), p(l, "bias"), l.stride, l.pad, l.name);
    else if (l.type == "batchnorm")
      y = ops::batchnorm(in(l, 0), p(l, "gamma"), p(l, "beta"), p(l, "mean"), p(l, "var"), l.value, l.name);
    else if (l.type == "leaky_relu")
      y = ops::leaky_relu(in(l, 0), l.value);
    else if (l.type == "maxpool2")
      y = ops::maxpool2(in(l, 0), l.name);
    else if (l.type == "upsample2")
      y = ops::upsample2(in(l, 0));
    else if (l.type == "concat")
      y = ops::concat(in(l, 0), in(l, 1), l.name);
    else if (l.type == "softmax")
      y = ops::softmax_channels(in(l, 0));
    else if (l.type == "threshold")
      y = ops::threshold(in(l, 0), l.value);
    else if (l.type == "global_avgpool")
      y = ops::global_avgpool(in(l, 0));
    else if (l.type == "dense")
      y = ops::dense(in(l, 0), p(l, "weight"), p(l, "bias"), l.name);
    else if (l.type == "film")
      y = ops::film(in(l, 0), in(l, 1), in(l, 2), l.name);
    else
      fail(ErrorCode::Internal, "layer '" + l.name + "': unknown type '" + l.type + "'");
    for (float v : y.data)
      require(std::isfinite(v), ErrorCode::Numeric, "layer '" + l.name + "': non-finite activation");
    env[l.name] = std::move(y);
  }
  return std::move(env.at(net.output));
}

namespace {

// Zero-pads height and width up to a multiple of m.
Tensor pad_to(const Tensor& x, int m) {
  const int h = (x.height() + m - 1) / m * m, w = (x.width() + m - 1) / m * m;
  if (h == x.height() && w == x.width()) return x;
  Tensor y({x.channels(), h, w});
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < x.height(); ++yy)
      for (int xx = 0; xx < x.width(); ++xx) y.at(c, yy, xx) = x.at(c, yy, xx);
  return y;
}

Tensor crop(const Tensor& x, int h, int w) {
  if (x.height() == h && x.width() == w) return x;
  Tensor y({x.channels(), h, w});
  for (int c = 0; c < x.channels(); ++c)
    for (int yy = 0; yy < h; ++yy)
      for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = x.at(c, yy, xx);
  return y;
}

void need_input(const Tensor& t, int channels, const char* who) {
  require(t.shape.size() == 3 && t.channels() == channels && t.height() >= 1 && t.width() >= 1,
          ErrorCode::ShapeMismatch,
          std::string(who) + ": expected [" + std::to_string(channels) + ",H,W], got " + t.shape_str());
}

}  // namespace

Tensor Model::anatomy_encode(const Tensor& interim) const {
  need_input(interim, 1, "anatomy_encode");
  const Tensor x = pad_to(interim, 1 << hyper_.depth);
  return crop(run(subnet("anatomy"), {&x}), interim.height(), interim.width());
}

Segmentation Model::segment(const Tensor& factors) const {
  need_input(factors, hyper_.n_factors, "segment");
  Segmentation s;
  s.probabilities = run(subnet("segmentor"), {&factors});
  const int h = factors.height(), w = factors.width();
  s.mask = LabelImage(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = 0;
      for (int c = 1; c < hyper_.n_classes; ++c)
        if (s.probabilities.at(c, y, x) > s.probabilities.at(best, y, x)) best = c;
      s.mask(y, x) = static_cast<std::uint8_t>(best);
    }
  return s;
}

std::vector<float> Model::modality_encode(const Tensor& interim, const Tensor& factors) const {
  need_input(interim, 1, "modality_encode");
  need_input(factors, hyper_.n_factors, "modality_encode");
  require(interim.height() == factors.height() && interim.width() == factors.width(), ErrorCode::ShapeMismatch,
          "modality_encode: interim " + interim.shape_str() + " and factors " + factors.shape_str() + " differ");
  const Tensor z = run(subnet("modality"), {&interim, &factors});
  return z.data;
}

Tensor Model::film_decode(const Tensor& factors, std::span<const float> z) const {
  need_input(factors, hyper_.n_factors, "film_decode");
  require(static_cast<int>(z.size()) == hyper_.z_dim, ErrorCode::ShapeMismatch,
          "film_decode: modality vector has " + std::to_string(z.size()) + " values, expected " +
              std::to_string(hyper_.z_dim));
  Tensor zt({hyper_.z_dim, 1, 1});
  std::copy(z.begin(), z.end(), zt.data.begin());
  return run(subnet("decoder"), {&factors, &zt});
}

Tensor Model::fuse(const Tensor& film_output, const Tensor& interim) const {
  need_input(film_output, 1, "fuse");
  need_input(interim, 1, "fuse");
  require(interim.height() == film_output.height() && interim.width() == film_output.width(),
          ErrorCode::ShapeMismatch, "fuse: inputs differ in size");
  const int m = 1 << hyper_.fusion_depth;
  const Tensor a = pad_to(film_output, m), b = pad_to(interim, m);
  return crop(run(subnet("fusion"), {&a, &b}), interim.height(), interim.width());
}

InferenceOutput Model::infer(const Image<float>& interim) const {
  require(interim.height >= 1 && interim.width >= 1, ErrorCode::ShapeMismatch, "infer: empty image");
  const Tensor x = from_image(interim);
  InferenceOutput out;
  out.factors = anatomy_encode(x);
  out.segmentation = segment(out.factors);
  out.z = modality_encode(x, out.factors);
  out.film_output = film_decode(out.factors, out.z);
  out.reconstruction = to_image(fuse(out.film_output, x));
  return out;
}

}  // namespace spiralrt::xsdnet
