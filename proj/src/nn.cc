/*
 * Copyright 2026 The splitfss Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "splitfss/nn.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "splitfss/errors.h"
#include "splitfss/sharing.h"

namespace splitfss {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "conv2d";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kFC: return "fc";
  }
  return "?";
}

const char* placement_name(Placement placement) {
  switch (placement) {
    case Placement::kClientFront: return "client_front";
    case Placement::kServer: return "server";
    case Placement::kClientOutput: return "client_output";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_shape(const std::string& what, const Shape& got) {
  throw ShapeMismatch(what + ": unexpected shape " + shape_string(got));
}

Shape layer_output_shape(const LayerSpec& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::kConv2D: {
      if (in.size() != 3 || l.kernel == 0 || l.stride == 0 ||
          in[1] < l.kernel || in[2] < l.kernel || l.out_channels == 0) {
        throw InvalidConfig("conv2d does not fit input " + shape_string(in));
      }
      return {l.out_channels, (in[1] - l.kernel) / l.stride + 1,
              (in[2] - l.kernel) / l.stride + 1};
    }
    case LayerKind::kMaxPool2x2:
      if (in.size() != 3 || in[1] < 2 || in[2] < 2) {
        throw InvalidConfig("maxpool2x2 does not fit input " + shape_string(in));
      }
      return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::kReLU:
      return in;
    case LayerKind::kFC:
      if (l.out_features == 0) throw InvalidConfig("fc layer needs out > 0");
      return {l.out_features};
  }
  return in;
}

size_t placement_rank(Placement p) { return static_cast<size_t>(p); }

Shape batched(size_t batch, const Shape& per_sample) {
  Shape s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

}  // namespace

std::vector<Shape> NetworkSpec::layer_shapes() const {
  std::vector<Shape> shapes{input_shape};
  for (const LayerSpec& l : layers) {
    shapes.push_back(layer_output_shape(l, shapes.back()));
  }
  return shapes;
}

void NetworkSpec::validate() const {
  if (input_shape.size() != 3 || shape_size(input_shape) == 0) {
    throw InvalidConfig("network input must be [C, H, W]");
  }
  if (classes == 0) throw InvalidConfig("network needs at least one class");
  if (layers.empty()) throw InvalidConfig("network has no layers");
  for (size_t i = 1; i < layers.size(); ++i) {
    if (placement_rank(layers[i].placement) <
        placement_rank(layers[i - 1].placement)) {
      throw InvalidConfig(
          "placements must run client_front, server, client_output");
    }
  }
  const std::vector<Shape> shapes = layer_shapes();
  if (shapes.back() != Shape{classes}) {
    throw InvalidConfig("network output " + shape_string(shapes.back()) +
                        " does not match " + std::to_string(classes) +
                        " classes");
  }
}

std::vector<size_t> NetworkSpec::indices(Placement placement) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].placement == placement) out.push_back(i);
  }
  return out;
}

NetworkSpec NetworkSpec::from_json(const std::string& text) {
  using nlohmann::json;
  NetworkSpec spec;
  try {
    const json j = json::parse(text);
    spec.name = j.value("name", "network");
    spec.input_shape = j.at("input").get<Shape>();
    spec.classes = j.at("classes").get<size_t>();
    for (const json& lj : j.at("layers")) {
      LayerSpec l;
      const std::string type = lj.at("type").get<std::string>();
      if (type == "conv2d") {
        l.kind = LayerKind::kConv2D;
        l.out_channels = lj.at("out_channels").get<size_t>();
        l.kernel = lj.at("kernel").get<size_t>();
        l.stride = lj.value("stride", size_t{1});
      } else if (type == "maxpool2x2") {
        l.kind = LayerKind::kMaxPool2x2;
      } else if (type == "relu") {
        l.kind = LayerKind::kReLU;
      } else if (type == "fc") {
        l.kind = LayerKind::kFC;
        l.out_features = lj.at("out").get<size_t>();
      } else {
        throw InvalidConfig("unknown layer type '" + type + "'");
      }
      const std::string place = lj.at("placement").get<std::string>();
      if (place == "client_front") {
        l.placement = Placement::kClientFront;
      } else if (place == "server") {
        l.placement = Placement::kServer;
      } else if (place == "client_output") {
        l.placement = Placement::kClientOutput;
      } else {
        throw InvalidConfig("unknown placement '" + place + "'");
      }
      spec.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad network config: ") + e.what());
  }
  spec.validate();
  return spec;
}

NetworkSpec NetworkSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open network config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

namespace {

LayerSpec conv(size_t out, size_t k) {
  LayerSpec l;
  l.kind = LayerKind::kConv2D;
  l.out_channels = out;
  l.kernel = k;
  return l;
}

LayerSpec simple(LayerKind kind, Placement p) {
  LayerSpec l;
  l.kind = kind;
  l.placement = p;
  return l;
}

LayerSpec fc(size_t out, Placement p) {
  LayerSpec l;
  l.kind = LayerKind::kFC;
  l.out_features = out;
  l.placement = p;
  return l;
}

std::vector<LayerSpec> front_layers() {
  const Placement p = Placement::kClientFront;
  return {conv(16, 5), simple(LayerKind::kMaxPool2x2, p),
          simple(LayerKind::kReLU, p), conv(16, 5),
          simple(LayerKind::kMaxPool2x2, p), simple(LayerKind::kReLU, p)};
}

}  // namespace

NetworkSpec network1(size_t classes) {
  NetworkSpec spec;
  spec.name = "network1";
  spec.input_shape = {1, 28, 28};
  spec.classes = classes;
  spec.layers = front_layers();
  spec.layers.push_back(fc(64, Placement::kServer));
  spec.layers.push_back(simple(LayerKind::kReLU, Placement::kServer));
  spec.layers.push_back(fc(classes, Placement::kClientOutput));
  spec.validate();
  return spec;
}

NetworkSpec network2(size_t classes) {
  NetworkSpec spec;
  spec.name = "network2";
  spec.input_shape = {1, 28, 28};
  spec.classes = classes;
  spec.layers = front_layers();
  spec.layers.push_back(fc(128, Placement::kServer));
  spec.layers.push_back(simple(LayerKind::kReLU, Placement::kServer));
  spec.layers.push_back(fc(64, Placement::kServer));
  spec.layers.push_back(simple(LayerKind::kReLU, Placement::kServer));
  spec.layers.push_back(fc(classes, Placement::kClientOutput));
  spec.validate();
  return spec;
}

void TrainConfig::validate(const FixedConfig& cfg) const {
  if (!(learning_rate > 0)) throw InvalidConfig("learning rate must be positive");
  if (batch_size == 0) throw InvalidConfig("batch size must be positive");
  const double scaled = std::ldexp(learning_rate, cfg.frac_bits);
  if (scaled != std::floor(scaled)) {
    throw InvalidConfig("learning rate is not exactly representable with " +
                        std::to_string(cfg.frac_bits) + " fractional bits");
  }
  encode(learning_rate, cfg);  // range check
}

LayerParams init_layer_params(const LayerSpec& spec, const Shape& input_shape,
                              size_t layer_index, uint64_t seed,
                              const FixedConfig& cfg) {
  LayerParams p;
  if (!spec.has_params()) return p;
  Shape w_shape;
  size_t fan_in, out;
  if (spec.kind == LayerKind::kConv2D) {
    fan_in = input_shape.at(0) * spec.kernel * spec.kernel;
    out = spec.out_channels;
    w_shape = {out, input_shape.at(0), spec.kernel, spec.kernel};
  } else {
    fan_in = shape_size(input_shape);
    out = spec.out_features;
    w_shape = {fan_in, out};
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Prg rng = Prg::from_seed(seed, "init/layer-" + std::to_string(layer_index));
  auto draw = [&](const Shape& shape) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = (2 * rng.next_unit() - 1) * bound;
    return FixedTensor::encode(v, shape, cfg);
  };
  p.w = draw(w_shape);
  p.b = draw({out});
  return p;
}

// ---- plaintext layers ----

FixedTensor conv2d_forward(const FixedTensor& x, const FixedTensor& w,
                           const FixedTensor& b, size_t stride,
                           Conv2dCache* cache) {
  if (x.rank() != 4) bad_shape("conv2d input", x.shape());
  if (w.rank() != 4 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3)) {
    bad_shape("conv2d weight", w.shape());
  }
  const size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const size_t O = w.dim(0), k = w.dim(2);
  if (b.size() != O) bad_shape("conv2d bias", b.shape());
  if (stride == 0 || H < k || W < k) bad_shape("conv2d input", x.shape());
  const size_t OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
  const size_t ckk = C * k * k;
  const FixedConfig& cfg = x.config();

  FixedTensor cols({B * OH * OW, ckk}, cfg);
  for (size_t n = 0; n < B; ++n) {
    for (size_t oh = 0; oh < OH; ++oh) {
      for (size_t ow = 0; ow < OW; ++ow) {
        uint64_t* row = &cols[((n * OH + oh) * OW + ow) * ckk];
        for (size_t c = 0; c < C; ++c) {
          for (size_t i = 0; i < k; ++i) {
            const uint64_t* src =
                x.data().data() + ((n * C + c) * H + oh * stride + i) * W + ow * stride;
            for (size_t j = 0; j < k; ++j) *row++ = src[j];
          }
        }
      }
    }
  }
  const FixedTensor wt = tensor_transpose(w.reshaped({O, ckk}));
  const FixedTensor prod = tensor_rescale(tensor_matmul(cols, wt));  // [BHW, O]
  FixedTensor out({B, O, OH, OW}, cfg);
  const uint64_t mask = cfg.mask();
  for (size_t n = 0; n < B; ++n) {
    for (size_t o = 0; o < O; ++o) {
      for (size_t p = 0; p < OH * OW; ++p) {
        out[(n * O + o) * OH * OW + p] = (prod[(n * OH * OW + p) * O + o] + b[o]) & mask;
      }
    }
  }
  if (cache != nullptr) {
    cache->cols = std::move(cols);
    cache->w = w;
    cache->input_shape = x.shape();
    cache->stride = stride;
  }
  return out;
}

ParamGrads conv2d_backward(const FixedTensor& grad_out, const Conv2dCache& cache) {
  const Shape& in = cache.input_shape;
  const size_t B = in[0], C = in[1], H = in[2], W = in[3];
  const size_t O = cache.w.dim(0), k = cache.w.dim(2), s = cache.stride;
  const size_t OH = (H - k) / s + 1, OW = (W - k) / s + 1;
  if (grad_out.shape() != Shape{B, O, OH, OW}) {
    bad_shape("conv2d grad", grad_out.shape());
  }
  const FixedConfig& cfg = grad_out.config();
  const size_t ckk = C * k * k;
  FixedTensor g({B * OH * OW, O}, cfg);  // rows follow the cols layout
  for (size_t n = 0; n < B; ++n) {
    for (size_t o = 0; o < O; ++o) {
      for (size_t p = 0; p < OH * OW; ++p) {
        g[(n * OH * OW + p) * O + o] = grad_out[(n * O + o) * OH * OW + p];
      }
    }
  }
  ParamGrads out;
  out.grad_w = tensor_rescale(tensor_matmul(tensor_transpose(g), cache.cols))
                   .reshaped(cache.w.shape());
  out.grad_b = tensor_sum_rows(g);
  const FixedTensor gcols = tensor_matmul(g, cache.w.reshaped({O, ckk}));
  FixedTensor gx({B, C, H, W}, cfg);
  for (size_t n = 0; n < B; ++n) {
    for (size_t oh = 0; oh < OH; ++oh) {
      for (size_t ow = 0; ow < OW; ++ow) {
        const uint64_t* row = gcols.data().data() + ((n * OH + oh) * OW + ow) * ckk;
        for (size_t c = 0; c < C; ++c) {
          for (size_t i = 0; i < k; ++i) {
            uint64_t* dst = &gx[((n * C + c) * H + oh * s + i) * W + ow * s];
            for (size_t j = 0; j < k; ++j) dst[j] += *row++;
          }
        }
      }
    }
  }
  const uint64_t mask = cfg.mask();
  for (auto& v : gx.raw()) v &= mask;
  out.grad_x = tensor_rescale(gx);
  return out;
}

FixedTensor maxpool2x2_forward(const FixedTensor& x, MaxPoolCache* cache) {
  if (x.rank() != 4 || x.dim(2) < 2 || x.dim(3) < 2) {
    bad_shape("maxpool2x2 input", x.shape());
  }
  const size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const size_t OH = H / 2, OW = W / 2;
  FixedTensor out({B, C, OH, OW}, x.config());
  std::vector<uint32_t> arg(out.size());
  size_t o = 0;
  for (size_t bc = 0; bc < B * C; ++bc) {
    for (size_t i = 0; i < OH; ++i) {
      for (size_t j = 0; j < OW; ++j, ++o) {
        size_t best = (bc * H + 2 * i) * W + 2 * j;
        for (size_t di = 0; di < 2; ++di) {
          for (size_t dj = 0; dj < 2; ++dj) {
            const size_t idx = (bc * H + 2 * i + di) * W + 2 * j + dj;
            if (x.signed_at(idx) > x.signed_at(best)) best = idx;
          }
        }
        out[o] = x[best];
        arg[o] = static_cast<uint32_t>(best);
      }
    }
  }
  if (cache != nullptr) {
    cache->argmax = std::move(arg);
    cache->input_shape = x.shape();
  }
  return out;
}

FixedTensor maxpool2x2_backward(const FixedTensor& grad_out,
                                const MaxPoolCache& cache) {
  if (grad_out.size() != cache.argmax.size()) {
    bad_shape("maxpool2x2 grad", grad_out.shape());
  }
  FixedTensor gx(cache.input_shape, grad_out.config());
  for (size_t i = 0; i < grad_out.size(); ++i) gx[cache.argmax[i]] = grad_out[i];
  return gx;
}

FixedTensor relu_plain_forward(const FixedTensor& x, ReluCache* cache) {
  FixedTensor out(x.shape(), x.config());
  std::vector<uint8_t> nonneg(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    nonneg[i] = x.signed_at(i) >= 0;
    out[i] = nonneg[i] ? x[i] : 0;
  }
  if (cache != nullptr) cache->positive = std::move(nonneg);
  return out;
}

FixedTensor relu_plain_backward(const FixedTensor& grad_out,
                                const ReluCache& cache) {
  if (grad_out.size() != cache.positive.size()) {
    bad_shape("relu grad", grad_out.shape());
  }
  FixedTensor gx(grad_out.shape(), grad_out.config());
  for (size_t i = 0; i < gx.size(); ++i) {
    gx[i] = cache.positive[i] ? grad_out[i] : 0;
  }
  return gx;
}

FixedTensor fc_plain_forward(const FixedTensor& x, const FixedTensor& w,
                             const FixedTensor& b, FcCache* cache) {
  if (x.rank() != 2) bad_shape("fc input", x.shape());
  if (w.rank() != 2 || w.dim(0) != x.dim(1)) bad_shape("fc weight", w.shape());
  if (b.size() != w.dim(1)) bad_shape("fc bias", b.shape());
  FixedTensor z = tensor_add_row(tensor_rescale(tensor_matmul(x, w)), b);
  if (cache != nullptr) {
    cache->x = x;
    cache->w = w;
  }
  return z;
}

ParamGrads fc_plain_backward(const FixedTensor& grad_out, const FcCache& cache) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != cache.x.dim(0) ||
      grad_out.dim(1) != cache.w.dim(1)) {
    bad_shape("fc grad", grad_out.shape());
  }
  ParamGrads g;
  g.grad_x = tensor_rescale(tensor_matmul(grad_out, tensor_transpose(cache.w)));
  g.grad_w = tensor_rescale(tensor_matmul(tensor_transpose(cache.x), grad_out));
  g.grad_b = tensor_sum_rows(grad_out);
  return g;
}

MseResult mse_loss(const FixedTensor& y_hat, const FixedTensor& y) {
  check_same_shape(y_hat, y, "mse");
  if (y_hat.rank() != 2) bad_shape("mse input", y_hat.shape());
  const FixedConfig& cfg = y_hat.config();
  const int n = cfg.bit_width;
  const __int128 count = static_cast<__int128>(y_hat.size());
  MseResult r;
  r.grad = FixedTensor(y_hat.shape(), cfg);
  double sum_sq = 0;
  for (size_t i = 0; i < y_hat.size(); ++i) {
    const int64_t d = to_signed(y_hat[i] - y[i], n);
    const double dr = std::ldexp(static_cast<double>(d), -cfg.frac_bits);
    sum_sq += dr * dr;
    // round(2 d / count), halves away from zero, in exact integer arithmetic.
    const __int128 num = 2 * static_cast<__int128>(d);
    const __int128 q = (num >= 0 ? num + count / 2 : num - count / 2) / count;
    r.grad[i] = from_signed(static_cast<int64_t>(q), n);
  }
  // Wraps like any other ring value rather than throwing; the loss is only
  // reported, and small test rings can exceed the representable range.
  const double mean = y_hat.size() == 0 ? 0.0 : sum_sq / static_cast<double>(y_hat.size());
  const double scaled = std::ldexp(mean, cfg.frac_bits);
  const uint64_t raw = scaled < 0x1p63 ? static_cast<uint64_t>(std::llround(scaled))
                                       : std::numeric_limits<uint64_t>::max();
  r.loss = FixedTensor::scalar(RingElement(raw, n), cfg);
  return r;
}

FixedTensor sgd_update(const FixedTensor& param, const FixedTensor& grad,
                       RingElement eta) {
  check_same_shape(param, grad, "sgd");
  return tensor_sub(param, tensor_rescale(tensor_scale(grad, eta.value())));
}

FixedTensor sgd_update_share(int party, const FixedTensor& param,
                             const FixedTensor& grad, RingElement eta) {
  check_same_shape(param, grad, "sgd");
  return tensor_sub(param,
                    truncate_share(party, tensor_scale(grad, eta.value())));
}

// ---- PlainSegment ----

PlainSegment::PlainSegment(const NetworkSpec& spec, std::vector<size_t> layers,
                           const FixedConfig& cfg)
    : indices_(std::move(layers)), cfg_(cfg) {
  const std::vector<Shape> all = spec.layer_shapes();
  for (size_t i = 0; i < indices_.size(); ++i) {
    const size_t idx = indices_[i];
    if (i > 0 && idx != indices_[i - 1] + 1) {
      throw InvalidConfig("segment layers must be contiguous");
    }
    layers_.push_back(spec.layers.at(idx));
    shapes_.push_back(all.at(idx));
  }
  if (!indices_.empty()) {
    input_shape_ = all.at(indices_.front());
    output_shape_ = all.at(indices_.back() + 1);
  }
  params_.resize(layers_.size());
  grads_.resize(layers_.size());
  caches_.resize(layers_.size());
}

void PlainSegment::init(uint64_t seed) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    params_[i] = init_layer_params(layers_[i], shapes_[i], indices_[i], seed, cfg_);
  }
}

FixedTensor PlainSegment::forward(const FixedTensor& x) {
  if (x.rank() == 0) bad_shape("segment input", x.shape());
  if (layers_.empty()) return x;
  const size_t B = x.dim(0);
  if (x.size() != B * shape_size(input_shape_)) bad_shape("segment input", x.shape());
  FixedTensor h = x.reshaped(batched(B, input_shape_));
  for (size_t i = 0; i < layers_.size(); ++i) {
    Cache& c = caches_[i];
    c.in_shape = h.shape();
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerKind::kConv2D:
        h = conv2d_forward(h, params_[i].w, params_[i].b, l.stride, &c.conv);
        break;
      case LayerKind::kMaxPool2x2:
        h = maxpool2x2_forward(h, &c.pool);
        break;
      case LayerKind::kReLU:
        h = relu_plain_forward(h, &c.relu);
        break;
      case LayerKind::kFC:
        h = fc_plain_forward(h.reshaped({B, h.size() / B}), params_[i].w,
                             params_[i].b, &c.fc);
        break;
    }
  }
  return h;
}

FixedTensor PlainSegment::backward(const FixedTensor& grad_out) {
  FixedTensor g = grad_out;
  if (layers_.empty()) return g;
  for (size_t r = layers_.size(); r-- > 0;) {
    Cache& c = caches_[r];
    switch (layers_[r].kind) {
      case LayerKind::kConv2D: {
        ParamGrads pg = conv2d_backward(g.reshaped(
            {c.in_shape[0], layers_[r].out_channels,
             (c.in_shape[2] - layers_[r].kernel) / layers_[r].stride + 1,
             (c.in_shape[3] - layers_[r].kernel) / layers_[r].stride + 1}), c.conv);
        grads_[r] = {std::move(pg.grad_w), std::move(pg.grad_b)};
        g = std::move(pg.grad_x);
        break;
      }
      case LayerKind::kMaxPool2x2:
        g = maxpool2x2_backward(g, c.pool);
        break;
      case LayerKind::kReLU:
        g = relu_plain_backward(g, c.relu).reshaped(c.in_shape);
        break;
      case LayerKind::kFC: {
        ParamGrads pg = fc_plain_backward(
            g.reshaped({c.in_shape[0], layers_[r].out_features}), c.fc);
        grads_[r] = {std::move(pg.grad_w), std::move(pg.grad_b)};
        g = pg.grad_x.reshaped(c.in_shape);
        break;
      }
    }
  }
  return g;
}

void PlainSegment::sgd(RingElement eta) {
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (!layers_[i].has_params()) continue;
    if (grads_[i].w.size() == 0) throw ProtocolError("sgd before backward");
    params_[i].w = sgd_update(params_[i].w, grads_[i].w, eta);
    params_[i].b = sgd_update(params_[i].b, grads_[i].b, eta);
  }
}

// ---- secure layers ----

FixedTensor fc_secure_forward(int party, const FixedTensor& x,
                              const FixedTensor& w, const FixedTensor& b,
                              MatTripleShare& t, Channel& peer,
                              SecureFcCache* cache) {
  if (x.rank() != 2) bad_shape("fc input", x.shape());
  if (b.size() != w.dim(1)) bad_shape("fc bias", b.shape());
  if (t.party() != party) throw PartyMismatch("triple belongs to the other server");
  const FixedTensor prod = secure_matmul(x, w, t, peer);
  FixedTensor z = tensor_add_row(truncate_share(party, prod), b);
  if (cache != nullptr) cache->x = x;
  return z;
}

ParamGrads fc_secure_backward(int party, const FixedTensor& grad_out,
                              const SecureFcCache& cache, const FixedTensor& w,
                              MatTripleShare& t_grad_x, MatTripleShare& t_grad_w,
                              Channel& peer) {
  if (grad_out.rank() != 2 || grad_out.dim(0) != cache.x.dim(0) ||
      grad_out.dim(1) != w.dim(1)) {
    bad_shape("fc grad", grad_out.shape());
  }
  ParamGrads g;
  g.grad_x = truncate_share(
      party, secure_matmul(grad_out, tensor_transpose(w), t_grad_x, peer));
  g.grad_w = truncate_share(
      party, secure_matmul(tensor_transpose(cache.x), grad_out, t_grad_w, peer));
  g.grad_b = tensor_sum_rows(grad_out);
  return g;
}

SecureReluResult relu_secure_forward(int party, const FixedTensor& x,
                                     KeyBundle& keys, TripleShare& select,
                                     Channel& peer) {
  if (keys.size() != x.size()) {
    throw ShapeMismatch("relu has " + std::to_string(x.size()) +
                        " inputs but " + std::to_string(keys.size()) + " keys");
  }
  if (keys.party() != party) throw PartyMismatch("keys belong to the other server");
  const FixedConfig& cfg = x.config();
  const FixedTensor masked = tensor_add(x, FixedTensor(x.shape(), keys.mask_shares(), cfg));
  const std::vector<uint64_t> other = exchange_ring(
      party, masked.data(), cfg.bit_width, PayloadKind::kOpening, peer);
  const FixedTensor x_pub = tensor_add(masked, FixedTensor(x.shape(), other, cfg));
  SecureReluResult r;
  r.bit = FixedTensor(x.shape(), keys.eval(x_pub.data()), cfg);
  r.y = relu_sign_to_select(r.bit, x, select, peer);
  return r;
}

FixedTensor relu_secure_backward(const FixedTensor& grad_out,
                                 const FixedTensor& bit, TripleShare& t,
                                 Channel& peer) {
  check_same_shape(grad_out, bit, "relu grad");
  return secure_mul(grad_out, bit, t, peer);
}

}  // namespace splitfss
