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

// Fixed-point network layers.
//
// Plaintext layers (convolution, 2x2 max pooling, ReLU, fully connected, MSE)
// run on the client and, in the public modes, on server P0. Products of two
// encoded values are accumulated exactly in the ring and rescaled once,
// rounding to nearest.
// The secure layers run on additive shares between the two servers: fully
// connected layers through Beaver matrix triples, ReLU through the FSS sign
// test and a select triple.
//
// Tensor layouts: images [B, C, H, W], conv weights [O, C, k, k], FC weights
// [in, out], activations entering an FC layer [B, in].

#ifndef SPLITFSS_NN_H_
#define SPLITFSS_NN_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "splitfss/beaver.h"
#include "splitfss/fss.h"
#include "splitfss/ring.h"
#include "splitfss/transport.h"

namespace splitfss {

enum class LayerKind { kConv2D, kMaxPool2x2, kReLU, kFC };
enum class Placement { kClientFront, kServer, kClientOutput };

const char* layer_kind_name(LayerKind kind);
const char* placement_name(Placement placement);

struct LayerSpec {
  LayerKind kind = LayerKind::kFC;
  Placement placement = Placement::kClientFront;
  size_t out_channels = 0;  // conv
  size_t kernel = 0;        // conv
  size_t stride = 1;        // conv
  size_t out_features = 0;  // fc

  bool has_params() const {
    return kind == LayerKind::kConv2D || kind == LayerKind::kFC;
  }
};

struct NetworkSpec {
  std::string name;
  Shape input_shape;  // per sample, [C, H, W]
  size_t classes = 0;
  std::vector<LayerSpec> layers;

  // Throws InvalidConfig when the placement order is not
  // client_front* server* client_output* or shapes do not chain.
  void validate() const;
  // Per-sample input shape of each layer, plus the final output shape.
  std::vector<Shape> layer_shapes() const;
  std::vector<size_t> indices(Placement placement) const;

  static NetworkSpec from_json(const std::string& text);
  static NetworkSpec load(const std::string& path);
};

// Conv(1->16, 5) MaxPool ReLU Conv(16->16, 5) MaxPool ReLU | FC(256->64) ReLU
// | FC(64->C).
NetworkSpec network1(size_t classes = 10);
// As network1 with a server segment FC(256->128) ReLU FC(128->64) ReLU.
NetworkSpec network2(size_t classes = 10);

struct TrainConfig {
  double learning_rate = 1.0;  // eta
  size_t batch_size = 16;      // n
  size_t batches = 0;          // N, batches per epoch
  size_t epochs = 2;           // E
  uint64_t seed = 1;

  // Throws InvalidConfig unless all fields are positive (epochs may be 0)
  // and eta is exactly representable with cfg.frac_bits fractional bits.
  void validate(const FixedConfig& cfg) const;
  bool operator==(const TrainConfig&) const = default;
};

struct LayerParams {
  FixedTensor w;
  FixedTensor b;
};

// Uniform in +-1/sqrt(fan_in) for weights and biases, from a stream keyed by
// (seed, layer index) so every role can derive the same initial values.
LayerParams init_layer_params(const LayerSpec& spec, const Shape& input_shape,
                              size_t layer_index, uint64_t seed,
                              const FixedConfig& cfg);

// ---- plaintext layers ----

struct Conv2dCache {
  FixedTensor cols;  // [B*OH*OW, C*k*k]
  FixedTensor w;
  Shape input_shape;
  size_t stride = 1;
};
struct ParamGrads {
  FixedTensor grad_x;
  FixedTensor grad_w;
  FixedTensor grad_b;
};

FixedTensor conv2d_forward(const FixedTensor& x, const FixedTensor& w,
                           const FixedTensor& b, size_t stride,
                           Conv2dCache* cache = nullptr);
ParamGrads conv2d_backward(const FixedTensor& grad_out, const Conv2dCache& cache);

struct MaxPoolCache {
  std::vector<uint32_t> argmax;  // flat input index per output element
  Shape input_shape;
};
FixedTensor maxpool2x2_forward(const FixedTensor& x, MaxPoolCache* cache = nullptr);
FixedTensor maxpool2x2_backward(const FixedTensor& grad_out,
                                const MaxPoolCache& cache);

struct ReluCache {
  std::vector<uint8_t> positive;
};
FixedTensor relu_plain_forward(const FixedTensor& x, ReluCache* cache = nullptr);
FixedTensor relu_plain_backward(const FixedTensor& grad_out, const ReluCache& cache);

struct FcCache {
  FixedTensor x;  // [B, in]
  FixedTensor w;
};
FixedTensor fc_plain_forward(const FixedTensor& x, const FixedTensor& w,
                             const FixedTensor& b, FcCache* cache = nullptr);
ParamGrads fc_plain_backward(const FixedTensor& grad_out, const FcCache& cache);

struct MseResult {
  FixedTensor loss;  // scalar
  FixedTensor grad;  // d loss / d y_hat
};
// J = mean((y_hat - y)^2), grad = 2 (y_hat - y) / (B * C).
MseResult mse_loss(const FixedTensor& y_hat, const FixedTensor& y);

// param - rescale(eta * grad).
FixedTensor sgd_update(const FixedTensor& param, const FixedTensor& grad,
                       RingElement eta);
// Same update on one party's shares; eta is public.
FixedTensor sgd_update_share(int party, const FixedTensor& param,
                             const FixedTensor& grad, RingElement eta);

// A run of plaintext layers with parameters and caches.
class PlainSegment {
 public:
  PlainSegment() = default;
  // `layers` are indices into spec.layers, in order.
  PlainSegment(const NetworkSpec& spec, std::vector<size_t> layers,
               const FixedConfig& cfg);

  void init(uint64_t seed);
  bool empty() const { return layers_.empty(); }
  const Shape& input_shape() const { return input_shape_; }   // per sample
  const Shape& output_shape() const { return output_shape_; } // per sample

  // x: [B, ...input_shape]. Keeps caches for backward. An empty segment
  // passes x through unchanged, and likewise its gradient.
  FixedTensor forward(const FixedTensor& x);
  // Returns the gradient with respect to the segment input and stores the
  // parameter gradients.
  FixedTensor backward(const FixedTensor& grad_out);
  void sgd(RingElement eta);

  std::vector<LayerParams>& params() { return params_; }
  const std::vector<LayerParams>& params() const { return params_; }
  const std::vector<size_t>& layer_indices() const { return indices_; }

 private:
  struct Cache {
    Conv2dCache conv;
    MaxPoolCache pool;
    ReluCache relu;
    FcCache fc;
    Shape in_shape;  // batched
  };

  std::vector<LayerSpec> layers_;
  std::vector<size_t> indices_;
  std::vector<Shape> shapes_;  // per-sample input shape of each layer
  Shape input_shape_, output_shape_;
  FixedConfig cfg_;
  std::vector<LayerParams> params_;
  std::vector<LayerParams> grads_;
  std::vector<Cache> caches_;
};

// ---- secure layers (one server's view) ----
//
// `party` is the server index (0 or 1); `peer` links the two servers.

struct SecureFcCache {
  FixedTensor x;  // share of the layer input [B, in]
};

// trunc(X W) + b on shares.
FixedTensor fc_secure_forward(int party, const FixedTensor& x,
                              const FixedTensor& w, const FixedTensor& b,
                              MatTripleShare& t, Channel& peer,
                              SecureFcCache* cache = nullptr);
// grad_x = trunc(G W^T) (with the pre-update W), grad_w = trunc(X^T G),
// grad_b = column sums of G.
ParamGrads fc_secure_backward(int party, const FixedTensor& grad_out,
                              const SecureFcCache& cache, const FixedTensor& w,
                              MatTripleShare& t_grad_x, MatTripleShare& t_grad_w,
                              Channel& peer);

struct SecureReluResult {
  FixedTensor y;    // share of ReLU(x)
  FixedTensor bit;  // share of 1[x >= 0], unscaled
};
// Opens x + alpha with the peer, evaluates the comparison keys and selects.
SecureReluResult relu_secure_forward(int party, const FixedTensor& x,
                                     KeyBundle& keys, TripleShare& select,
                                     Channel& peer);
FixedTensor relu_secure_backward(const FixedTensor& grad_out,
                                 const FixedTensor& bit, TripleShare& t,
                                 Channel& peer);

}  // namespace splitfss

#endif  // SPLITFSS_NN_H_
