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

#include "splitfss/protocol.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>
#include <utility>

#include "splitfss/beaver.h"
#include "splitfss/codec.h"
#include "splitfss/errors.h"
#include "splitfss/fss.h"
#include "splitfss/sharing.h"

namespace splitfss {
namespace {

constexpr std::initializer_list<Phase> kTrainPhases = {
    Phase::kForward, Phase::kLoss, Phase::kBackward};

uint64_t network_fingerprint(const NetworkSpec& spec) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<uint8_t>(v >> (8 * i));
      h *= 0x100000001b3ULL;
    }
  };
  for (size_t d : spec.input_shape) mix(d);
  mix(spec.classes);
  for (const LayerSpec& l : spec.layers) {
    mix(static_cast<uint64_t>(l.kind));
    mix(static_cast<uint64_t>(l.placement));
    mix(l.out_channels);
    mix(l.kernel);
    mix(l.stride);
    mix(l.out_features);
  }
  return h;
}

// Layers run by the servers: the middle segment, plus the output layer in
// vanilla split learning.
std::vector<size_t> server_layers(const SessionConfig& cfg) {
  std::vector<size_t> out;
  if (cfg.mode == Mode::kLocalPublic) return out;
  out = cfg.network.indices(Placement::kServer);
  if (cfg.mode == Mode::kVanillaPublic) {
    for (size_t i : cfg.network.indices(Placement::kClientOutput)) out.push_back(i);
  }
  return out;
}

// Flattened width of the activation entering layer `index` (or the network
// output when index == layers.size()).
size_t width_at(const NetworkSpec& spec, size_t index) {
  return shape_size(spec.layer_shapes().at(index));
}

size_t first_index_not_front(const NetworkSpec& spec) {
  const auto front = spec.indices(Placement::kClientFront);
  return front.empty() ? 0 : front.back() + 1;
}

size_t first_output_index(const NetworkSpec& spec) {
  const auto out = spec.indices(Placement::kClientOutput);
  return out.empty() ? spec.layers.size() : out.front();
}

size_t test_batch_count(size_t samples, size_t batch) {
  return (samples + batch - 1) / batch;
}

size_t test_batch_rows(size_t samples, size_t batch, size_t t) {
  return std::min(batch, samples - t * batch);
}

// Receives one message of `kind` and insists that it was sent in exactly the
// (epoch, batch, phase) this role is in.
ProtocolMessage recv_in_step(Channel& c, PayloadKind kind) {
  ProtocolMessage m = c.recv(kind);
  const MessageHeader& h = m.header;
  if (h.epoch != c.epoch() || h.batch != c.batch() || h.phase != c.phase()) {
    throw ProtocolError(std::string(kind_name(kind)) + " from " +
                        role_name(c.peer_role()) + " tagged " +
                        phase_name(h.phase) + " (" + std::to_string(h.epoch) +
                        "," + std::to_string(h.batch) + ") while in " +
                        phase_name(c.phase()) + " (" + std::to_string(c.epoch()) +
                        "," + std::to_string(c.batch()) + ")");
  }
  return m;
}

void send_ring(Channel& c, PayloadKind kind, const FixedTensor& t) {
  c.send(kind, pack_ring(t.data(), t.config().bit_width));
}

FixedTensor recv_ring(Channel& c, PayloadKind kind, const Shape& shape,
                      const FixedConfig& cfg) {
  const ProtocolMessage m = recv_in_step(c, kind);
  const size_t count = shape_size(shape);
  if (m.header.payload_length != count * cfg.element_bytes()) {
    throw ProtocolError(std::string(kind_name(kind)) + " payload has " +
                        std::to_string(m.header.payload_length) +
                        " bytes, expected " +
                        std::to_string(count * cfg.element_bytes()));
  }
  return FixedTensor(shape, unpack_ring(m.payload, cfg.bit_width), cfg);
}

FixedTensor flat(const FixedTensor& t) {
  return t.reshaped({t.dim(0), t.size() / t.dim(0)});
}

std::vector<size_t> argmax_rows(const FixedTensor& scores) {
  std::vector<size_t> out(scores.dim(0));
  const size_t c = scores.dim(1);
  for (size_t r = 0; r < out.size(); ++r) {
    size_t best = 0;
    for (size_t j = 1; j < c; ++j) {
      if (scores.signed_at(r * c + j) > scores.signed_at(r * c + best)) best = j;
    }
    out[r] = best;
  }
  return out;
}

// ---- synchronisation ----

struct SyncParams {
  uint8_t mode = 0;
  uint64_t fixed = 0;
  uint64_t network = 0;
  uint64_t eta = 0;
  uint32_t batch_size = 0;
  uint32_t batches = 0;
  uint32_t epochs = 0;
  uint64_t seed = 0;
  uint32_t test_samples = 0;

  static SyncParams from(const SessionConfig& cfg) {
    SyncParams p;
    p.mode = static_cast<uint8_t>(cfg.mode);
    p.fixed = cfg.fixed.fingerprint();
    p.network = network_fingerprint(cfg.network);
    p.eta = splitfss::encode(cfg.train.learning_rate, cfg.fixed).value();
    p.batch_size = static_cast<uint32_t>(cfg.train.batch_size);
    p.batches = static_cast<uint32_t>(cfg.train.batches);
    p.epochs = static_cast<uint32_t>(cfg.train.epochs);
    p.seed = cfg.train.seed;
    p.test_samples = static_cast<uint32_t>(cfg.test_samples);
    return p;
  }

  std::vector<uint8_t> encode() const {
    ByteWriter w;
    w.put_u8(mode);
    w.put_u64(fixed);
    w.put_u64(network);
    w.put_u64(eta);
    w.put_u32(batch_size);
    w.put_u32(batches);
    w.put_u32(epochs);
    w.put_u64(seed);
    w.put_u32(test_samples);
    return w.take();
  }

  static SyncParams decode(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    SyncParams p;
    p.mode = r.u8();
    p.fixed = r.u64();
    p.network = r.u64();
    p.eta = r.u64();
    p.batch_size = r.u32();
    p.batches = r.u32();
    p.epochs = r.u32();
    p.seed = r.u64();
    p.test_samples = r.u32();
    r.expect_end();
    return p;
  }
};

// Checks the client's parameters against ours, adopts the data-dependent
// counts, and acknowledges. Throws SyncMismatch after a negative ack.
void respond_sync(SessionConfig& cfg, Channel& client) {
  client.set_context(0, 0, Phase::kSetup);
  const SyncParams theirs = SyncParams::decode(recv_in_step(client, PayloadKind::kSyncParams).payload);
  const SyncParams mine = SyncParams::from(cfg);
  std::string diff;
  if (theirs.mode != mine.mode) diff = "mode";
  else if (theirs.fixed != mine.fixed) diff = "fixed-point parameters";
  else if (theirs.network != mine.network) diff = "network";
  else if (theirs.eta != mine.eta) diff = "learning rate";
  else if (theirs.batch_size != mine.batch_size) diff = "batch size";
  else if (theirs.epochs != mine.epochs) diff = "epochs";
  else if (theirs.seed != mine.seed) diff = "seed";
  else if (mine.batches != 0 && theirs.batches != mine.batches) diff = "batches per epoch";
  const uint8_t ok = diff.empty() ? 1 : 0;
  client.send(PayloadKind::kSyncAck, std::span<const uint8_t>(&ok, 1));
  if (!ok) throw SyncMismatch(std::string(role_name(client.local_role())) +
                              " disagrees with the client on " + diff);
  cfg.train.batches = theirs.batches;
  cfg.test_samples = theirs.test_samples;
}

void set_all(ChannelMap& peers, uint16_t epoch, uint32_t batch, Phase phase) {
  for (auto& [role, c] : peers) c->set_context(epoch, batch, phase);
}

Channel& lookup(ChannelMap& peers, Role role, Role local) {
  auto it = peers.find(role);
  if (it == peers.end() || it->second == nullptr) {
    throw InvalidConfig(std::string(role_name(local)) + " has no channel to " +
                        role_name(role));
  }
  return *it->second;
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::kLocalPublic: return "local-public";
    case Mode::kVanillaPublic: return "vanilla-public";
    case Mode::kUShapedPublic: return "ushaped-public";
    case Mode::kUShapedPrivate: return "ushaped-private";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  for (Mode m : {Mode::kLocalPublic, Mode::kVanillaPublic, Mode::kUShapedPublic,
                 Mode::kUShapedPrivate}) {
    if (text == mode_name(m)) return m;
  }
  throw InvalidConfig("unknown mode '" + text + "'");
}

std::vector<Role> session_roles(Mode mode) {
  switch (mode) {
    case Mode::kLocalPublic: return {Role::kClient};
    case Mode::kVanillaPublic:
    case Mode::kUShapedPublic: return {Role::kClient, Role::kServer0};
    case Mode::kUShapedPrivate:
      return {Role::kClient, Role::kServer0, Role::kServer1, Role::kDealer};
  }
  return {};
}

void SessionConfig::validate() const {
  fixed.validate();
  network.validate();
  train.validate(fixed);
  if (network.indices(Placement::kClientOutput).empty()) {
    throw InvalidConfig("network needs a client_output layer");
  }
  if (mode == Mode::kUShapedPrivate) {
    for (size_t i : network.indices(Placement::kServer)) {
      const LayerKind k = network.layers[i].kind;
      if (k != LayerKind::kFC && k != LayerKind::kReLU) {
        throw InvalidConfig(std::string("private server segment cannot run ") +
                            layer_kind_name(k));
      }
    }
  }
  if (train.epochs > std::numeric_limits<uint16_t>::max() - 1) {
    throw InvalidConfig("too many epochs");
  }
}

CommSummary summarize(const TrafficCounters& counters) {
  CommSummary s;
  s.client_train = counters.sent_by(Role::kClient, kTrainPhases);
  s.server_train = counters.sent_by(Role::kServer0, kTrainPhases) +
                   counters.sent_by(Role::kServer1, kTrainPhases);
  s.preprocessing = counters.total_sent({Phase::kPreprocessing});
  s.testing = counters.total_sent({Phase::kTest});
  s.setup = counters.total_sent({Phase::kSetup});
  return s;
}

// ---- Client ----

Client::Client(SessionConfig cfg, const Dataset& train, const Dataset* test,
               ChannelMap peers)
    : cfg_(std::move(cfg)),
      train_(train),
      test_(test),
      peers_(std::move(peers)),
      share_rng_(Prg::from_seed(cfg_.train.seed, "client/gradient-shares")) {
  const NetworkSpec& net = cfg_.network;
  const size_t B = cfg_.train.batch_size;
  cfg_.test_samples = test_ != nullptr ? test_->size() : 0;
  cfg_.validate();
  for (const Dataset* d : {&train_, test_}) {
    if (d != nullptr && d->size() > 0 &&
        (d->classes != net.classes || d->sample_shape() != net.input_shape)) {
      throw ShapeMismatch("dataset does not fit network " + net.name);
    }
  }
  const size_t available = train_.size() / B;
  if (cfg_.train.batches == 0) {
    cfg_.train.batches = available;
  } else if (cfg_.train.batches > available) {
    throw InvalidConfig("asked for " + std::to_string(cfg_.train.batches) +
                        " batches but the data holds " + std::to_string(available));
  }
  for (Role r : session_roles(cfg_.mode)) {
    if (r != Role::kClient) lookup(peers_, r, Role::kClient).set_session(cfg_.session_id);
  }

  front_ = PlainSegment(net, net.indices(Placement::kClientFront), cfg_.fixed);
  front_.init(cfg_.train.seed);
  if (cfg_.mode == Mode::kLocalPublic) {
    middle_ = PlainSegment(net, net.indices(Placement::kServer), cfg_.fixed);
    middle_.init(cfg_.train.seed);
  }
  if (cfg_.mode != Mode::kVanillaPublic) {
    output_ = PlainSegment(net, net.indices(Placement::kClientOutput), cfg_.fixed);
    output_.init(cfg_.train.seed);
  }
  cut_ = width_at(net, first_index_not_front(net));
  back_ = width_at(net, first_output_index(net));
  eta_ = encode(cfg_.train.learning_rate, cfg_.fixed);
}

Channel& Client::peer(Role role) { return lookup(peers_, role, Role::kClient); }

void Client::set_context(uint16_t epoch, uint32_t batch, Phase phase) {
  set_all(peers_, epoch, batch, phase);
}

void Client::synchronize() {
  set_context(0, 0, Phase::kSetup);
  const std::vector<uint8_t> params = SyncParams::from(cfg_).encode();
  std::vector<Role> others;
  for (Role r : session_roles(cfg_.mode)) {
    if (r != Role::kClient) others.push_back(r);
  }
  for (Role r : others) peer(r).send(PayloadKind::kSyncParams, params);
  for (Role r : others) {
    const ProtocolMessage ack = recv_in_step(peer(r), PayloadKind::kSyncAck);
    if (ack.payload.size() != 1 || ack.payload[0] != 1) {
      throw SyncMismatch(std::string(role_name(r)) +
                         " rejected the session parameters");
    }
  }
}

FixedTensor Client::recv_activation_sum(const Shape& shape) {
  FixedTensor h = recv_ring(peer(Role::kServer0), PayloadKind::kActivation, shape, cfg_.fixed);
  if (cfg_.mode == Mode::kUShapedPrivate) {
    h = tensor_add(h, recv_ring(peer(Role::kServer1), PayloadKind::kActivation,
                                shape, cfg_.fixed));
  }
  return h;
}

double Client::train_batch(uint16_t epoch, uint32_t batch,
                           const std::vector<size_t>& rows) {
  const FixedConfig& fc = cfg_.fixed;
  const size_t B = rows.size();
  const FixedTensor x = train_.batch_images(rows);
  const FixedTensor y = train_.batch_targets(rows);
  const Shape front_out = {B, cut_};
  const Shape back_in = {B, back_};

  if (cfg_.mode == Mode::kLocalPublic) {
    const FixedTensor a = flat(front_.forward(x));
    const FixedTensor h = flat(middle_.forward(a));
    const MseResult r = mse_loss(flat(output_.forward(h)), y);
    const FixedTensor gh = output_.backward(r.grad);
    front_.backward(middle_.backward(gh));
    output_.sgd(eta_);
    middle_.sgd(eta_);
    front_.sgd(eta_);
    return decode(r.loss.at(0), fc);
  }

  const bool priv = cfg_.mode == Mode::kUShapedPrivate;
  FixedTensor alpha;
  if (priv) {
    set_context(epoch, batch, Phase::kPreprocessing);
    alpha = recv_ring(peer(Role::kDealer), PayloadKind::kMask, front_out, fc);
  }

  set_context(epoch, batch, Phase::kForward);
  const FixedTensor a = flat(front_.forward(x));
  double loss = std::numeric_limits<double>::quiet_NaN();
  FixedTensor g;
  if (cfg_.mode == Mode::kVanillaPublic) {
    send_ring(peer(Role::kServer0), PayloadKind::kActivation, a);
    send_ring(peer(Role::kServer0), PayloadKind::kLabels, y);
    set_context(epoch, batch, Phase::kBackward);
    g = recv_ring(peer(Role::kServer0), PayloadKind::kGradient, front_out, fc);
  } else {
    if (priv) {
      const FixedTensor x_pub = tensor_add(a, alpha);
      send_ring(peer(Role::kServer0), PayloadKind::kActivation, x_pub);
      send_ring(peer(Role::kServer1), PayloadKind::kActivation, x_pub);
    } else {
      send_ring(peer(Role::kServer0), PayloadKind::kActivation, a);
    }
    const FixedTensor h = recv_activation_sum(back_in);

    set_context(epoch, batch, Phase::kLoss);
    const MseResult r = mse_loss(flat(output_.forward(h)), y);
    loss = decode(r.loss.at(0), fc);
    const FixedTensor gh = output_.backward(r.grad);
    output_.sgd(eta_);
    if (priv) {
      auto [g0, g1] = split(gh, share_rng_);
      send_ring(peer(Role::kServer0), PayloadKind::kGradient, g0.value);
      send_ring(peer(Role::kServer1), PayloadKind::kGradient, g1.value);
    } else {
      send_ring(peer(Role::kServer0), PayloadKind::kGradient, gh);
    }

    set_context(epoch, batch, Phase::kBackward);
    g = recv_ring(peer(Role::kServer0), PayloadKind::kGradient, front_out, fc);
    if (priv) {
      g = tensor_add(g, recv_ring(peer(Role::kServer1), PayloadKind::kGradient,
                                  front_out, fc));
    }
  }
  front_.backward(g);
  front_.sgd(eta_);
  return loss;
}

std::vector<size_t> epoch_order(size_t samples, uint64_t seed, size_t epoch) {
  std::vector<size_t> order(samples);
  std::iota(order.begin(), order.end(), size_t{0});
  Prg shuffle = Prg::from_seed(seed, "client/shuffle/" + std::to_string(epoch));
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[shuffle.next_below(i)]);
  }
  return order;
}

void Client::train() {
  const size_t B = cfg_.train.batch_size;
  const size_t N = cfg_.train.batches;
  for (size_t e = 0; e < cfg_.train.epochs; ++e) {
    const std::vector<size_t> order = epoch_order(train_.size(), cfg_.train.seed, e);
    double sum = 0;
    for (size_t i = 0; i < N; ++i) {
      const std::vector<size_t> rows(order.begin() + i * B, order.begin() + (i + 1) * B);
      sum += train_batch(static_cast<uint16_t>(e), static_cast<uint32_t>(i), rows);
    }
    epoch_loss_.push_back(N == 0 ? 0.0 : sum / N);
  }
}

std::vector<size_t> Client::predict_batch(uint16_t epoch, uint32_t batch,
                                          const FixedTensor& images) {
  const FixedConfig& fc = cfg_.fixed;
  const size_t B = images.dim(0);
  const Shape front_out = {B, cut_};
  if (cfg_.mode == Mode::kLocalPublic) {
    return argmax_rows(flat(output_.forward(flat(middle_.forward(flat(front_.forward(images)))))));
  }
  const bool priv = cfg_.mode == Mode::kUShapedPrivate;
  FixedTensor alpha;
  if (priv) {
    set_context(epoch, batch, Phase::kPreprocessing);
    alpha = recv_ring(peer(Role::kDealer), PayloadKind::kMask, front_out, fc);
  }
  set_context(epoch, batch, Phase::kTest);
  const FixedTensor a = flat(front_.forward(images));
  if (cfg_.mode == Mode::kVanillaPublic) {
    send_ring(peer(Role::kServer0), PayloadKind::kActivation, a);
    return argmax_rows(recv_ring(peer(Role::kServer0), PayloadKind::kPrediction,
                                 {B, cfg_.network.classes}, fc));
  }
  if (priv) {
    const FixedTensor x_pub = tensor_add(a, alpha);
    send_ring(peer(Role::kServer0), PayloadKind::kActivation, x_pub);
    send_ring(peer(Role::kServer1), PayloadKind::kActivation, x_pub);
  } else {
    send_ring(peer(Role::kServer0), PayloadKind::kActivation, a);
  }
  const FixedTensor h = recv_activation_sum({B, back_});
  return argmax_rows(flat(output_.forward(h)));
}

double Client::test() {
  if (test_ == nullptr || test_->size() == 0) return 0;
  const size_t B = cfg_.train.batch_size;
  const size_t T = test_->size();
  const uint16_t epoch = static_cast<uint16_t>(cfg_.train.epochs);
  size_t correct = 0;
  for (size_t t = 0; t < test_batch_count(T, B); ++t) {
    std::vector<size_t> rows(test_batch_rows(T, B, t));
    std::iota(rows.begin(), rows.end(), t * B);
    const std::vector<size_t> pred =
        predict_batch(epoch, static_cast<uint32_t>(t), test_->batch_images(rows));
    for (size_t r = 0; r < rows.size(); ++r) correct += pred[r] == test_->labels[rows[r]];
  }
  return static_cast<double>(correct) / static_cast<double>(T);
}

void Client::run() {
  synchronize();
  train();
  test();
}

// ---- Server ----

namespace {

// One server's correlated randomness for one batch.
struct ServerBatchMaterial {
  FixedTensor alpha;
  std::vector<MatTripleShare> fwd, grad_x, grad_w;  // per layer (FC only)
  std::vector<KeyBundle> keys;                      // per layer (ReLU only)
  std::vector<TripleShare> select, back;            // per layer (ReLU only)
};

ServerBatchMaterial read_material(int party, const SessionConfig& cfg,
                                  const std::vector<size_t>& layers,
                                  std::span<const uint8_t> payload, size_t rows,
                                  bool training) {
  ByteReader r(payload);
  ServerBatchMaterial m;
  const size_t n = layers.size();
  m.fwd.resize(n);
  m.grad_x.resize(n);
  m.grad_w.resize(n);
  m.keys.resize(n);
  m.select.resize(n);
  m.back.resize(n);
  m.alpha = r.tensor(cfg.fixed);
  for (size_t j = 0; j < n; ++j) {
    const LayerSpec& l = cfg.network.layers[layers[j]];
    if (l.kind == LayerKind::kFC) {
      m.fwd[j] = MatTripleShare::deserialize(r, party, cfg.fixed);
      if (training) {
        m.grad_x[j] = MatTripleShare::deserialize(r, party, cfg.fixed);
        m.grad_w[j] = MatTripleShare::deserialize(r, party, cfg.fixed);
      }
    } else {
      m.keys[j] = KeyBundle::deserialize(r, party);
      m.select[j] = TripleShare::deserialize(r, party, cfg.fixed);
      if (training) m.back[j] = TripleShare::deserialize(r, party, cfg.fixed);
    }
  }
  r.expect_end();
  if (m.alpha.rank() != 2 || m.alpha.dim(0) != rows) {
    throw ProtocolError("preprocessing batch has the wrong row count");
  }
  return m;
}

}  // namespace

Server::Server(int party, SessionConfig cfg, ChannelMap peers)
    : party_(party), cfg_(std::move(cfg)), peers_(std::move(peers)) {
  if (party != 0 && party != 1) throw PartyMismatch("server party must be 0 or 1");
  cfg_.validate();
  if (cfg_.mode == Mode::kLocalPublic ||
      (party == 1 && cfg_.mode != Mode::kUShapedPrivate)) {
    throw InvalidConfig(std::string("no ") + role_name(server_role(party)) +
                        " in mode " + mode_name(cfg_.mode));
  }
  for (Role r : session_roles(cfg_.mode)) {
    if (r != server_role(party)) peer(r).set_session(cfg_.session_id);
  }
  layers_ = server_layers(cfg_);
  if (cfg_.mode != Mode::kUShapedPrivate) {
    plain_ = PlainSegment(cfg_.network, layers_, cfg_.fixed);
    plain_.init(cfg_.train.seed);
  }
  shares_.resize(layers_.size());
  eta_ = encode(cfg_.train.learning_rate, cfg_.fixed);
}

Channel& Server::peer(Role role) { return lookup(peers_, role, server_role(party_)); }

void Server::set_context(uint16_t epoch, uint32_t batch, Phase phase) {
  set_all(peers_, epoch, batch, phase);
}

std::vector<LayerParams> Server::params() const {
  return cfg_.mode == Mode::kUShapedPrivate ? shares_ : plain_.params();
}

void Server::synchronize() {
  set_context(0, 0, Phase::kSetup);
  respond_sync(cfg_, peer(Role::kClient));
}

void Server::receive_weight_shares() {
  set_context(0, 0, Phase::kPreprocessing);
  const ProtocolMessage m = recv_in_step(peer(Role::kDealer), PayloadKind::kWeightShares);
  ByteReader r(m.payload);
  for (size_t j = 0; j < layers_.size(); ++j) {
    if (!cfg_.network.layers[layers_[j]].has_params()) continue;
    shares_[j].w = r.tensor(cfg_.fixed);
    shares_[j].b = r.tensor(cfg_.fixed);
  }
  r.expect_end();
}

void Server::train_batch(uint16_t epoch, uint32_t batch) {
  const FixedConfig& fc = cfg_.fixed;
  const NetworkSpec& net = cfg_.network;
  const size_t B = cfg_.train.batch_size;
  const Shape in_shape = {B, width_at(net, layers_.empty() ? first_index_not_front(net)
                                                           : layers_.front())};
  const Shape out_shape = {B, width_at(net, layers_.empty() ? first_index_not_front(net)
                                                            : layers_.back() + 1)};
  Channel& client = peer(Role::kClient);

  if (cfg_.mode != Mode::kUShapedPrivate) {
    set_context(epoch, batch, Phase::kForward);
    const FixedTensor a = recv_ring(client, PayloadKind::kActivation, in_shape, fc);
    FixedTensor g;
    if (cfg_.mode == Mode::kVanillaPublic) {
      const FixedTensor y = recv_ring(client, PayloadKind::kLabels, out_shape, fc);
      const FixedTensor y_hat = flat(plain_.forward(a));
      set_context(epoch, batch, Phase::kLoss);
      g = mse_loss(y_hat, y).grad;
    } else {
      send_ring(client, PayloadKind::kActivation, flat(plain_.forward(a)));
      set_context(epoch, batch, Phase::kLoss);
      g = recv_ring(client, PayloadKind::kGradient, out_shape, fc);
    }
    set_context(epoch, batch, Phase::kBackward);
    const FixedTensor gx = flat(plain_.backward(g));
    plain_.sgd(eta_);
    send_ring(client, PayloadKind::kGradient, gx);
    return;
  }

  Channel& other = peer(server_role(1 - party_));
  set_context(epoch, batch, Phase::kPreprocessing);
  ServerBatchMaterial m = read_material(
      party_, cfg_, layers_,
      recv_in_step(peer(Role::kDealer), PayloadKind::kPreprocessing).payload, B, true);

  set_context(epoch, batch, Phase::kForward);
  const FixedTensor x_pub = recv_ring(client, PayloadKind::kActivation, in_shape, fc);
  FixedTensor h = tensor_sub(public_as_share(party_, x_pub), m.alpha);
  std::vector<SecureFcCache> caches(layers_.size());
  std::vector<FixedTensor> bits(layers_.size());
  for (size_t j = 0; j < layers_.size(); ++j) {
    if (net.layers[layers_[j]].kind == LayerKind::kFC) {
      h = fc_secure_forward(party_, h, shares_[j].w, shares_[j].b, m.fwd[j], other,
                            &caches[j]);
    } else {
      SecureReluResult r = relu_secure_forward(party_, h, m.keys[j], m.select[j], other);
      bits[j] = std::move(r.bit);
      h = std::move(r.y);
    }
  }
  send_ring(client, PayloadKind::kActivation, h);

  set_context(epoch, batch, Phase::kLoss);
  FixedTensor g = recv_ring(client, PayloadKind::kGradient, out_shape, fc);

  set_context(epoch, batch, Phase::kBackward);
  for (size_t j = layers_.size(); j-- > 0;) {
    if (net.layers[layers_[j]].kind == LayerKind::kFC) {
      ParamGrads pg = fc_secure_backward(party_, g, caches[j], shares_[j].w,
                                         m.grad_x[j], m.grad_w[j], other);
      shares_[j].w = sgd_update_share(party_, shares_[j].w, pg.grad_w, eta_);
      shares_[j].b = sgd_update_share(party_, shares_[j].b, pg.grad_b, eta_);
      g = std::move(pg.grad_x);
    } else {
      g = relu_secure_backward(g, bits[j], m.back[j], other);
    }
  }
  send_ring(client, PayloadKind::kGradient, g);
}

void Server::test_batch(uint16_t epoch, uint32_t batch, size_t rows) {
  const FixedConfig& fc = cfg_.fixed;
  const NetworkSpec& net = cfg_.network;
  const Shape in_shape = {rows, width_at(net, layers_.empty() ? first_index_not_front(net)
                                                              : layers_.front())};
  Channel& client = peer(Role::kClient);
  if (cfg_.mode != Mode::kUShapedPrivate) {
    set_context(epoch, batch, Phase::kTest);
    const FixedTensor a = recv_ring(client, PayloadKind::kActivation, in_shape, fc);
    send_ring(client,
              cfg_.mode == Mode::kVanillaPublic ? PayloadKind::kPrediction
                                                : PayloadKind::kActivation,
              flat(plain_.forward(a)));
    return;
  }
  Channel& other = peer(server_role(1 - party_));
  set_context(epoch, batch, Phase::kPreprocessing);
  ServerBatchMaterial m = read_material(
      party_, cfg_, layers_,
      recv_in_step(peer(Role::kDealer), PayloadKind::kPreprocessing).payload, rows, false);
  set_context(epoch, batch, Phase::kTest);
  const FixedTensor x_pub = recv_ring(client, PayloadKind::kActivation, in_shape, fc);
  FixedTensor h = tensor_sub(public_as_share(party_, x_pub), m.alpha);
  for (size_t j = 0; j < layers_.size(); ++j) {
    if (net.layers[layers_[j]].kind == LayerKind::kFC) {
      h = fc_secure_forward(party_, h, shares_[j].w, shares_[j].b, m.fwd[j], other);
    } else {
      h = relu_secure_forward(party_, h, m.keys[j], m.select[j], other).y;
    }
  }
  send_ring(client, PayloadKind::kActivation, h);
}

void Server::run() {
  synchronize();
  if (cfg_.mode == Mode::kUShapedPrivate) receive_weight_shares();
  for (size_t e = 0; e < cfg_.train.epochs; ++e) {
    for (size_t i = 0; i < cfg_.train.batches; ++i) {
      train_batch(static_cast<uint16_t>(e), static_cast<uint32_t>(i));
    }
  }
  const size_t B = cfg_.train.batch_size, T = cfg_.test_samples;
  for (size_t t = 0; t < test_batch_count(T, B); ++t) {
    test_batch(static_cast<uint16_t>(cfg_.train.epochs), static_cast<uint32_t>(t),
               test_batch_rows(T, B, t));
  }
}

// ---- Dealer ----

Dealer::Dealer(SessionConfig cfg, ChannelMap peers)
    : cfg_(std::move(cfg)),
      peers_(std::move(peers)),
      rng_(Prg::from_seed(cfg_.train.seed, "dealer")) {
  cfg_.validate();
  if (cfg_.mode != Mode::kUShapedPrivate) {
    throw InvalidConfig(std::string("no dealer in mode ") + mode_name(cfg_.mode));
  }
  for (Role r : {Role::kClient, Role::kServer0, Role::kServer1}) {
    lookup(peers_, r, Role::kDealer).set_session(cfg_.session_id);
  }
}

void Dealer::set_context(uint16_t epoch, uint32_t batch, Phase phase) {
  set_all(peers_, epoch, batch, phase);
}

void Dealer::synchronize() {
  set_context(0, 0, Phase::kSetup);
  respond_sync(cfg_, lookup(peers_, Role::kClient, Role::kDealer));
}

void Dealer::send_weight_shares() {
  set_context(0, 0, Phase::kPreprocessing);
  const NetworkSpec& net = cfg_.network;
  const std::vector<Shape> shapes = net.layer_shapes();
  ByteWriter w0, w1;
  for (size_t idx : server_layers(cfg_)) {
    if (!net.layers[idx].has_params()) continue;
    const LayerParams p =
        init_layer_params(net.layers[idx], shapes[idx], idx, cfg_.train.seed, cfg_.fixed);
    auto [ws0, ws1] = split(p.w, rng_);
    auto [bs0, bs1] = split(p.b, rng_);
    w0.put_tensor(ws0.value);
    w0.put_tensor(bs0.value);
    w1.put_tensor(ws1.value);
    w1.put_tensor(bs1.value);
  }
  lookup(peers_, Role::kServer0, Role::kDealer).send(PayloadKind::kWeightShares, w0.bytes());
  lookup(peers_, Role::kServer1, Role::kDealer).send(PayloadKind::kWeightShares, w1.bytes());
}

void Dealer::send_batch(uint16_t epoch, uint32_t batch, size_t rows, bool training) {
  set_context(epoch, batch, Phase::kPreprocessing);
  const FixedConfig& fc = cfg_.fixed;
  const NetworkSpec& net = cfg_.network;
  const std::vector<size_t> layers = server_layers(cfg_);
  const size_t cut = width_at(net, first_index_not_front(net));

  FixedTensor alpha({rows, cut}, fc);
  for (size_t i = 0; i < alpha.size(); ++i) alpha[i] = rng_.next_bits(fc.bit_width);
  send_ring(lookup(peers_, Role::kClient, Role::kDealer), PayloadKind::kMask, alpha);

  ByteWriter w0, w1;
  auto [a0, a1] = split(alpha, rng_);
  w0.put_tensor(a0.value);
  w1.put_tensor(a1.value);
  auto put_mat = [&](size_t m, size_t k, size_t p) {
    auto [t0, t1] = gen_mat_triple(m, k, p, fc, rng_);
    t0.serialize(w0);
    t1.serialize(w1);
  };
  auto put_triple = [&](const Shape& shape) {
    auto [t0, t1] = gen_triple(shape, fc, rng_);
    t0.serialize(w0);
    t1.serialize(w1);
  };
  for (size_t idx : layers) {
    const size_t in = width_at(net, idx), out = width_at(net, idx + 1);
    if (net.layers[idx].kind == LayerKind::kFC) {
      put_mat(rows, in, out);
      if (training) {
        put_mat(rows, out, in);
        put_mat(in, rows, out);
      }
    } else {
      std::vector<ComparisonKeyPair> pairs = keygen_comparison_batch(fc, rows * in, rng_);
      std::vector<ComparisonKey> k0, k1;
      k0.reserve(pairs.size());
      k1.reserve(pairs.size());
      for (ComparisonKeyPair& kp : pairs) {
        k0.push_back(std::move(kp.k0));
        k1.push_back(std::move(kp.k1));
      }
      KeyBundle(0, std::move(k0)).serialize(w0);
      KeyBundle(1, std::move(k1)).serialize(w1);
      put_triple({rows, in});
      if (training) put_triple({rows, in});
    }
  }
  lookup(peers_, Role::kServer0, Role::kDealer).send(PayloadKind::kPreprocessing, w0.bytes());
  lookup(peers_, Role::kServer1, Role::kDealer).send(PayloadKind::kPreprocessing, w1.bytes());
}

void Dealer::run() {
  synchronize();
  send_weight_shares();
  for (size_t e = 0; e < cfg_.train.epochs; ++e) {
    for (size_t i = 0; i < cfg_.train.batches; ++i) {
      send_batch(static_cast<uint16_t>(e), static_cast<uint32_t>(i),
                 cfg_.train.batch_size, true);
    }
  }
  const size_t B = cfg_.train.batch_size, T = cfg_.test_samples;
  for (size_t t = 0; t < test_batch_count(T, B); ++t) {
    send_batch(static_cast<uint16_t>(cfg_.train.epochs), static_cast<uint32_t>(t),
               test_batch_rows(T, B, t), false);
  }
}

// ---- orchestration ----

std::map<Role, std::unique_ptr<Channel>> connect_tcp(
    Role local, Mode mode, TcpListener* listen,
    const std::map<Role, Endpoint>& peers, TrafficCounters* counters,
    Wiretap* tap) {
  std::vector<Role> higher, lower;
  for (Role r : session_roles(mode)) {
    if (r > local) higher.push_back(r);
    if (r < local) lower.push_back(r);
  }
  std::map<Role, std::unique_ptr<Channel>> out;
  if (!higher.empty()) {
    if (listen == nullptr) {
      throw InvalidConfig(std::string(role_name(local)) + " needs a listen address");
    }
    out = listen->accept_roles(local, higher, counters, tap);
  }
  for (Role r : lower) {
    auto it = peers.find(r);
    if (it == peers.end()) {
      throw InvalidConfig(std::string("no address for ") + role_name(r));
    }
    out[r] = tcp_connect(it->second, local, r, counters, tap);
  }
  return out;
}

namespace {

bool is_secondary(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ChannelClosed&) {
    return true;
  } catch (const Timeout&) {
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace

SessionResult run_session(const SessionConfig& cfg, const Dataset& train,
                          const Dataset* test, TrafficCounters& counters,
                          Wiretap* tap, Backend backend) {
  const std::vector<Role> roles = session_roles(cfg.mode);
  std::map<Role, std::map<Role, std::unique_ptr<Channel>>> owned;
  std::map<Role, std::unique_ptr<TcpListener>> listeners;
  std::map<Role, Endpoint> endpoints;
  if (backend == Backend::kInProcess) {
    for (size_t i = 0; i < roles.size(); ++i) {
      for (size_t j = i + 1; j < roles.size(); ++j) {
        auto [a, b] = make_in_process_pair(roles[i], roles[j], &counters, tap);
        owned[roles[i]][roles[j]] = std::move(a);
        owned[roles[j]][roles[i]] = std::move(b);
      }
    }
  } else {
    for (Role r : roles) {
      listeners[r] = std::make_unique<TcpListener>(Endpoint{"127.0.0.1", 0});
      endpoints[r] = Endpoint{"127.0.0.1", listeners[r]->port()};
    }
  }

  std::optional<Client> client;
  std::optional<Server> servers[2];
  SessionResult result;
  std::map<Role, std::exception_ptr> errors;
  std::mutex errors_mu;

  auto body = [&](Role role) {
    std::map<Role, std::unique_ptr<Channel>>& mine = owned[role];
    try {
      if (backend == Backend::kTcp) {
        mine = connect_tcp(role, cfg.mode, listeners[role].get(), endpoints,
                           &counters, tap);
      }
      ChannelMap peers;
      for (auto& [r, c] : mine) peers[r] = c.get();
      switch (role) {
        case Role::kClient: {
          client.emplace(cfg, train, test, peers);
          client->synchronize();
          const auto t0 = std::chrono::steady_clock::now();
          client->train();
          const auto t1 = std::chrono::steady_clock::now();
          result.test_accuracy = client->test();
          const auto t2 = std::chrono::steady_clock::now();
          result.train_seconds = std::chrono::duration<double>(t1 - t0).count();
          result.test_seconds = std::chrono::duration<double>(t2 - t1).count();
          break;
        }
        case Role::kServer0:
        case Role::kServer1: {
          const int party = role == Role::kServer0 ? 0 : 1;
          servers[party].emplace(party, cfg, peers);
          servers[party]->run();
          break;
        }
        case Role::kDealer: {
          Dealer dealer(cfg, peers);
          dealer.run();
          break;
        }
      }
    } catch (...) {
      {
        std::lock_guard<std::mutex> lock(errors_mu);
        errors[role] = std::current_exception();
      }
      for (auto& [r, c] : mine) c->close();
    }
  };

  std::vector<std::thread> threads;
  for (Role r : roles) {
    if (r != Role::kClient) threads.emplace_back(body, r);
  }
  body(Role::kClient);
  for (std::thread& t : threads) t.join();

  std::exception_ptr first;
  for (Role r : roles) {
    auto it = errors.find(r);
    if (it == errors.end()) continue;
    if (!is_secondary(it->second)) std::rethrow_exception(it->second);
    if (!first) first = it->second;
  }
  if (first) std::rethrow_exception(first);

  // Gather plaintext parameters in network order.
  result.epoch_loss = client->epoch_loss();
  result.params.resize(cfg.network.layers.size());
  auto place = [&](const PlainSegment& seg) {
    const auto& idx = seg.layer_indices();
    for (size_t i = 0; i < idx.size(); ++i) result.params[idx[i]] = seg.params()[i];
  };
  place(client->front());
  place(client->middle());
  place(client->output());
  if (servers[0]) {
    const std::vector<size_t>& idx = servers[0]->layer_indices();
    const std::vector<LayerParams> p0 = servers[0]->params();
    for (size_t i = 0; i < idx.size(); ++i) {
      if (!cfg.network.layers[idx[i]].has_params()) continue;
      if (servers[1]) {
        const std::vector<LayerParams> p1 = servers[1]->params();
        result.params[idx[i]] = {reconstruct(p0[i].w, p1[i].w),
                                 reconstruct(p0[i].b, p1[i].b)};
      } else {
        result.params[idx[i]] = p0[i];
      }
    }
  }
  return result;
}

}  // namespace splitfss
