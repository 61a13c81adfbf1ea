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

// The four roles of a training session and the messages between them.
//
// Client: owns the data, the front layers and (in the U-shaped modes) the
// output layer. Servers P0/P1: hold the middle layers, in plaintext on P0 in
// the public modes or as additive shares on both in the private mode.
// Dealer: streams one batch of correlated randomness at a time (input mask,
// comparison keys, triples) and the initial server weight shares.
//
// Every training batch (e, i) walks the phases
//   preprocessing -> forward -> loss -> backward
// and every test batch walks preprocessing -> test, with test batches
// numbered under epoch E.

#ifndef SPLITFSS_PROTOCOL_H_
#define SPLITFSS_PROTOCOL_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splitfss/dataset.h"
#include "splitfss/nn.h"
#include "splitfss/prg.h"
#include "splitfss/ring.h"
#include "splitfss/transport.h"

namespace splitfss {

enum class Mode : uint8_t {
  kLocalPublic = 0,     // everything on the client, no communication
  kVanillaPublic = 1,   // P0 holds the middle and output layers; labels sent
  kUShapedPublic = 2,   // P0 holds the middle layers in plaintext
  kUShapedPrivate = 3,  // P0 and P1 hold the middle layers as shares
};
const char* mode_name(Mode mode);  // "local-public", ...
Mode parse_mode(const std::string& text);
// Roles that take part in a session of this mode, client first.
std::vector<Role> session_roles(Mode mode);

struct SessionConfig {
  Mode mode = Mode::kUShapedPrivate;
  TrainConfig train;
  FixedConfig fixed;
  NetworkSpec network = network1();
  uint8_t session_id = 1;
  // Filled in by the client from its data and adopted by the other roles
  // during synchronize().
  size_t test_samples = 0;

  // Throws InvalidConfig.
  void validate() const;
};

// Sample order the client uses in training epoch `epoch`; batch i takes
// entries [i * B, (i + 1) * B).
std::vector<size_t> epoch_order(size_t samples, uint64_t seed, size_t epoch);

using ChannelMap = std::map<Role, Channel*>;

// Byte totals in the units of the report.
struct CommSummary {
  uint64_t client_train = 0;   // sent by the client, training phases
  uint64_t server_train = 0;   // sent by P0 and P1, training phases
  uint64_t preprocessing = 0;  // all preprocessing traffic (dealer)
  uint64_t testing = 0;        // all test-phase traffic
  uint64_t setup = 0;          // synchronisation
};
CommSummary summarize(const TrafficCounters& counters);

class Client {
 public:
  // `test` may be null. Peers must cover session_roles(cfg.mode).
  Client(SessionConfig cfg, const Dataset& train, const Dataset* test,
         ChannelMap peers);

  // Sends the session parameters to every peer and waits for their acks.
  // Throws SyncMismatch if any peer disagrees.
  void synchronize();
  void train();
  // Fraction of test images classified correctly; 0 without a test set.
  double test();
  void run();

  const SessionConfig& config() const { return cfg_; }
  const std::vector<double>& epoch_loss() const { return epoch_loss_; }
  const PlainSegment& front() const { return front_; }
  const PlainSegment& output() const { return output_; }
  // Middle layers; only populated in local mode.
  const PlainSegment& middle() const { return middle_; }

 private:
  double train_batch(uint16_t epoch, uint32_t batch,
                     const std::vector<size_t>& rows);
  std::vector<size_t> predict_batch(uint16_t epoch, uint32_t batch,
                                    const FixedTensor& images);
  void set_context(uint16_t epoch, uint32_t batch, Phase phase);
  Channel& peer(Role role);
  FixedTensor recv_activation_sum(const Shape& shape);

  SessionConfig cfg_;
  const Dataset& train_;
  const Dataset* test_;
  ChannelMap peers_;
  PlainSegment front_, middle_, output_;
  size_t cut_ = 0;   // flattened width of the front output
  size_t back_ = 0;  // flattened width entering the output layer
  RingElement eta_;
  Prg share_rng_;
  std::vector<double> epoch_loss_;
};

class Server {
 public:
  Server(int party, SessionConfig cfg, ChannelMap peers);

  void synchronize();
  void run();

  const SessionConfig& config() const { return cfg_; }
  // Public modes: plaintext parameters of the server layers (P0 only).
  // Private mode: this party's shares. Ordered as the server layers.
  std::vector<LayerParams> params() const;
  const std::vector<size_t>& layer_indices() const { return layers_; }

 private:
  void receive_weight_shares();
  void train_batch(uint16_t epoch, uint32_t batch);
  void test_batch(uint16_t epoch, uint32_t batch, size_t rows);
  void set_context(uint16_t epoch, uint32_t batch, Phase phase);
  Channel& peer(Role role);

  int party_;
  SessionConfig cfg_;
  ChannelMap peers_;
  std::vector<size_t> layers_;
  PlainSegment plain_;                // public modes
  std::vector<LayerParams> shares_;   // private mode
  RingElement eta_;
};

class Dealer {
 public:
  Dealer(SessionConfig cfg, ChannelMap peers);
  void synchronize();
  void run();

 private:
  void send_weight_shares();
  void send_batch(uint16_t epoch, uint32_t batch, size_t rows, bool training);
  void set_context(uint16_t epoch, uint32_t batch, Phase phase);

  SessionConfig cfg_;
  ChannelMap peers_;
  Prg rng_;
};

enum class Backend { kInProcess, kTcp };

struct SessionResult {
  double test_accuracy = 0;
  std::vector<double> epoch_loss;
  // Plaintext parameters of every layer in network order (server layers
  // reconstructed from shares); empty for layers without parameters.
  std::vector<LayerParams> params;
  double train_seconds = 0;
  double test_seconds = 0;
};

// Runs all roles of the session on threads in this process. The TCP backend
// uses loopback sockets on ephemeral ports. Errors in any role abort the
// session; the first root-cause error is rethrown.
SessionResult run_session(const SessionConfig& cfg, const Dataset& train,
                          const Dataset* test, TrafficCounters& counters,
                          Wiretap* tap = nullptr,
                          Backend backend = Backend::kInProcess);

// Connects one role to its peers over TCP. A role accepts connections from
// higher-numbered roles on `listen` and connects to lower-numbered roles at
// their listen endpoints in `peers`.
std::map<Role, std::unique_ptr<Channel>> connect_tcp(
    Role local, Mode mode, TcpListener* listen,
    const std::map<Role, Endpoint>& peers, TrafficCounters* counters,
    Wiretap* tap = nullptr);

}  // namespace splitfss

#endif  // SPLITFSS_PROTOCOL_H_
