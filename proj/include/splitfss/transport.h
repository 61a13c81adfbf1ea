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

// Framed, byte-counted channels between the four protocol roles.
//
// Every message is a 16-byte little-endian header followed by the raw
// payload (layout in docs/wire-format.md). Two backends share one contract:
// in-process queues for tests and single-process runs, and TCP for separate
// processes. Each endpoint charges the exact frame size to a TrafficCounters
// table keyed by (sender, receiver, phase) and, when a Wiretap is attached,
// keeps a copy of every frame it sends.

#ifndef SPLITFSS_TRANSPORT_H_
#define SPLITFSS_TRANSPORT_H_

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace splitfss {

enum class Role : uint8_t { kClient = 0, kServer0 = 1, kServer1 = 2, kDealer = 3 };
inline constexpr int kRoleCount = 4;
const char* role_name(Role role);
Role server_role(int party);

// Phase tags, in the order they must appear within one (epoch, batch).
enum class Phase : uint8_t {
  kSetup = 0,
  kPreprocessing = 1,
  kForward = 2,
  kLoss = 3,
  kBackward = 4,
  kTest = 5,
};
inline constexpr int kPhaseCount = 6;
const char* phase_name(Phase phase);

enum class PayloadKind : uint8_t {
  kSyncParams = 1,
  kSyncAck = 2,
  kActivation = 3,     // x_pub, ATm or a share of a cut activation
  kOpening = 4,        // masked values opened between the two servers
  kGradient = 5,       // gradient (or gradient share) crossing the cut
  kLabels = 6,         // vanilla split learning only
  kMask = 7,           // dealer -> client input mask
  kPreprocessing = 8,  // dealer -> server keys and triples
  kWeightShares = 9,   // dealer -> server initial parameter shares
  kPrediction = 10,    // vanilla inference output
};
const char* kind_name(PayloadKind kind);

struct MessageHeader {
  static constexpr uint16_t kMagic = 0x4653;  // bytes "SF"
  static constexpr uint8_t kVersion = 1;
  static constexpr size_t kSize = 16;

  Phase phase = Phase::kSetup;
  PayloadKind kind = PayloadKind::kSyncParams;
  uint8_t session = 0;
  uint16_t epoch = 0;
  uint32_t batch = 0;
  uint32_t payload_length = 0;

  std::array<uint8_t, kSize> encode() const;
  // Throws FrameCorrupt on a bad magic, version or tag.
  static MessageHeader decode(std::span<const uint8_t> bytes);

  bool operator==(const MessageHeader&) const = default;
};

struct ProtocolMessage {
  MessageHeader header;
  std::vector<uint8_t> payload;
};

// Byte accounting per (sender, receiver, phase). Updated atomically by the
// endpoints; safe to read from another thread between phases.
class TrafficCounters {
 public:
  TrafficCounters();

  void record_sent(Role from, Role to, Phase phase, uint64_t bytes);
  void record_received(Role from, Role to, Phase phase, uint64_t bytes);

  uint64_t sent(Role from, Role to, Phase phase) const;
  uint64_t received(Role from, Role to, Phase phase) const;
  uint64_t sent_by(Role from, std::initializer_list<Phase> phases) const;
  uint64_t total_sent(std::initializer_list<Phase> phases) const;
  uint64_t total_sent() const;
  // True when, for every pair and phase, bytes sent equal bytes received.
  bool conserved() const;

 private:
  static size_t index(Role from, Role to, Phase phase);

  std::array<std::atomic<uint64_t>, kRoleCount * kRoleCount * kPhaseCount> sent_;
  std::array<std::atomic<uint64_t>, kRoleCount * kRoleCount * kPhaseCount> received_;
};

struct TapRecord {
  Role from;
  Role to;
  MessageHeader header;
  std::vector<uint8_t> frame;  // header bytes followed by payload
};

// Lossless log of every frame sent through the endpoints it is attached to.
class Wiretap {
 public:
  void record(Role from, Role to, const MessageHeader& header,
              std::span<const uint8_t> frame);
  std::vector<TapRecord> records() const;
  // Frames sent from `from` to `to`, in send order.
  std::vector<TapRecord> transcript(Role from, Role to) const;
  uint64_t total_bytes() const;
  size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<TapRecord> records_;
};

inline constexpr std::chrono::milliseconds kDefaultRecvTimeout{30000};

// One endpoint of a bidirectional FIFO link. Used by one role thread at a
// time. Outgoing headers take the session/epoch/batch/phase set through
// set_context; incoming headers must never go backwards in
// (epoch, batch, phase) order.
class Channel {
 public:
  Channel(Role local, Role peer, TrafficCounters* counters, Wiretap* tap);
  virtual ~Channel();

  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  Role local_role() const { return local_; }
  Role peer_role() const { return peer_; }

  void set_session(uint8_t session) { session_ = session; }
  void set_context(uint16_t epoch, uint32_t batch, Phase phase);
  Phase phase() const { return phase_; }
  uint16_t epoch() const { return epoch_; }
  uint32_t batch() const { return batch_; }
  void set_timeout(std::chrono::milliseconds timeout) { timeout_ = timeout; }

  void send(PayloadKind kind, std::span<const uint8_t> payload);
  ProtocolMessage recv();
  // Same as recv() but throws ProtocolError unless the kind matches.
  ProtocolMessage recv(PayloadKind expected);

  virtual void close() = 0;

 protected:
  // Delivers one complete frame or throws; never delivers a prefix.
  virtual void write_frame(std::vector<uint8_t> frame) = 0;
  // Returns one complete frame, or throws Timeout / ChannelClosed.
  virtual std::vector<uint8_t> read_frame(std::chrono::milliseconds timeout) = 0;

 private:
  Role local_;
  Role peer_;
  TrafficCounters* counters_;
  Wiretap* tap_;
  uint8_t session_ = 0;
  uint16_t epoch_ = 0;
  uint32_t batch_ = 0;
  Phase phase_ = Phase::kSetup;
  std::tuple<uint16_t, uint32_t, uint8_t> last_received_{0, 0, 0};
  std::chrono::milliseconds timeout_ = kDefaultRecvTimeout;
};

using ChannelPair = std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>>;

// In-memory link. Either end may be closed; the other then sees
// ChannelClosed once its queue drains.
ChannelPair make_in_process_pair(Role a, Role b, TrafficCounters* counters,
                                 Wiretap* tap = nullptr);

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;
  static Endpoint parse(const std::string& text);  // "host:port"
  std::string to_string() const;
};

// Listening socket. Port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(const Endpoint& endpoint);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  // Accepts one connection per expected peer role. Each connecting side
  // announces its role in a 4-byte hello that is not part of the framed,
  // counted protocol.
  std::map<Role, std::unique_ptr<Channel>> accept_roles(
      Role local, const std::vector<Role>& expected, TrafficCounters* counters,
      Wiretap* tap, std::chrono::milliseconds timeout = kDefaultRecvTimeout);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

// Connects to a listening peer, retrying until `timeout` elapses.
std::unique_ptr<Channel> tcp_connect(
    const Endpoint& endpoint, Role local, Role peer, TrafficCounters* counters,
    Wiretap* tap, std::chrono::milliseconds timeout = kDefaultRecvTimeout);

}  // namespace splitfss

#endif  // SPLITFSS_TRANSPORT_H_
