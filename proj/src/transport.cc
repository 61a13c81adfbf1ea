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

#include "splitfss/transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <string>
#include <thread>

#include "splitfss/errors.h"

namespace splitfss {

const char* role_name(Role role) {
  switch (role) {
    case Role::kClient: return "client";
    case Role::kServer0: return "p0";
    case Role::kServer1: return "p1";
    case Role::kDealer: return "dealer";
  }
  return "?";
}

Role server_role(int party) {
  if (party == 0) return Role::kServer0;
  if (party == 1) return Role::kServer1;
  throw PartyMismatch("server party must be 0 or 1");
}

const char* phase_name(Phase phase) {
  switch (phase) {
    case Phase::kSetup: return "setup";
    case Phase::kPreprocessing: return "preprocessing";
    case Phase::kForward: return "forward";
    case Phase::kLoss: return "loss";
    case Phase::kBackward: return "backward";
    case Phase::kTest: return "test";
  }
  return "?";
}

const char* kind_name(PayloadKind kind) {
  switch (kind) {
    case PayloadKind::kSyncParams: return "sync-params";
    case PayloadKind::kSyncAck: return "sync-ack";
    case PayloadKind::kActivation: return "activation";
    case PayloadKind::kOpening: return "opening";
    case PayloadKind::kGradient: return "gradient";
    case PayloadKind::kLabels: return "labels";
    case PayloadKind::kMask: return "mask";
    case PayloadKind::kPreprocessing: return "preprocessing";
    case PayloadKind::kWeightShares: return "weight-shares";
    case PayloadKind::kPrediction: return "prediction";
  }
  return "?";
}

namespace {

void put_le(uint8_t* out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint64_t get_le(const uint8_t* in, int bytes) {
  uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

}  // namespace

std::array<uint8_t, MessageHeader::kSize> MessageHeader::encode() const {
  std::array<uint8_t, kSize> out{};
  put_le(&out[0], kMagic, 2);
  out[2] = kVersion;
  out[3] = static_cast<uint8_t>(phase);
  out[4] = static_cast<uint8_t>(kind);
  out[5] = session;
  put_le(&out[6], epoch, 2);
  put_le(&out[8], batch, 4);
  put_le(&out[12], payload_length, 4);
  return out;
}

MessageHeader MessageHeader::decode(std::span<const uint8_t> bytes) {
  if (bytes.size() < kSize) throw FrameCorrupt("short frame header");
  if (get_le(&bytes[0], 2) != kMagic) throw FrameCorrupt("bad frame magic");
  if (bytes[2] != kVersion) {
    throw FrameCorrupt("unsupported wire version " + std::to_string(bytes[2]));
  }
  if (bytes[3] >= kPhaseCount) throw FrameCorrupt("unknown phase tag");
  if (bytes[4] < 1 || bytes[4] > static_cast<uint8_t>(PayloadKind::kPrediction)) {
    throw FrameCorrupt("unknown payload kind");
  }
  MessageHeader h;
  h.phase = static_cast<Phase>(bytes[3]);
  h.kind = static_cast<PayloadKind>(bytes[4]);
  h.session = bytes[5];
  h.epoch = static_cast<uint16_t>(get_le(&bytes[6], 2));
  h.batch = static_cast<uint32_t>(get_le(&bytes[8], 4));
  h.payload_length = static_cast<uint32_t>(get_le(&bytes[12], 4));
  return h;
}

TrafficCounters::TrafficCounters() {
  for (auto& c : sent_) c.store(0);
  for (auto& c : received_) c.store(0);
}

size_t TrafficCounters::index(Role from, Role to, Phase phase) {
  return (static_cast<size_t>(from) * kRoleCount + static_cast<size_t>(to)) *
             kPhaseCount +
         static_cast<size_t>(phase);
}

void TrafficCounters::record_sent(Role from, Role to, Phase phase,
                                  uint64_t bytes) {
  sent_[index(from, to, phase)].fetch_add(bytes, std::memory_order_relaxed);
}

void TrafficCounters::record_received(Role from, Role to, Phase phase,
                                      uint64_t bytes) {
  received_[index(from, to, phase)].fetch_add(bytes, std::memory_order_relaxed);
}

uint64_t TrafficCounters::sent(Role from, Role to, Phase phase) const {
  return sent_[index(from, to, phase)].load();
}

uint64_t TrafficCounters::received(Role from, Role to, Phase phase) const {
  return received_[index(from, to, phase)].load();
}

uint64_t TrafficCounters::sent_by(Role from,
                                  std::initializer_list<Phase> phases) const {
  uint64_t total = 0;
  for (int to = 0; to < kRoleCount; ++to) {
    for (Phase p : phases) total += sent(from, static_cast<Role>(to), p);
  }
  return total;
}

uint64_t TrafficCounters::total_sent(std::initializer_list<Phase> phases) const {
  uint64_t total = 0;
  for (int from = 0; from < kRoleCount; ++from) {
    total += sent_by(static_cast<Role>(from), phases);
  }
  return total;
}

uint64_t TrafficCounters::total_sent() const {
  uint64_t total = 0;
  for (const auto& c : sent_) total += c.load();
  return total;
}

bool TrafficCounters::conserved() const {
  for (size_t i = 0; i < sent_.size(); ++i) {
    if (sent_[i].load() != received_[i].load()) return false;
  }
  return true;
}

void Wiretap::record(Role from, Role to, const MessageHeader& header,
                     std::span<const uint8_t> frame) {
  std::lock_guard<std::mutex> lock(mu_);
  records_.push_back(
      TapRecord{from, to, header, std::vector<uint8_t>(frame.begin(), frame.end())});
}

std::vector<TapRecord> Wiretap::records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_;
}

std::vector<TapRecord> Wiretap::transcript(Role from, Role to) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<TapRecord> out;
  for (const auto& r : records_) {
    if (r.from == from && r.to == to) out.push_back(r);
  }
  return out;
}

uint64_t Wiretap::total_bytes() const {
  std::lock_guard<std::mutex> lock(mu_);
  uint64_t total = 0;
  for (const auto& r : records_) total += r.frame.size();
  return total;
}

size_t Wiretap::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return records_.size();
}

Channel::Channel(Role local, Role peer, TrafficCounters* counters, Wiretap* tap)
    : local_(local), peer_(peer), counters_(counters), tap_(tap) {}

Channel::~Channel() = default;

void Channel::set_context(uint16_t epoch, uint32_t batch, Phase phase) {
  epoch_ = epoch;
  batch_ = batch;
  phase_ = phase;
}

void Channel::send(PayloadKind kind, std::span<const uint8_t> payload) {
  if (payload.size() > UINT32_MAX) throw ProtocolError("payload too large");
  MessageHeader h;
  h.phase = phase_;
  h.kind = kind;
  h.session = session_;
  h.epoch = epoch_;
  h.batch = batch_;
  h.payload_length = static_cast<uint32_t>(payload.size());
  const auto head = h.encode();
  std::vector<uint8_t> frame;
  frame.reserve(head.size() + payload.size());
  frame.insert(frame.end(), head.begin(), head.end());
  frame.insert(frame.end(), payload.begin(), payload.end());
  if (tap_ != nullptr) tap_->record(local_, peer_, h, frame);
  const uint64_t bytes = frame.size();
  write_frame(std::move(frame));
  if (counters_ != nullptr) counters_->record_sent(local_, peer_, phase_, bytes);
}

ProtocolMessage Channel::recv() {
  std::vector<uint8_t> frame = read_frame(timeout_);
  ProtocolMessage msg;
  msg.header = MessageHeader::decode(frame);
  if (frame.size() != MessageHeader::kSize + msg.header.payload_length) {
    throw FrameCorrupt("frame length disagrees with header");
  }
  if (counters_ != nullptr) {
    counters_->record_received(peer_, local_, msg.header.phase, frame.size());
  }
  if (msg.header.session != session_) {
    throw ProtocolError("message from another session");
  }
  const std::tuple<uint16_t, uint32_t, uint8_t> key{
      msg.header.epoch, msg.header.batch,
      static_cast<uint8_t>(msg.header.phase)};
  if (key < last_received_) {
    throw ProtocolError(std::string("out-of-order message: ") +
                        phase_name(msg.header.phase) + " for epoch " +
                        std::to_string(msg.header.epoch) + " batch " +
                        std::to_string(msg.header.batch) +
                        " after a later step");
  }
  last_received_ = key;
  msg.payload.assign(frame.begin() + MessageHeader::kSize, frame.end());
  return msg;
}

ProtocolMessage Channel::recv(PayloadKind expected) {
  ProtocolMessage msg = recv();
  if (msg.header.kind != expected) {
    throw ProtocolError(std::string("expected ") + kind_name(expected) +
                        " from " + role_name(peer_) + ", got " +
                        kind_name(msg.header.kind));
  }
  return msg;
}

namespace {

struct Queue {
  std::deque<std::vector<uint8_t>> frames;
  bool closed = false;
};

// Frames a sender may queue before it blocks, so a producer running ahead
// (the dealer) is held back the way a full socket buffer would hold it.
constexpr size_t kMaxQueuedFrames = 8;

struct SharedLink {
  std::mutex mu;
  std::condition_variable cv;
  Queue queues[2];
};

class InProcessChannel final : public Channel {
 public:
  InProcessChannel(std::shared_ptr<SharedLink> link, int side, Role local,
                   Role peer, TrafficCounters* counters, Wiretap* tap)
      : Channel(local, peer, counters, tap), link_(std::move(link)), side_(side) {}

  ~InProcessChannel() override { close(); }

  void close() override {
    std::lock_guard<std::mutex> lock(link_->mu);
    link_->queues[1 - side_].closed = true;  // outgoing direction
    link_->queues[side_].closed = true;      // stop accepting from the peer
    link_->cv.notify_all();
  }

 protected:
  void write_frame(std::vector<uint8_t> frame) override {
    std::unique_lock<std::mutex> lock(link_->mu);
    Queue& out = link_->queues[1 - side_];
    if (!link_->cv.wait_for(lock, kDefaultRecvTimeout, [&] {
          return out.frames.size() < kMaxQueuedFrames || out.closed;
        })) {
      throw Timeout("peer stopped draining the channel");
    }
    if (out.closed) throw ChannelClosed("send on a closed channel");
    out.frames.push_back(std::move(frame));
    link_->cv.notify_all();
  }

  std::vector<uint8_t> read_frame(std::chrono::milliseconds timeout) override {
    std::unique_lock<std::mutex> lock(link_->mu);
    Queue& in = link_->queues[side_];
    if (!link_->cv.wait_for(lock, timeout, [&] {
          return !in.frames.empty() || in.closed;
        })) {
      throw Timeout("no message within " + std::to_string(timeout.count()) +
                    " ms");
    }
    if (in.frames.empty()) throw ChannelClosed("peer closed the channel");
    std::vector<uint8_t> frame = std::move(in.frames.front());
    in.frames.pop_front();
    link_->cv.notify_all();
    return frame;
  }

 private:
  std::shared_ptr<SharedLink> link_;
  int side_;
};

}  // namespace

ChannelPair make_in_process_pair(Role a, Role b, TrafficCounters* counters,
                                 Wiretap* tap) {
  auto link = std::make_shared<SharedLink>();
  return {std::make_unique<InProcessChannel>(link, 0, a, b, counters, tap),
          std::make_unique<InProcessChannel>(link, 1, b, a, counters, tap)};
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw InvalidConfig("expected host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  const unsigned long port = std::stoul(text.substr(colon + 1));
  if (port > 65535) throw InvalidConfig("port out of range: " + text);
  e.port = static_cast<uint16_t>(port);
  return e;
}

std::string Endpoint::to_string() const {
  return host + ":" + std::to_string(port);
}

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text() { return std::strerror(errno); }

// Waits until fd is ready for `events` or the deadline passes.
void wait_fd(int fd, short events, Clock::time_point deadline) {
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - Clock::now());
    if (left.count() <= 0) throw Timeout("socket not ready before deadline");
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r > 0) return;
    if (r < 0 && errno != EINTR) throw ChannelClosed("poll: " + errno_text());
  }
}

void write_all(int fd, const uint8_t* data, size_t len,
               Clock::time_point deadline) {
  while (len > 0) {
    wait_fd(fd, POLLOUT, deadline);
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ChannelClosed("send: " + errno_text());
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
}

void read_all(int fd, uint8_t* data, size_t len, Clock::time_point deadline) {
  while (len > 0) {
    wait_fd(fd, POLLIN, deadline);
    const ssize_t n = ::recv(fd, data, len, 0);
    if (n == 0) throw ChannelClosed("peer closed the connection");
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ChannelClosed("recv: " + errno_text());
    }
    data += n;
    len -= static_cast<size_t>(n);
  }
}

constexpr uint8_t kHelloMagic[2] = {'S', 'H'};

class TcpChannel final : public Channel {
 public:
  TcpChannel(int fd, Role local, Role peer, TrafficCounters* counters,
             Wiretap* tap)
      : Channel(local, peer, counters, tap), fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  ~TcpChannel() override { close(); }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 protected:
  void write_frame(std::vector<uint8_t> frame) override {
    if (fd_ < 0) throw ChannelClosed("send on a closed channel");
    write_all(fd_, frame.data(), frame.size(), Clock::now() + kDefaultRecvTimeout);
  }

  std::vector<uint8_t> read_frame(std::chrono::milliseconds timeout) override {
    if (fd_ < 0) throw ChannelClosed("recv on a closed channel");
    const auto deadline = Clock::now() + timeout;
    std::vector<uint8_t> frame(MessageHeader::kSize);
    read_all(fd_, frame.data(), frame.size(), deadline);
    const MessageHeader h = MessageHeader::decode(frame);
    frame.resize(MessageHeader::kSize + h.payload_length);
    read_all(fd_, frame.data() + MessageHeader::kSize, h.payload_length,
             deadline);
    return frame;
  }

 private:
  int fd_;
};

addrinfo* resolve(const Endpoint& e, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(e.port);
  const int rc = ::getaddrinfo(e.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) {
    throw InvalidConfig("cannot resolve " + e.to_string() + ": " +
                        ::gai_strerror(rc));
  }
  return res;
}

}  // namespace

TcpListener::TcpListener(const Endpoint& endpoint) {
  addrinfo* res = resolve(endpoint, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    throw ChannelClosed("socket: " + errno_text());
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 || ::listen(fd_, 8) != 0) {
    const std::string why = errno_text();
    ::close(fd_);
    throw ChannelClosed("cannot listen on " + endpoint.to_string() + ": " + why);
  }
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::map<Role, std::unique_ptr<Channel>> TcpListener::accept_roles(
    Role local, const std::vector<Role>& expected, TrafficCounters* counters,
    Wiretap* tap, std::chrono::milliseconds timeout) {
  std::map<Role, std::unique_ptr<Channel>> out;
  const auto deadline = Clock::now() + timeout;
  while (out.size() < expected.size()) {
    wait_fd(fd_, POLLIN, deadline);
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      throw ChannelClosed("accept: " + errno_text());
    }
    uint8_t hello[4];
    try {
      read_all(fd, hello, sizeof(hello), deadline);
    } catch (...) {
      ::close(fd);
      throw;
    }
    const Role peer = static_cast<Role>(hello[2]);
    const bool wanted =
        hello[0] == kHelloMagic[0] && hello[1] == kHelloMagic[1] &&
        hello[2] < kRoleCount && hello[3] == static_cast<uint8_t>(local) &&
        std::find(expected.begin(), expected.end(), peer) != expected.end() &&
        !out.contains(peer);
    if (!wanted) {
      ::close(fd);
      throw ProtocolError("unexpected connection hello");
    }
    out[peer] = std::make_unique<TcpChannel>(fd, local, peer, counters, tap);
  }
  return out;
}

std::unique_ptr<Channel> tcp_connect(const Endpoint& endpoint, Role local,
                                     Role peer, TrafficCounters* counters,
                                     Wiretap* tap,
                                     std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    addrinfo* res = resolve(endpoint, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      ::freeaddrinfo(res);
      throw ChannelClosed("socket: " + errno_text());
    }
    const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc == 0) {
      const uint8_t hello[4] = {kHelloMagic[0], kHelloMagic[1],
                                static_cast<uint8_t>(local),
                                static_cast<uint8_t>(peer)};
      write_all(fd, hello, sizeof(hello), deadline);
      return std::make_unique<TcpChannel>(fd, local, peer, counters, tap);
    }
    ::close(fd);
    if (Clock::now() >= deadline) {
      throw Timeout("cannot connect to " + endpoint.to_string());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace splitfss
