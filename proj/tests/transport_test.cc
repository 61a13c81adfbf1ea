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

#include <gtest/gtest.h>

#include <thread>

#include "splitfss/codec.h"
#include "splitfss/errors.h"

namespace splitfss {
namespace {

std::vector<uint8_t> bytes(std::initializer_list<uint8_t> v) { return v; }

TEST(MessageHeader, LittleEndianLayout) {
  MessageHeader h;
  h.phase = Phase::kBackward;
  h.kind = PayloadKind::kGradient;
  h.session = 7;
  h.epoch = 0x0102;
  h.batch = 0x03040506;
  h.payload_length = 0x0708090a;
  const auto enc = h.encode();
  const std::array<uint8_t, 16> expected = {0x53, 0x46, 1,    4,    5,    7,
                                            0x02, 0x01, 0x06, 0x05, 0x04, 0x03,
                                            0x0a, 0x09, 0x08, 0x07};
  EXPECT_EQ(enc, expected);
  EXPECT_EQ(MessageHeader::decode(enc), h);
}

TEST(MessageHeader, RejectsCorruptHeaders) {
  auto enc = MessageHeader{}.encode();
  auto bad = enc;
  bad[0] ^= 1;
  EXPECT_THROW(MessageHeader::decode(bad), FrameCorrupt);
  bad = enc;
  bad[2] = 9;
  EXPECT_THROW(MessageHeader::decode(bad), FrameCorrupt);
  bad = enc;
  bad[3] = 6;
  EXPECT_THROW(MessageHeader::decode(bad), FrameCorrupt);
  bad = enc;
  bad[4] = 0;
  EXPECT_THROW(MessageHeader::decode(bad), FrameCorrupt);
  EXPECT_THROW(MessageHeader::decode(std::span(enc).first(15)), FrameCorrupt);
}

TEST(InProcess, DeliversInOrderAndCountsBytes) {
  TrafficCounters counters;
  Wiretap tap;
  auto [a, b] = make_in_process_pair(Role::kClient, Role::kServer0, &counters, &tap);
  a->set_context(0, 1, Phase::kForward);
  a->send(PayloadKind::kActivation, bytes({1, 2, 3}));
  a->set_context(0, 1, Phase::kBackward);
  a->send(PayloadKind::kGradient, {});

  const ProtocolMessage m1 = b->recv(PayloadKind::kActivation);
  EXPECT_EQ(m1.payload, bytes({1, 2, 3}));
  EXPECT_EQ(m1.header.batch, 1u);
  const ProtocolMessage m2 = b->recv();
  EXPECT_EQ(m2.header.kind, PayloadKind::kGradient);
  EXPECT_TRUE(m2.payload.empty());

  EXPECT_EQ(counters.sent(Role::kClient, Role::kServer0, Phase::kForward), 19u);
  EXPECT_EQ(counters.sent(Role::kClient, Role::kServer0, Phase::kBackward), 16u);
  EXPECT_EQ(counters.sent_by(Role::kClient, {Phase::kForward, Phase::kBackward}), 35u);
  EXPECT_TRUE(counters.conserved());
  EXPECT_EQ(tap.total_bytes(), counters.total_sent());
  EXPECT_EQ(tap.transcript(Role::kClient, Role::kServer0).size(), 2u);
  EXPECT_TRUE(tap.transcript(Role::kServer0, Role::kClient).empty());
}

TEST(InProcess, EmptySessionLeavesEmptyLog) {
  TrafficCounters counters;
  Wiretap tap;
  auto pair = make_in_process_pair(Role::kServer0, Role::kServer1, &counters, &tap);
  EXPECT_EQ(tap.size(), 0u);
  EXPECT_EQ(counters.total_sent(), 0u);
}

TEST(InProcess, OutOfOrderPhaseIsAProtocolError) {
  TrafficCounters counters;
  auto [a, b] = make_in_process_pair(Role::kClient, Role::kServer0, &counters);
  a->set_context(0, 3, Phase::kBackward);
  a->send(PayloadKind::kGradient, bytes({9}));
  a->set_context(0, 3, Phase::kForward);
  a->send(PayloadKind::kActivation, bytes({9}));
  EXPECT_NO_THROW(b->recv());
  EXPECT_THROW(b->recv(), ProtocolError);
}

TEST(InProcess, UnexpectedKindIsAProtocolError) {
  TrafficCounters counters;
  auto [a, b] = make_in_process_pair(Role::kClient, Role::kServer0, &counters);
  a->send(PayloadKind::kLabels, bytes({1}));
  EXPECT_THROW(b->recv(PayloadKind::kActivation), ProtocolError);
}

TEST(InProcess, TimeoutAndClose) {
  TrafficCounters counters;
  auto [a, b] = make_in_process_pair(Role::kClient, Role::kServer0, &counters);
  b->set_timeout(std::chrono::milliseconds(20));
  EXPECT_THROW(b->recv(), Timeout);
  a->send(PayloadKind::kActivation, bytes({1}));
  a->close();
  EXPECT_NO_THROW(b->recv());  // queued frames drain first
  EXPECT_THROW(b->recv(), ChannelClosed);
  EXPECT_THROW(a->send(PayloadKind::kActivation, bytes({1})), ChannelClosed);
}

TEST(Tcp, LoopbackExchangeMatchesInProcessFraming) {
  TrafficCounters counters;
  Wiretap tap;
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  const uint16_t port = listener.port();
  std::unique_ptr<Channel> client_side;
  std::thread connector([&] {
    client_side = tcp_connect(Endpoint{"127.0.0.1", port}, Role::kServer1,
                              Role::kServer0, &counters, &tap);
  });
  auto accepted = listener.accept_roles(Role::kServer0, {Role::kServer1},
                                        &counters, &tap);
  connector.join();
  Channel& p0 = *accepted.at(Role::kServer1);
  std::vector<uint8_t> big(200000);
  for (size_t i = 0; i < big.size(); ++i) big[i] = static_cast<uint8_t>(i * 31);
  p0.set_context(2, 5, Phase::kForward);
  p0.send(PayloadKind::kOpening, big);
  const ProtocolMessage got = client_side->recv(PayloadKind::kOpening);
  EXPECT_EQ(got.payload, big);
  EXPECT_EQ(got.header.epoch, 2);
  client_side->set_context(2, 5, Phase::kForward);
  client_side->send(PayloadKind::kOpening, bytes({4, 2}));
  EXPECT_EQ(p0.recv().payload, bytes({4, 2}));
  EXPECT_TRUE(counters.conserved());
  EXPECT_EQ(counters.sent(Role::kServer0, Role::kServer1, Phase::kForward),
            big.size() + 16);
  EXPECT_EQ(tap.total_bytes(), counters.total_sent());

  client_side->close();
  EXPECT_THROW(p0.recv(), ChannelClosed);
}

TEST(Tcp, ConnectTimesOutWithoutListener) {
  TrafficCounters counters;
  uint16_t port;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  EXPECT_THROW(tcp_connect(Endpoint{"127.0.0.1", port}, Role::kClient,
                           Role::kServer0, &counters, nullptr,
                           std::chrono::milliseconds(120)),
               Timeout);
}

TEST(Endpoint, Parse) {
  const Endpoint e = Endpoint::parse("localhost:9100");
  EXPECT_EQ(e.host, "localhost");
  EXPECT_EQ(e.port, 9100);
  EXPECT_THROW(Endpoint::parse("9100"), InvalidConfig);
  EXPECT_THROW(Endpoint::parse("h:70000"), InvalidConfig);
}

TEST(RingPacking, UsesElementWidth) {
  const std::vector<uint64_t> v = {0x0102, 0xfffe};
  EXPECT_EQ(pack_ring(v, 16), bytes({0x02, 0x01, 0xfe, 0xff}));
  EXPECT_EQ(unpack_ring(pack_ring(v, 16), 16), v);
  EXPECT_EQ(pack_ring(v, 64).size(), 16u);
  EXPECT_THROW(unpack_ring(bytes({1, 2, 3}), 16), FrameCorrupt);
}

}  // namespace
}  // namespace splitfss
