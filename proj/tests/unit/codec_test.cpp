#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "xmrmap/capture.hpp"
#include "xmrmap/codec_error.hpp"
#include "xmrmap/epee.hpp"
#include "xmrmap/levin.hpp"

using namespace xmrmap;
using Bytes = std::vector<std::uint8_t>;

namespace {

CodecErrc codec_errc(const std::function<void()>& f, std::size_t* offset = nullptr) {
  try {
    f();
  } catch (const CodecError& e) {
    if (offset) *offset = e.offset();
    return e.code();
  }
  ADD_FAILURE() << "no CodecError";
  return CodecErrc::unencodable;
}

epee::Value section(std::initializer_list<epee::Entry> entries) { return epee::Section(entries); }

Bytes frame(std::uint32_t command, const Bytes& payload) {
  levin::Header h;
  h.command = command;
  return levin::encode_frame(h, payload);
}

}  // namespace

TEST(Levin, HeaderLayoutIsBitExact) {
  auto f = frame(1002, Bytes(10, 0xAB));
  ASSERT_EQ(f.size(), 33u + 10u);
  const Bytes sig{0x01, 0x21, 0x01, 0x01, 0x01, 0x01, 0x01, 0x01};
  EXPECT_TRUE(std::equal(sig.begin(), sig.end(), f.begin()));
  EXPECT_EQ(f[8], 10);  // payload length, little endian
  for (int i = 9; i < 16; ++i) EXPECT_EQ(f[i], 0);
  EXPECT_EQ(f[17], 0xEA);  // 1002 = 0x03EA
  EXPECT_EQ(f[18], 0x03);
}

TEST(Levin, OneFrameRoundTrip) {
  auto bytes = frame(1002, Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  auto s = levin::parse_frames(bytes);
  ASSERT_EQ(s.frames.size(), 1u);
  EXPECT_EQ(s.frames[0].header.command, 1002u);
  EXPECT_EQ(s.frames[0].payload.size(), 10u);
  EXPECT_FALSE(s.trailing);
}

TEST(Levin, EmptyStream) {
  auto s = levin::parse_frames({});
  EXPECT_TRUE(s.frames.empty());
  EXPECT_FALSE(s.trailing);
}

TEST(Levin, CorruptedSignatureRejectedAtOffset) {
  auto bytes = frame(1002, Bytes(10, 0));
  bytes[0] ^= 0xFF;
  std::size_t off = 99;
  EXPECT_EQ(codec_errc([&] { levin::parse_frames(bytes); }, &off), CodecErrc::frame_sync);
  EXPECT_EQ(off, 0u);

  auto two = frame(1001, Bytes(4, 0));
  auto second = frame(1002, Bytes(3, 0));
  second[5] = 0x77;
  two.insert(two.end(), second.begin(), second.end());
  EXPECT_EQ(codec_errc([&] { levin::parse_frames(two); }, &off), CodecErrc::frame_sync);
  EXPECT_EQ(off, 37u);
}

TEST(Levin, PayloadCap) {
  auto bytes = frame(1002, Bytes(100, 0));
  EXPECT_EQ(codec_errc([&] { levin::parse_frames(bytes, 99); }), CodecErrc::payload_too_large);
  EXPECT_EQ(levin::parse_frames(bytes, 100).frames.size(), 1u);
}

TEST(Levin, TrailingPartialFrameReported) {
  auto bytes = frame(1002, Bytes(10, 0));
  auto more = frame(1002, Bytes(20, 0));
  bytes.insert(bytes.end(), more.begin(), more.end() - 5);
  auto s = levin::parse_frames(bytes);
  EXPECT_EQ(s.frames.size(), 1u);
  ASSERT_TRUE(s.trailing);
  EXPECT_EQ(s.trailing->offset, 43u);
  EXPECT_EQ(s.trailing->bytes_available, 48u);
  EXPECT_EQ(s.trailing->bytes_expected, 53u);

  Bytes header_cut(bytes.begin(), bytes.begin() + 43 + 12);
  auto h = levin::parse_frames(header_cut);
  ASSERT_TRUE(h.trailing);
  EXPECT_EQ(h.trailing->bytes_expected, 33u);
}

TEST(Epee, SingleEntryRoundTrip) {
  auto v = section({{"x", std::uint32_t{7}}});
  auto bytes = epee::encode(v);
  const Bytes sig{0x01, 0x11, 0x01, 0x01, 0x01, 0x01, 0x02, 0x01, 0x01};
  EXPECT_TRUE(std::equal(sig.begin(), sig.end(), bytes.begin()));
  auto back = epee::parse(bytes);
  EXPECT_EQ(back, v);
  ASSERT_NE(back.find("x"), nullptr);
  EXPECT_EQ(back.find("x")->as_unsigned(), 7u);
}

TEST(Epee, EmptySection) {
  auto bytes = epee::encode(epee::Section{});
  EXPECT_EQ(bytes.size(), 10u);
  EXPECT_EQ(epee::parse(bytes), epee::Value(epee::Section{}));
}

TEST(Epee, VarintSizeClasses) {
  for (auto [v, len] : std::vector<std::pair<std::uint64_t, std::size_t>>{
           {0, 1}, {63, 1}, {64, 2}, {16383, 2}, {16384, 4}, {(1ULL << 30) - 1, 4}, {1ULL << 30, 8}, {epee::kMaxVarint, 8}}) {
    Bytes out;
    epee::write_varint(out, v);
    EXPECT_EQ(out.size(), len) << v;
    std::uint64_t decoded = 0;
    for (std::size_t i = 0; i < out.size(); ++i) decoded |= std::uint64_t{out[i]} << (8 * i);
    EXPECT_EQ(decoded >> 2, v);
    EXPECT_EQ(decoded & 3, len == 1 ? 0u : len == 2 ? 1u : len == 4 ? 2u : 3u);
  }
}

TEST(Epee, DistinctErrors) {
  auto good = epee::encode(section({{"x", std::uint32_t{7}}}));

  auto bad_sig = good;
  bad_sig[3] = 0x02;
  EXPECT_EQ(codec_errc([&] { epee::parse(bad_sig); }), CodecErrc::bad_signature);

  auto bad_ver = good;
  bad_ver[8] = 2;
  EXPECT_EQ(codec_errc([&] { epee::parse(bad_ver); }), CodecErrc::bad_version);

  // entry-count varint claims 4 bytes, only 1 present
  Bytes truncated_varint(good.begin(), good.begin() + 9);
  truncated_varint.push_back(0x02);
  EXPECT_EQ(codec_errc([&] { epee::parse(truncated_varint); }), CodecErrc::varint_overrun);

  auto bad_type = good;
  bad_type[12] = 13;  // sig(9) count(1) name-len(1) name(1) type
  EXPECT_EQ(codec_errc([&] { epee::parse(bad_type); }), CodecErrc::unknown_type);

  Bytes trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(codec_errc([&] { epee::parse(trailing); }), CodecErrc::trailing_bytes);

  Bytes cut(good.begin(), good.end() - 1);
  EXPECT_EQ(codec_errc([&] { epee::parse(cut); }), CodecErrc::truncated);
}

TEST(Epee, DepthCap) {
  // Root section plus depth-1 nested sections named "s"; the encoder refuses
  // to build these past the cap, so the bytes are written by hand.
  auto nested = [](int depth) {
    Bytes b{0x01, 0x11, 0x01, 0x01, 0x01, 0x01, 0x02, 0x01, 0x01};
    for (int i = 1; i < depth; ++i) b.insert(b.end(), {0x04, 0x01, 's', 0x0C});
    b.push_back(0x00);
    return b;
  };
  EXPECT_NO_THROW(epee::parse(nested(100)));
  auto deep = nested(101);
  EXPECT_EQ(codec_errc([&] { epee::parse(deep); }), CodecErrc::depth_exceeded);
  epee::Value v = epee::Section{};
  for (int i = 1; i < 101; ++i) v = section({{"s", v}});
  EXPECT_EQ(codec_errc([&] { epee::encode(v); }), CodecErrc::unencodable);
}

TEST(Epee, NameLengthBoundary) {
  auto ok = section({{std::string(255, 'n'), std::uint8_t{1}}});
  EXPECT_EQ(epee::parse(epee::encode(ok)), ok);
  auto too_long = section({{std::string(256, 'n'), std::uint8_t{1}}});
  EXPECT_EQ(codec_errc([&] { epee::encode(too_long); }), CodecErrc::unencodable);
}

TEST(Epee, MixedArrayUnencodable) {
  epee::Array a{epee::Type::u8, {std::uint8_t{1}, std::uint16_t{2}}};
  EXPECT_EQ(codec_errc([&] { epee::encode(section({{"a", a}})); }), CodecErrc::unencodable);
  EXPECT_EQ(codec_errc([&] { epee::encode(std::uint8_t{1}); }), CodecErrc::unencodable);
}

TEST(Epee, RandomTreesRoundTripByteIdentically) {
  oracle::TreeGenerator gen(2024);
  for (int i = 0; i < 1000; ++i) {
    auto v = gen.section();
    auto bytes = epee::encode(v);
    auto back = epee::parse(bytes);
    ASSERT_EQ(back, v) << "tree " << i;
    ASSERT_EQ(epee::encode(back), bytes) << "tree " << i;
  }
}

namespace {

std::vector<epee::PeerListEntry> entries(int n) {
  std::vector<epee::PeerListEntry> v;
  for (int i = 0; i < n; ++i) {
    epee::PeerListEntry e;
    e.address = PeerAddress::from_ipv4(0xC0A80000u + static_cast<std::uint32_t>(i), static_cast<std::uint16_t>(18080 + i));
    e.peer_id = 0x1000 + static_cast<std::uint64_t>(i);
    v.push_back(e);
  }
  return v;
}

}  // namespace

TEST(PeerList, ThreeEntries) {
  auto in = entries(3);
  auto body = epee::parse(epee::encode(epee::make_peerlist_body(in)));
  auto out = epee::extract_peerlist(body);
  EXPECT_EQ(out.entries, in);
  EXPECT_EQ(out.skipped_non_ipv4, 0u);
}

TEST(PeerList, Fixture250Entries) {
  auto in = entries(250);
  auto bytes = epee::encode(epee::make_peerlist_body(in));
  auto body = epee::parse(bytes);
  EXPECT_EQ(epee::encode(body), bytes);
  EXPECT_EQ(epee::extract_peerlist(body).entries.size(), 250u);
}

TEST(PeerList, AbsentFieldIsEmpty) {
  auto out = epee::extract_peerlist(section({{"payload_data", epee::Section{}}}));
  EXPECT_TRUE(out.entries.empty());
}

TEST(PeerList, NonIpv4Skipped) {
  auto body = epee::make_peerlist_body(entries(2));
  auto& root = std::get<epee::Section>(body.storage());
  auto& list = std::get<epee::Array>(root[0].value.storage());
  list.items.push_back(section({{"adr", section({{"type", std::uint8_t{2}}, {"addr", epee::Section{}}})},
                                {"id", std::uint64_t{9}}}));
  auto out = epee::extract_peerlist(epee::parse(epee::encode(body)));
  EXPECT_EQ(out.entries.size(), 2u);
  EXPECT_EQ(out.skipped_non_ipv4, 1u);
}

TEST(PeerList, WrongShapeIsSchemaError) {
  EXPECT_EQ(codec_errc([] { epee::extract_peerlist(section({{"local_peerlist_new", std::uint32_t{3}}})); }),
            CodecErrc::schema);
  epee::Array ints{epee::Type::u8, {std::uint8_t{1}}};
  EXPECT_EQ(codec_errc([&] { epee::extract_peerlist(section({{"local_peerlist_new", ints}})); }), CodecErrc::schema);
}

TEST(PeerList, ByteOrderFlag) {
  auto a = PeerAddress::parse("1.2.3.4:18080");
  // network order: wire bytes are the octets, read as little-endian u32
  EXPECT_EQ(epee::encode_ip(a, epee::IpByteOrder::network), 0x04030201u);
  EXPECT_EQ(epee::encode_ip(a, epee::IpByteOrder::host), 0x01020304u);
  std::vector<epee::PeerListEntry> in{{a, 1, {}}};
  auto body = epee::make_peerlist_body(in, epee::IpByteOrder::network);
  EXPECT_EQ(epee::extract_peerlist(body, epee::IpByteOrder::host).entries[0].address.to_string(), "4.3.2.1:18080");
}

TEST(PeerList, UnknownFieldsKeptAsExtras) {
  auto body = epee::make_peerlist_body(entries(1));
  auto& root = std::get<epee::Section>(body.storage());
  auto& item = std::get<epee::Section>(std::get<epee::Array>(root[0].value.storage()).items[0].storage());
  item.push_back({"pruning_seed", std::uint32_t{384}});
  auto out = epee::extract_peerlist(body);
  ASSERT_EQ(out.entries[0].extras.count("pruning_seed"), 1u);
  EXPECT_EQ(out.entries[0].extras.at("pruning_seed").as_unsigned(), 384u);
}

TEST(Capture, FlowFilenames) {
  auto f = parse_flow_filename("1650000000T010.000.000.002.18080-192.168.001.010.51234");
  ASSERT_TRUE(f);
  EXPECT_EQ(f->source.to_string(), "10.0.0.2:18080");
  EXPECT_EQ(f->destination.to_string(), "192.168.1.10:51234");
  EXPECT_EQ(f->observed_at, 1650000000);
  EXPECT_EQ(parse_flow_filename(flow_filename(*f)), f);
  EXPECT_TRUE(parse_flow_filename("010.000.000.002.18080-192.168.001.010.51234"));
  EXPECT_FALSE(parse_flow_filename("report.xml"));
  EXPECT_FALSE(parse_flow_filename("010.000.000.002.18080-192.168.001.010"));
}

TEST(Capture, FlowReproducesObservations) {
  FlowEndpoints ends{PeerAddress::parse("10.0.0.2:18080"), PeerAddress::parse("10.0.0.1:18080"), 500};
  std::vector<PeerListObservation> want;
  for (int i = 0; i < 3; ++i) {
    std::vector<PeerAddress> peers;
    for (int j = 0; j <= i; ++j) peers.push_back(PeerAddress::from_ipv4(0x0A000010u + j, 18080));
    want.push_back(make_observation(500, ends.destination, ends.source, peers));
  }
  auto bytes = encode_flow(want);
  CaptureStats stats;
  auto got = observations_from_flow(bytes, ends, {}, stats);
  EXPECT_EQ(got, want);
  EXPECT_EQ(stats.frames_parsed, 3u);
  EXPECT_EQ(stats.peers_extracted, 6u);

  // unrelated commands are skipped
  auto other = frame(2001, Bytes(5, 0));
  bytes.insert(bytes.begin(), other.begin(), other.end());
  CaptureStats s2;
  EXPECT_EQ(observations_from_flow(bytes, ends, {}, s2), want);
}

TEST(Capture, BrokenFramingRejectsFlow) {
  FlowEndpoints ends{PeerAddress::parse("10.0.0.2:18080"), PeerAddress::parse("10.0.0.1:18080"), 0};
  Bytes junk(64, 0x55);
  CaptureStats stats;
  EXPECT_TRUE(observations_from_flow(junk, ends, {}, stats).empty());
  EXPECT_EQ(stats.flows_rejected, 1u);
  EXPECT_FALSE(stats.errors.empty());
}

TEST(Capture, BadPayloadCountsFrame) {
  FlowEndpoints ends{PeerAddress::parse("10.0.0.2:18080"), PeerAddress::parse("10.0.0.1:18080"), 0};
  auto bytes = frame(1002, Bytes{1, 2, 3});
  CaptureStats stats;
  EXPECT_TRUE(observations_from_flow(bytes, ends, {}, stats).empty());
  EXPECT_EQ(stats.frames_rejected, 1u);
}
