#include "xmrmap/levin.hpp"

#include <cstring>

#include "xmrmap/codec_error.hpp"

namespace xmrmap {

const char* to_string(CodecErrc code) noexcept {
  switch (code) {
    case CodecErrc::frame_sync: return "frame-sync";
    case CodecErrc::payload_too_large: return "payload-too-large";
    case CodecErrc::bad_signature: return "bad-storage-signature";
    case CodecErrc::bad_version: return "bad-storage-version";
    case CodecErrc::varint_overrun: return "varint-overrun";
    case CodecErrc::truncated: return "truncated";
    case CodecErrc::unknown_type: return "unknown-type";
    case CodecErrc::depth_exceeded: return "depth-exceeded";
    case CodecErrc::bad_name: return "bad-name";
    case CodecErrc::trailing_bytes: return "trailing-bytes";
    case CodecErrc::schema: return "schema";
    case CodecErrc::unencodable: return "unencodable";
  }
  return "unknown";
}

CodecError::CodecError(CodecErrc code, std::size_t offset, const std::string& detail)
    : ProtocolError(std::string(to_string(code)) + " error at byte " + std::to_string(offset) +
                    (detail.empty() ? "" : ": " + detail)),
      code_(code),
      offset_(offset) {}

}  // namespace xmrmap

namespace xmrmap::levin {

namespace {

template <typename T>
T load_le(const std::uint8_t* p) {
  T v{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i));
  }
  return v;
}

template <typename T>
void store_le(std::vector<std::uint8_t>& out, T v) {
  auto u = static_cast<std::make_unsigned_t<T>>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

}  // namespace

FrameStream parse_frames(std::span<const std::uint8_t> bytes, std::uint64_t max_payload) {
  FrameStream out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t remaining = bytes.size() - pos;
    if (remaining < kHeaderSize) {
      // Check what we have of the signature so garbage is not mistaken for a cut frame.
      std::uint8_t expected[8];
      for (int i = 0; i < 8; ++i) expected[i] = static_cast<std::uint8_t>(kSignature >> (8 * i));
      if (std::memcmp(bytes.data() + pos, expected, std::min<std::size_t>(remaining, 8)) != 0) {
        throw CodecError(CodecErrc::frame_sync, pos, "bad Levin signature");
      }
      out.trailing = PartialFrame{pos, remaining, kHeaderSize};
      break;
    }
    const std::uint8_t* p = bytes.data() + pos;
    Header h;
    h.signature = load_le<std::uint64_t>(p);
    if (h.signature != kSignature) {
      throw CodecError(CodecErrc::frame_sync, pos, "bad Levin signature");
    }
    h.payload_length = load_le<std::uint64_t>(p + 8);
    h.expect_response = p[16] != 0;
    h.command = load_le<std::uint32_t>(p + 17);
    h.return_code = load_le<std::int32_t>(p + 21);
    h.flags = load_le<std::uint32_t>(p + 25);
    h.version = load_le<std::uint32_t>(p + 29);
    if (h.payload_length > max_payload) {
      throw CodecError(CodecErrc::payload_too_large, pos,
                       "payload_length " + std::to_string(h.payload_length) + " exceeds cap " +
                           std::to_string(max_payload));
    }
    if (h.payload_length > remaining - kHeaderSize) {
      out.trailing = PartialFrame{pos, remaining,
                                  kHeaderSize + static_cast<std::size_t>(h.payload_length)};
      break;
    }
    Frame frame;
    frame.header = h;
    frame.offset = pos;
    frame.payload.assign(p + kHeaderSize, p + kHeaderSize + h.payload_length);
    out.frames.push_back(std::move(frame));
    pos += kHeaderSize + static_cast<std::size_t>(h.payload_length);
  }
  return out;
}

std::vector<std::uint8_t> encode_frame(Header header, std::span<const std::uint8_t> payload) {
  header.payload_length = payload.size();
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  store_le(out, header.signature);
  store_le(out, header.payload_length);
  out.push_back(header.expect_response ? 1 : 0);
  store_le(out, header.command);
  store_le(out, header.return_code);
  store_le(out, header.flags);
  store_le(out, header.version);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace xmrmap::levin
