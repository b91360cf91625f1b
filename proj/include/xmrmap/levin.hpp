#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace xmrmap::levin {

// Bytes 01 21 01 01 01 01 01 01 read as a little-endian u64.
inline constexpr std::uint64_t kSignature = 0x0101010101012101ULL;
inline constexpr std::size_t kHeaderSize = 33;
inline constexpr std::uint64_t kDefaultMaxPayload = 100ULL * 1024 * 1024;

inline constexpr std::uint32_t kCommandHandshake = 1001;
inline constexpr std::uint32_t kCommandTimedSync = 1002;

inline constexpr std::uint32_t kPacketRequest = 0x1;
inline constexpr std::uint32_t kPacketResponse = 0x2;
inline constexpr std::uint32_t kProtocolVersion = 1;

struct Header {
  std::uint64_t signature = kSignature;
  std::uint64_t payload_length = 0;
  bool expect_response = false;
  std::uint32_t command = 0;
  std::int32_t return_code = 0;
  std::uint32_t flags = kPacketResponse;
  std::uint32_t version = kProtocolVersion;

  friend bool operator==(const Header&, const Header&) = default;
};

struct Frame {
  Header header;
  std::vector<std::uint8_t> payload;
  std::size_t offset = 0;  // position of the header in the stream
};

// A frame whose header or payload runs past the end of the stream.
struct PartialFrame {
  std::size_t offset = 0;
  std::size_t bytes_available = 0;
  std::size_t bytes_expected = 0;  // header size when the header itself is cut
};

struct FrameStream {
  std::vector<Frame> frames;
  std::optional<PartialFrame> trailing;
};

// Splits a reassembled one-direction TCP flow into frames. Throws CodecError
// (frame_sync with the header offset, or payload_too_large).
FrameStream parse_frames(std::span<const std::uint8_t> bytes,
                         std::uint64_t max_payload = kDefaultMaxPayload);

// Serializes one frame; `header.payload_length` is taken from `payload`.
std::vector<std::uint8_t> encode_frame(Header header, std::span<const std::uint8_t> payload);

}  // namespace xmrmap::levin
