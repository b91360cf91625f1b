#pragma once

#include <cstddef>
#include <string>

#include "xmrmap/error.hpp"

namespace xmrmap {

enum class CodecErrc {
  frame_sync,         // Levin signature mismatch
  payload_too_large,  // Levin payload_length above the configured cap
  bad_signature,      // portable-storage signature mismatch
  bad_version,
  varint_overrun,
  truncated,
  unknown_type,
  depth_exceeded,
  bad_name,
  trailing_bytes,
  schema,
  unencodable,
};

const char* to_string(CodecErrc code) noexcept;

// Errors from the Levin and portable-storage codecs. `offset` is the byte
// position at which decoding failed, relative to the buffer handed in.
class CodecError : public ProtocolError {
 public:
  CodecError(CodecErrc code, std::size_t offset, const std::string& detail);

  CodecErrc code() const noexcept { return code_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  CodecErrc code_;
  std::size_t offset_;
};

}  // namespace xmrmap
