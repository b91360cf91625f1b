#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xmrmap/peer_address.hpp"

namespace xmrmap::epee {

// Bytes 01 11 01 01 01 01 02 01 followed by the format version byte.
inline constexpr std::uint32_t kSignatureA = 0x01011101;
inline constexpr std::uint32_t kSignatureB = 0x01020101;
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kMaxDepth = 100;
inline constexpr std::size_t kMaxNameLength = 255;

enum class Type : std::uint8_t {
  i64 = 1,
  i32 = 2,
  i16 = 3,
  i8 = 4,
  u64 = 5,
  u32 = 6,
  u16 = 7,
  u8 = 8,
  f64 = 9,
  string = 10,
  boolean = 11,
  section = 12,
};
inline constexpr std::uint8_t kArrayFlag = 0x80;

class Value;
struct Entry;

// Ordered name/value pairs. Order and unknown names survive a round trip.
using Section = std::vector<Entry>;

struct Array {
  Type element_type = Type::u8;
  std::vector<Value> items;

  friend bool operator==(const Array&, const Array&) = default;
};

class Value {
 public:
  using Storage = std::variant<std::int64_t, std::int32_t, std::int16_t, std::int8_t,
                               std::uint64_t, std::uint32_t, std::uint16_t, std::uint8_t,
                               double, std::string, bool, Section, Array>;

  Value() : storage_(Section{}) {}
  template <typename T>
    requires std::is_constructible_v<Storage, T&&> && (!std::is_same_v<std::decay_t<T>, Value>)
  Value(T&& v) : storage_(std::forward<T>(v)) {}  // NOLINT(google-explicit-constructor)

  Type type() const noexcept;
  bool is_array() const noexcept { return std::holds_alternative<Array>(storage_); }

  const Storage& storage() const noexcept { return storage_; }
  Storage& storage() noexcept { return storage_; }

  template <typename T>
  const T* get_if() const noexcept { return std::get_if<T>(&storage_); }

  // First entry with that name, or nullptr. Only meaningful on sections.
  const Value* find(std::string_view name) const noexcept;

  // Widens any unsigned integer alternative; nullopt otherwise.
  std::optional<std::uint64_t> as_unsigned() const noexcept;

  friend bool operator==(const Value&, const Value&);

 private:
  Storage storage_;
};

struct Entry {
  std::string name;
  Value value;

  friend bool operator==(const Entry&, const Entry&) = default;
};

// Decodes a portable-storage blob whose root is a section.
// Throws CodecError with a code per failure class.
Value parse(std::span<const std::uint8_t> payload);

// Inverse of parse. Throws CodecError(unencodable) for mixed-type arrays,
// nested arrays, over-long names or a non-section root.
std::vector<std::uint8_t> encode(const Value& root);

// Varint with the size class in the low two bits.
void write_varint(std::vector<std::uint8_t>& out, std::uint64_t value);
inline constexpr std::uint64_t kMaxVarint = (1ULL << 62) - 1;

// Interpretation of the serialized `m_ip` u32 when rendering a dotted quad.
// `network`: the little-endian bytes on the wire are the octets in order
// (how monerod stores in_addr). `host`: the integer is a host-order address.
enum class IpByteOrder { network, host };

struct PeerListEntry {
  PeerAddress address;
  std::uint64_t peer_id = 0;
  std::map<std::string, Value> extras;  // pruning_seed, rpc_port, ...

  friend bool operator==(const PeerListEntry&, const PeerListEntry&) = default;
};

struct PeerList {
  std::vector<PeerListEntry> entries;
  std::size_t skipped_non_ipv4 = 0;
};

inline constexpr std::uint8_t kAddressTypeIpv4 = 1;

// Reads `local_peerlist_new` from a handshake/timed-sync body. Absent field
// yields an empty list; a malformed field throws CodecError(schema).
PeerList extract_peerlist(const Value& body, IpByteOrder order = IpByteOrder::network);

std::uint32_t encode_ip(const PeerAddress& a, IpByteOrder order = IpByteOrder::network);

// Builds a timed-sync response body carrying `entries` as `local_peerlist_new`.
Value make_peerlist_body(std::span<const PeerListEntry> entries,
                         IpByteOrder order = IpByteOrder::network);

}  // namespace xmrmap::epee
