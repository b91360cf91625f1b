#include "xmrmap/epee.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "xmrmap/codec_error.hpp"

namespace xmrmap::epee {

namespace {

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  const std::uint8_t* take(std::size_t n, CodecErrc code = CodecErrc::truncated) {
    if (n > remaining()) {
      throw CodecError(code, pos_, "need " + std::to_string(n) + " bytes, " +
                                       std::to_string(remaining()) + " left");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename T>
  T read_le() {
    const std::uint8_t* p = take(sizeof(T));
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i));
    }
    return static_cast<T>(u);
  }

  std::uint64_t read_varint() {
    const std::size_t start = pos_;
    if (remaining() == 0) throw CodecError(CodecErrc::varint_overrun, start, "empty varint");
    const std::size_t width = std::size_t{1} << (bytes_[pos_] & 0x03);
    if (width > remaining()) {
      throw CodecError(CodecErrc::varint_overrun, start,
                       "varint needs " + std::to_string(width) + " bytes");
    }
    std::uint64_t raw = 0;
    for (std::size_t i = 0; i < width; ++i) raw |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += width;
    return raw >> 2;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool valid_scalar_code(std::uint8_t code) {
  return code >= static_cast<std::uint8_t>(Type::i64) &&
         code <= static_cast<std::uint8_t>(Type::section);
}

// Smallest encoded size of one element; bounds array counts before allocating.
std::size_t min_element_size(Type t) {
  switch (t) {
    case Type::i64: case Type::u64: case Type::f64: return 8;
    case Type::i32: case Type::u32: return 4;
    case Type::i16: case Type::u16: return 2;
    default: return 1;
  }
}

Section read_section(Reader& r, std::size_t depth);

Value read_scalar(Reader& r, Type t, std::size_t depth) {
  switch (t) {
    case Type::i64: return r.read_le<std::int64_t>();
    case Type::i32: return r.read_le<std::int32_t>();
    case Type::i16: return r.read_le<std::int16_t>();
    case Type::i8: return r.read_le<std::int8_t>();
    case Type::u64: return r.read_le<std::uint64_t>();
    case Type::u32: return r.read_le<std::uint32_t>();
    case Type::u16: return r.read_le<std::uint16_t>();
    case Type::u8: return r.read_le<std::uint8_t>();
    case Type::f64: return std::bit_cast<double>(r.read_le<std::uint64_t>());
    case Type::boolean: return r.read_le<std::uint8_t>() != 0;
    case Type::string: {
      const std::size_t at = r.pos();
      auto len = r.read_varint();
      if (len > r.remaining()) {
        throw CodecError(CodecErrc::truncated, at, "string length " + std::to_string(len));
      }
      const auto* p = r.take(static_cast<std::size_t>(len));
      return std::string(reinterpret_cast<const char*>(p), static_cast<std::size_t>(len));
    }
    case Type::section: return read_section(r, depth + 1);
  }
  throw CodecError(CodecErrc::unknown_type, r.pos(), "");
}

Value read_value(Reader& r, std::size_t depth) {
  const std::size_t at = r.pos();
  const std::uint8_t code = r.read_le<std::uint8_t>();
  const std::uint8_t base = code & static_cast<std::uint8_t>(~kArrayFlag);
  if (!valid_scalar_code(base)) {
    throw CodecError(CodecErrc::unknown_type, at, "type code " + std::to_string(code));
  }
  const Type t = static_cast<Type>(base);
  if ((code & kArrayFlag) == 0) return read_scalar(r, t, depth);

  const std::size_t count_at = r.pos();
  const auto count = r.read_varint();
  if (count > r.remaining() / min_element_size(t)) {
    throw CodecError(CodecErrc::truncated, count_at, "array count " + std::to_string(count));
  }
  Array arr{t, {}};
  arr.items.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) arr.items.push_back(read_scalar(r, t, depth));
  return arr;
}

Section read_section(Reader& r, std::size_t depth) {
  if (depth > kMaxDepth) {
    throw CodecError(CodecErrc::depth_exceeded, r.pos(),
                     "nesting deeper than " + std::to_string(kMaxDepth));
  }
  const std::size_t count_at = r.pos();
  const auto count = r.read_varint();
  if (count > r.remaining() / 2) {
    throw CodecError(CodecErrc::truncated, count_at, "entry count " + std::to_string(count));
  }
  Section section;
  section.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t name_len = r.read_le<std::uint8_t>();
    const auto* p = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(p), name_len);
    section.push_back({std::move(name), read_value(r, depth)});
  }
  return section;
}

class Writer {
 public:
  std::vector<std::uint8_t> bytes;

  template <typename T>
  void le(T v) {
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }

  void section(const Section& s, std::size_t depth) {
    if (depth > kMaxDepth) {
      throw CodecError(CodecErrc::unencodable, bytes.size(), "nesting too deep");
    }
    write_varint(bytes, s.size());
    for (const auto& entry : s) {
      if (entry.name.size() > kMaxNameLength) {
        throw CodecError(CodecErrc::unencodable, bytes.size(),
                         "section name of " + std::to_string(entry.name.size()) + " bytes");
      }
      bytes.push_back(static_cast<std::uint8_t>(entry.name.size()));
      bytes.insert(bytes.end(), entry.name.begin(), entry.name.end());
      value(entry.value, depth);
    }
  }

  void value(const Value& v, std::size_t depth) {
    if (const auto* arr = v.get_if<Array>()) {
      le(static_cast<std::uint8_t>(static_cast<std::uint8_t>(arr->element_type) | kArrayFlag));
      write_varint(bytes, arr->items.size());
      for (const auto& item : arr->items) {
        if (item.is_array() || item.type() != arr->element_type) {
          throw CodecError(CodecErrc::unencodable, bytes.size(), "heterogeneous array");
        }
        scalar(item, depth);
      }
      return;
    }
    le(static_cast<std::uint8_t>(v.type()));
    scalar(v, depth);
  }

  void scalar(const Value& v, std::size_t depth) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, Section>) {
            section(x, depth + 1);
          } else if constexpr (std::is_same_v<T, Array>) {
            throw CodecError(CodecErrc::unencodable, bytes.size(), "nested array");
          } else if constexpr (std::is_same_v<T, std::string>) {
            write_varint(bytes, x.size());
            bytes.insert(bytes.end(), x.begin(), x.end());
          } else if constexpr (std::is_same_v<T, bool>) {
            bytes.push_back(x ? 1 : 0);
          } else if constexpr (std::is_same_v<T, double>) {
            le(std::bit_cast<std::uint64_t>(x));
          } else {
            le(x);
          }
        },
        v.storage());
  }
};

template <typename T>
T require_uint(const Value* v, const char* field, std::size_t index) {
  auto u = v ? v->as_unsigned() : std::nullopt;
  if (!u || *u > std::numeric_limits<T>::max()) {
    throw CodecError(CodecErrc::schema, 0,
                     "local_peerlist_new[" + std::to_string(index) + "]." + field +
                         " missing or not an unsigned integer");
  }
  return static_cast<T>(*u);
}

const Section& require_section(const Value* v, const char* field, std::size_t index) {
  const auto* s = v ? v->get_if<Section>() : nullptr;
  if (!s) {
    throw CodecError(CodecErrc::schema, 0,
                     "local_peerlist_new[" + std::to_string(index) + "]." + field +
                         " missing or not a section");
  }
  return *s;
}

const Value* find_in(const Section& s, std::string_view name) {
  for (const auto& e : s) {
    if (e.name == name) return &e.value;
  }
  return nullptr;
}

}  // namespace

Type Value::type() const noexcept {
  if (const auto* arr = std::get_if<Array>(&storage_)) return arr->element_type;
  // Variant alternatives are declared in type-code order, i64 = 1 .. section = 12.
  return static_cast<Type>(storage_.index() + 1);
}

const Value* Value::find(std::string_view name) const noexcept {
  const auto* s = std::get_if<Section>(&storage_);
  return s ? find_in(*s, name) : nullptr;
}

std::optional<std::uint64_t> Value::as_unsigned() const noexcept {
  return std::visit(
      [](const auto& x) -> std::optional<std::uint64_t> {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::uint32_t> ||
                      std::is_same_v<T, std::uint16_t> || std::is_same_v<T, std::uint8_t>) {
          return x;
        } else {
          return std::nullopt;
        }
      },
      storage_);
}

bool operator==(const Value& a, const Value& b) { return a.storage_ == b.storage_; }

void write_varint(std::vector<std::uint8_t>& out, std::uint64_t value) {
  if (value > kMaxVarint) {
    throw CodecError(CodecErrc::unencodable, out.size(), "varint value too large");
  }
  std::size_t width = 8;
  std::uint64_t mark = 3;
  if (value <= 63) {
    width = 1, mark = 0;
  } else if (value <= 16383) {
    width = 2, mark = 1;
  } else if (value <= 1073741823) {
    width = 4, mark = 2;
  }
  const std::uint64_t raw = (value << 2) | mark;
  for (std::size_t i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(raw >> (8 * i)));
}

Value parse(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  if (payload.size() < 9) {
    throw CodecError(CodecErrc::bad_signature, 0, "payload shorter than storage header");
  }
  if (r.read_le<std::uint32_t>() != kSignatureA || r.read_le<std::uint32_t>() != kSignatureB) {
    throw CodecError(CodecErrc::bad_signature, 0, "not a portable-storage blob");
  }
  if (const auto version = r.read_le<std::uint8_t>(); version != kFormatVersion) {
    throw CodecError(CodecErrc::bad_version, 8, "format version " + std::to_string(version));
  }
  Value root = read_section(r, 1);
  if (r.remaining() != 0) {
    throw CodecError(CodecErrc::trailing_bytes, r.pos(),
                     std::to_string(r.remaining()) + " bytes after root section");
  }
  return root;
}

std::vector<std::uint8_t> encode(const Value& root) {
  const auto* section = root.get_if<Section>();
  if (!section) throw CodecError(CodecErrc::unencodable, 0, "root must be a section");
  Writer w;
  w.le(kSignatureA);
  w.le(kSignatureB);
  w.le(kFormatVersion);
  w.section(*section, 1);
  return std::move(w.bytes);
}

std::uint32_t encode_ip(const PeerAddress& a, IpByteOrder order) {
  if (order == IpByteOrder::host) return a.ipv4();
  return std::uint32_t{a.octets[0]} | (std::uint32_t{a.octets[1]} << 8) |
         (std::uint32_t{a.octets[2]} << 16) | (std::uint32_t{a.octets[3]} << 24);
}

namespace {

PeerAddress decode_ip(std::uint32_t m_ip, std::uint16_t port, IpByteOrder order) {
  if (order == IpByteOrder::host) return PeerAddress::from_ipv4(m_ip, port);
  return {{static_cast<std::uint8_t>(m_ip), static_cast<std::uint8_t>(m_ip >> 8),
           static_cast<std::uint8_t>(m_ip >> 16), static_cast<std::uint8_t>(m_ip >> 24)},
          port};
}

}  // namespace

PeerList extract_peerlist(const Value& body, IpByteOrder order) {
  PeerList out;
  const Value* field = body.find("local_peerlist_new");
  if (!field) return out;
  const auto* arr = field->get_if<Array>();
  if (!arr || arr->element_type != Type::section) {
    throw CodecError(CodecErrc::schema, 0, "local_peerlist_new is not an array of sections");
  }
  out.entries.reserve(arr->items.size());
  for (std::size_t i = 0; i < arr->items.size(); ++i) {
    const Section& item = require_section(&arr->items[i], "entry", i);
    const Section& adr = require_section(find_in(item, "adr"), "adr", i);
    if (require_uint<std::uint8_t>(find_in(adr, "type"), "adr.type", i) != kAddressTypeIpv4) {
      ++out.skipped_non_ipv4;
      continue;
    }
    const Section& addr = require_section(find_in(adr, "addr"), "adr.addr", i);
    const auto m_ip = require_uint<std::uint32_t>(find_in(addr, "m_ip"), "adr.addr.m_ip", i);
    const auto m_port = require_uint<std::uint16_t>(find_in(addr, "m_port"), "adr.addr.m_port", i);

    PeerListEntry entry;
    entry.address = decode_ip(m_ip, m_port, order);
    if (const Value* id = find_in(item, "id")) entry.peer_id = require_uint<std::uint64_t>(id, "id", i);
    for (const auto& e : item) {
      if (e.name != "adr" && e.name != "id") entry.extras.emplace(e.name, e.value);
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

Value make_peerlist_body(std::span<const PeerListEntry> entries, IpByteOrder order) {
  Array list{Type::section, {}};
  list.items.reserve(entries.size());
  for (const auto& e : entries) {
    Section addr{{"m_ip", encode_ip(e.address, order)}, {"m_port", e.address.port}};
    Section adr{{"type", kAddressTypeIpv4}, {"addr", std::move(addr)}};
    Section item{{"adr", std::move(adr)}, {"id", e.peer_id}};
    for (const auto& [name, value] : e.extras) item.push_back({name, value});
    list.items.emplace_back(std::move(item));
  }
  Section payload_data{{"cumulative_difficulty", std::uint64_t{0}},
                       {"current_height", std::uint64_t{0}},
                       {"top_id", std::string(32, '\0')},
                       {"top_version", std::uint8_t{16}}};
  return Section{{"local_peerlist_new", std::move(list)},
                 {"payload_data", std::move(payload_data)}};
}

}  // namespace xmrmap::epee
