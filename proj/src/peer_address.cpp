#include "xmrmap/peer_address.hpp"

#include <charconv>

#include "xmrmap/error.hpp"

namespace xmrmap {

namespace {

bool parse_decimal(std::string_view text, unsigned max, unsigned& out) {
  if (text.empty() || text.size() > 5) return false;
  if (text.size() > 1 && text.front() == '0') return false;
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return false;
  if (value > max) return false;
  out = value;
  return true;
}

}  // namespace

std::optional<PeerAddress> PeerAddress::try_parse(std::string_view text) {
  PeerAddress out;
  auto colon = text.find(':');
  std::string_view ip = text.substr(0, colon);
  if (colon != std::string_view::npos) {
    unsigned port = 0;
    if (!parse_decimal(text.substr(colon + 1), 65535, port)) return std::nullopt;
    out.port = static_cast<std::uint16_t>(port);
  }
  for (int i = 0; i < 4; ++i) {
    auto dot = ip.find('.');
    if ((i < 3) == (dot == std::string_view::npos)) return std::nullopt;
    unsigned octet = 0;
    if (!parse_decimal(ip.substr(0, dot), 255, octet)) return std::nullopt;
    out.octets[i] = static_cast<std::uint8_t>(octet);
    ip = dot == std::string_view::npos ? std::string_view{} : ip.substr(dot + 1);
  }
  return out;
}

PeerAddress PeerAddress::parse(std::string_view text) {
  if (auto parsed = try_parse(text)) return *parsed;
  throw InputError("invalid IPv4 address '" + std::string(text) + "'");
}

PeerAddress PeerAddress::from_ipv4(std::uint32_t ip, std::uint16_t port) {
  return {{static_cast<std::uint8_t>(ip >> 24), static_cast<std::uint8_t>(ip >> 16),
           static_cast<std::uint8_t>(ip >> 8), static_cast<std::uint8_t>(ip)},
          port};
}

std::uint32_t PeerAddress::ipv4() const noexcept {
  return (std::uint32_t{octets[0]} << 24) | (std::uint32_t{octets[1]} << 16) |
         (std::uint32_t{octets[2]} << 8) | std::uint32_t{octets[3]};
}

std::string PeerAddress::ip_string() const {
  std::string s;
  s.reserve(15);
  for (int i = 0; i < 4; ++i) {
    if (i) s += '.';
    s += std::to_string(octets[i]);
  }
  return s;
}

std::string PeerAddress::to_string() const {
  return port == 0 ? ip_string() : ip_string() + ':' + std::to_string(port);
}

}  // namespace xmrmap
