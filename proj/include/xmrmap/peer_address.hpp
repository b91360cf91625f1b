#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace xmrmap {

inline constexpr std::uint16_t kDefaultP2PPort = 18080;

// IPv4 endpoint. Port 0 means "address only" (ground-truth exports carry no
// ports), and such an address matches any port in ip-only comparisons.
struct PeerAddress {
  std::array<std::uint8_t, 4> octets{};
  std::uint16_t port = 0;

  // Accepts "a.b.c.d" or "a.b.c.d:port". Throws InputError.
  static PeerAddress parse(std::string_view text);
  static std::optional<PeerAddress> try_parse(std::string_view text);

  // Host-order integer, first octet in the most significant byte.
  static PeerAddress from_ipv4(std::uint32_t ip, std::uint16_t port = 0);
  std::uint32_t ipv4() const noexcept;

  // "a.b.c.d:port", or "a.b.c.d" when port is 0.
  std::string to_string() const;
  std::string ip_string() const;

  bool has_port() const noexcept { return port != 0; }
  PeerAddress without_port() const noexcept { return {octets, 0}; }
  bool same_ip(const PeerAddress& other) const noexcept {
    return octets == other.octets;
  }

  friend auto operator<=>(const PeerAddress&, const PeerAddress&) = default;
};

// How two addresses are compared when joining inferred edges with ground truth.
enum class MatchMode {
  ip_only,
  endpoint,
};

inline bool addresses_match(const PeerAddress& a, const PeerAddress& b,
                            MatchMode mode) noexcept {
  return mode == MatchMode::ip_only ? a.same_ip(b) : a == b;
}

inline PeerAddress match_key(const PeerAddress& a, MatchMode mode) noexcept {
  return mode == MatchMode::ip_only ? a.without_port() : a;
}

}  // namespace xmrmap

template <>
struct std::hash<xmrmap::PeerAddress> {
  std::size_t operator()(const xmrmap::PeerAddress& a) const noexcept {
    return std::hash<std::uint64_t>{}(
        (static_cast<std::uint64_t>(a.ipv4()) << 16) | a.port);
  }
};
