#include "xmrmap/capture.hpp"

#include <charconv>
#include <cstdio>

#include "xmrmap/codec_error.hpp"

namespace xmrmap {

namespace {

// "010.000.000.002.18080"
std::optional<PeerAddress> parse_padded_endpoint(std::string_view text) {
  PeerAddress out;
  for (int i = 0; i < 5; ++i) {
    const std::size_t width = i < 4 ? 3 : 5;
    if (text.size() < width) return std::nullopt;
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + width, value);
    if (ec != std::errc{} || ptr != text.data() + width) return std::nullopt;
    if (i < 4) {
      if (value > 255) return std::nullopt;
      out.octets[i] = static_cast<std::uint8_t>(value);
    } else {
      if (value > 65535) return std::nullopt;
      out.port = static_cast<std::uint16_t>(value);
    }
    text.remove_prefix(width);
    if (i < 4) {
      if (text.empty() || text.front() != '.') return std::nullopt;
      text.remove_prefix(1);
    }
  }
  if (!text.empty()) return std::nullopt;
  return out;
}

std::string padded_endpoint(const PeerAddress& a) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03u.%03u.%03u.%03u.%05u", a.octets[0], a.octets[1],
                a.octets[2], a.octets[3], a.port);
  return buf;
}

}  // namespace

std::optional<FlowEndpoints> parse_flow_filename(std::string_view name) {
  FlowEndpoints flow;
  if (auto t = name.find('T'); t != std::string_view::npos) {
    auto [ptr, ec] = std::from_chars(name.data(), name.data() + t, flow.observed_at);
    if (ec != std::errc{} || ptr != name.data() + t) return std::nullopt;
    name.remove_prefix(t + 1);
  }
  auto dash = name.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto src = parse_padded_endpoint(name.substr(0, dash));
  auto dst = parse_padded_endpoint(name.substr(dash + 1));
  if (!src || !dst) return std::nullopt;
  flow.source = *src;
  flow.destination = *dst;
  return flow;
}

std::string flow_filename(const FlowEndpoints& flow) {
  return std::to_string(flow.observed_at) + "T" + padded_endpoint(flow.source) + "-" +
         padded_endpoint(flow.destination);
}

void CaptureStats::merge(const CaptureStats& o) {
  flows += o.flows;
  flows_rejected += o.flows_rejected;
  frames_parsed += o.frames_parsed;
  frames_rejected += o.frames_rejected;
  frames_oversized += o.frames_oversized;
  frames_with_peerlist += o.frames_with_peerlist;
  partial_frames += o.partial_frames;
  peers_extracted += o.peers_extracted;
  non_ipv4_skipped += o.non_ipv4_skipped;
  errors.insert(errors.end(), o.errors.begin(), o.errors.end());
}

std::vector<PeerListObservation> observations_from_flow(std::span<const std::uint8_t> bytes,
                                                        const FlowEndpoints& flow,
                                                        const CaptureOptions& options,
                                                        CaptureStats& stats) {
  ++stats.flows;
  std::vector<PeerListObservation> out;
  levin::FrameStream stream;
  try {
    stream = levin::parse_frames(bytes, options.max_payload);
  } catch (const CodecError& e) {
    ++stats.flows_rejected;
    stats.errors.push_back(flow_filename(flow) + ": " + e.what());
    return out;
  }
  if (stream.trailing) {
    ++stats.partial_frames;
    stats.errors.push_back(flow_filename(flow) + ": partial frame at byte " +
                           std::to_string(stream.trailing->offset) + " (" +
                           std::to_string(stream.trailing->bytes_available) + " of " +
                           std::to_string(stream.trailing->bytes_expected) + " bytes)");
  }
  for (const auto& frame : stream.frames) {
    ++stats.frames_parsed;
    const auto command = frame.header.command;
    if (command != levin::kCommandHandshake && command != levin::kCommandTimedSync) continue;
    // Requests carry no peer list; only look at bodies that could.
    if (frame.payload.empty()) continue;
    epee::PeerList list;
    try {
      list = epee::extract_peerlist(epee::parse(frame.payload), options.byte_order);
    } catch (const CodecError& e) {
      ++stats.frames_rejected;
      stats.errors.push_back(flow_filename(flow) + ": frame at byte " +
                             std::to_string(frame.offset) + ": " + e.what());
      continue;
    }
    stats.non_ipv4_skipped += list.skipped_non_ipv4;
    if (list.entries.empty() && list.skipped_non_ipv4 == 0) continue;
    if (list.entries.size() > kMaxPeersPerMessage) {
      ++stats.frames_oversized;
      continue;
    }
    std::vector<PeerAddress> peers;
    peers.reserve(list.entries.size());
    for (const auto& e : list.entries) peers.push_back(e.address);
    ++stats.frames_with_peerlist;
    stats.peers_extracted += peers.size();
    out.push_back(make_observation(flow.observed_at, flow.destination, flow.source, peers));
  }
  return out;
}

std::vector<std::uint8_t> encode_flow(std::span<const PeerListObservation> observations,
                                      epee::IpByteOrder order) {
  std::vector<std::uint8_t> out;
  for (const auto& obs : observations) {
    std::vector<epee::PeerListEntry> entries;
    entries.reserve(obs.peers.size());
    for (const auto& p : obs.peers) entries.push_back({p, p.ipv4(), {}});
    auto payload = epee::encode(epee::make_peerlist_body(entries, order));
    levin::Header header;
    header.command = levin::kCommandTimedSync;
    header.flags = levin::kPacketResponse;
    header.return_code = 1;
    auto frame = levin::encode_frame(header, payload);
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

}  // namespace xmrmap
