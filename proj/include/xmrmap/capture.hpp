#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmrmap/epee.hpp"
#include "xmrmap/levin.hpp"
#include "xmrmap/trace.hpp"

namespace xmrmap {

// One direction of a reassembled TCP flow, as named by tcpflow:
// `[<epoch>T]aaa.bbb.ccc.ddd.ppppp-aaa.bbb.ccc.ddd.ppppp`, zero padded.
// Bytes in the flow were sent by `source` and received by `destination`.
struct FlowEndpoints {
  PeerAddress source;
  PeerAddress destination;
  std::int64_t observed_at = 0;

  friend bool operator==(const FlowEndpoints&, const FlowEndpoints&) = default;
};

std::optional<FlowEndpoints> parse_flow_filename(std::string_view name);
std::string flow_filename(const FlowEndpoints& flow);

struct CaptureOptions {
  std::uint64_t max_payload = levin::kDefaultMaxPayload;
  epee::IpByteOrder byte_order = epee::IpByteOrder::network;
};

struct CaptureStats {
  std::uint64_t flows = 0;
  std::uint64_t flows_rejected = 0;  // frame sync lost or payload cap hit
  std::uint64_t frames_parsed = 0;
  std::uint64_t frames_rejected = 0;  // undecodable payload or schema error
  std::uint64_t frames_oversized = 0;  // more peers than a message may carry
  std::uint64_t frames_with_peerlist = 0;
  std::uint64_t partial_frames = 0;
  std::uint64_t peers_extracted = 0;
  std::uint64_t non_ipv4_skipped = 0;
  std::vector<std::string> errors;

  void merge(const CaptureStats& other);
};

// Decodes every handshake/timed-sync frame carrying `local_peerlist_new` into
// an observation made by `flow.destination` of `flow.source`.
std::vector<PeerListObservation> observations_from_flow(std::span<const std::uint8_t> bytes,
                                                        const FlowEndpoints& flow,
                                                        const CaptureOptions& options,
                                                        CaptureStats& stats);

// Fixture encoder: one timed-sync response frame per observation.
std::vector<std::uint8_t> encode_flow(std::span<const PeerListObservation> observations,
                                      epee::IpByteOrder order = epee::IpByteOrder::network);

}  // namespace xmrmap
