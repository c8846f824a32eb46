#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "dmot/registration.hpp"
#include "dmot/tracking.hpp"

namespace dmot {

/// Undirected communication graph; construction rejects disconnected,
/// asymmetric, or self-looped adjacency.
struct CommGraph {
    int n = 0;
    std::vector<std::vector<uint8_t>> adj;

    static CommGraph complete(int n);
    static CommGraph from_adjacency(std::vector<std::vector<uint8_t>> adjacency);

    bool adjacent(int i, int j) const { return i != j && adj[i][j] != 0; }
    std::vector<int> neighbors(int i) const;
};

using MessagePayload = std::variant<InfoMessage, LandmarkMap>;

constexpr int kBroadcast = -1;

struct Envelope {
    int32_t sender = -1;
    int32_t recipient = kBroadcast;  // kBroadcast = all one-hop neighbors
    MessagePayload payload;
};

/// Per-robot inboxes for one synchronous round, ordered by (sender, send
/// position) for determinism.
struct RoundMailbox {
    std::vector<std::vector<Envelope>> inbox;
};

/// Deliver every outbox message to its addressed, adjacent recipients.
/// Throws NotNeighbor for a directed message to a non-adjacent robot.
RoundMailbox exchange_round(const std::vector<std::vector<Envelope>>& outboxes,
                            const CommGraph& g);

/// True exactly on frames where floor(frame * rate / frame_rate) increments.
bool schedule_map_shares(int64_t frame, double rate_hz, double frame_rate_hz);

/// Rough wire size of a payload, for communication-volume traces.
size_t payload_size_estimate(const MessagePayload& payload);

}  // namespace dmot
