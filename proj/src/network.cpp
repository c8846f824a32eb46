#include "dmot/network.hpp"

#include <cmath>
#include <string>

#include "dmot/errors.hpp"

namespace dmot {

namespace {

void check_connected(const std::vector<std::vector<uint8_t>>& adj) {
    const int n = static_cast<int>(adj.size());
    if (n == 0) throw ConfigError("communication graph has no vertices");
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(adj[i].size()) != n) {
            throw ConfigError("communication graph adjacency is not square");
        }
        if (adj[i][i] != 0) throw ConfigError("communication graph has a self-loop");
        for (int j = 0; j < n; ++j) {
            if (adj[i][j] != adj[j][i]) {
                throw ConfigError("communication graph adjacency is not symmetric");
            }
        }
    }
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        for (int j = 0; j < n; ++j) {
            if (adj[i][j] != 0 && !seen[j]) {
                seen[j] = 1;
                stack.push_back(j);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        if (!seen[i]) {
            throw ConfigError("communication graph is disconnected (robot " + std::to_string(i) +
                              " unreachable)");
        }
    }
}

}  // namespace

CommGraph CommGraph::complete(int n) {
    std::vector<std::vector<uint8_t>> adj(n, std::vector<uint8_t>(n, 1));
    for (int i = 0; i < n; ++i) adj[i][i] = 0;
    return from_adjacency(std::move(adj));
}

CommGraph CommGraph::from_adjacency(std::vector<std::vector<uint8_t>> adjacency) {
    check_connected(adjacency);
    CommGraph g;
    g.n = static_cast<int>(adjacency.size());
    g.adj = std::move(adjacency);
    return g;
}

std::vector<int> CommGraph::neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
        if (adjacent(i, j)) out.push_back(j);
    }
    return out;
}

RoundMailbox exchange_round(const std::vector<std::vector<Envelope>>& outboxes,
                            const CommGraph& g) {
    RoundMailbox mail;
    mail.inbox.resize(g.n);
    // Iterating senders in id order and outboxes in send order gives every
    // inbox a deterministic (sender, sequence) ordering.
    for (int sender = 0; sender < static_cast<int>(outboxes.size()); ++sender) {
        for (const Envelope& env : outboxes[sender]) {
            if (env.recipient == kBroadcast) {
                for (int j : g.neighbors(sender)) {
                    Envelope delivered = env;
                    delivered.sender = sender;
                    delivered.recipient = j;
                    mail.inbox[j].push_back(std::move(delivered));
                }
            } else {
                if (!g.adjacent(sender, env.recipient)) {
                    throw NotNeighbor("robot " + std::to_string(sender) +
                                      " cannot reach non-adjacent robot " +
                                      std::to_string(env.recipient));
                }
                Envelope delivered = env;
                delivered.sender = sender;
                mail.inbox[env.recipient].push_back(std::move(delivered));
            }
        }
    }
    return mail;
}

bool schedule_map_shares(int64_t frame, double rate_hz, double frame_rate_hz) {
    if (rate_hz <= 0.0 || frame <= 0) return false;
    const double ratio = rate_hz / frame_rate_hz;
    return std::floor(static_cast<double>(frame) * ratio) !=
           std::floor(static_cast<double>(frame - 1) * ratio);
}

size_t payload_size_estimate(const MessagePayload& payload) {
    if (std::holds_alternative<InfoMessage>(payload)) {
        // id + prior + u + U + header
        return sizeof(TrackId) + (4 + 4 + 16) * sizeof(double) + 12;
    }
    const auto& map = std::get<LandmarkMap>(payload);
    return map.serialize().size();
}

}  // namespace dmot
