#include "wattsentinel/sim/stp.hpp"

#include <deque>
#include <limits>
#include <tuple>

namespace ws::sim {

using powermodel::StpRole;

namespace {

struct Adjacent {
    int port;
    std::string peer;
    int peer_port;
};

} // namespace

std::size_t StpResult::forwarding_links(std::span<const StpLink> links) const {
    std::size_t n = 0;
    for (const auto& l : links) {
        auto a = roles.find({l.a, l.a_port});
        auto b = roles.find({l.b, l.b_port});
        if (l.active && a != roles.end() && b != roles.end() && a->second != StpRole::blocking &&
            b->second != StpRole::blocking) {
            ++n;
        }
    }
    return n;
}

StpResult stp_converge(std::span<const StpBridge> bridges, std::span<const StpLink> links) {
    std::map<std::string, int> priority;
    std::map<std::string, std::vector<Adjacent>> adj;
    for (const auto& b : bridges) {
        priority[b.id] = b.priority;
        adj[b.id];
    }
    for (const auto& l : links) {
        if (!l.active || !priority.contains(l.a) || !priority.contains(l.b)) {
            continue;
        }
        adj[l.a].push_back(Adjacent{l.a_port, l.b, l.b_port});
        adj[l.b].push_back(Adjacent{l.b_port, l.a, l.a_port});
    }
    auto rank = [&](const std::string& id) { return std::make_pair(priority.at(id), id); };

    StpResult out;
    std::map<std::string, int> dist;
    for (const auto& [id, _] : priority) {
        if (out.root_of.contains(id)) {
            continue;
        }
        // Collect the component, then elect its root.
        std::vector<std::string> members;
        std::deque<std::string> queue{id};
        out.root_of[id] = id;
        while (!queue.empty()) {
            auto cur = queue.front();
            queue.pop_front();
            members.push_back(cur);
            for (const auto& a : adj[cur]) {
                if (!out.root_of.contains(a.peer)) {
                    out.root_of[a.peer] = id;
                    queue.push_back(a.peer);
                }
            }
        }
        std::string root = members.front();
        for (const auto& m : members) {
            if (rank(m) < rank(root)) {
                root = m;
            }
        }
        for (const auto& m : members) {
            out.root_of[m] = root;
        }
        dist[root] = 0;
        std::deque<std::string> bfs{root};
        while (!bfs.empty()) {
            auto cur = bfs.front();
            bfs.pop_front();
            for (const auto& a : adj[cur]) {
                if (!dist.contains(a.peer)) {
                    dist[a.peer] = dist[cur] + 1;
                    bfs.push_back(a.peer);
                }
            }
        }
    }

    // Root port of each non-root bridge.
    std::map<std::string, int> root_port;
    for (const auto& [id, edges] : adj) {
        if (out.root_of[id] == id) {
            continue;
        }
        std::tuple<int, int, std::string, int> best{std::numeric_limits<int>::max(), 0, "", 0};
        int chosen = -1;
        for (const auto& a : edges) {
            std::tuple<int, int, std::string, int> key{dist[a.peer], priority[a.peer], a.peer, a.port};
            if (chosen < 0 || key < best) {
                best = key;
                chosen = a.port;
            }
        }
        if (chosen >= 0) {
            root_port[id] = chosen;
        }
    }

    for (const auto& l : links) {
        if (!l.active || !priority.contains(l.a) || !priority.contains(l.b)) {
            continue;
        }
        const PortKey a{l.a, l.a_port};
        const PortKey b{l.b, l.b_port};
        auto is_root_port = [&](const PortKey& k) {
            auto it = root_port.find(k.first);
            return it != root_port.end() && it->second == k.second;
        };
        // The end closer to the root (then lower bridge rank, then port)
        // is designated for the segment.
        const auto ka = std::make_tuple(dist[l.a], priority[l.a], l.a, l.a_port);
        const auto kb = std::make_tuple(dist[l.b], priority[l.b], l.b, l.b_port);
        const PortKey& designated = ka < kb ? a : b;
        const PortKey& other = ka < kb ? b : a;
        out.roles[designated] = StpRole::designated;
        out.roles[other] = is_root_port(other) ? StpRole::root : StpRole::blocking;
    }
    return out;
}

} // namespace ws::sim
