#include "kcore/graph.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace kcore {

void Graph::assign(VertexId n, std::vector<Edge> edges, bool validated) {
    n_ = n;
    edges_ = std::move(edges);
    if (!validated) {
        for (auto& e : edges_) {
            if (e.first > e.second) std::swap(e.first, e.second);
            if (e.first == e.second) throw std::invalid_argument("Graph: loop edge");
            if (e.second >= n_) throw std::invalid_argument("Graph: vertex id out of range");
        }
        std::sort(edges_.begin(), edges_.end());
        if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
            throw std::invalid_argument("Graph: duplicate edge");
    }

    offset_.assign(std::size_t(n_) + 1, 0);
    for (const auto& e : edges_) {
        ++offset_[e.first + 1];
        ++offset_[e.second + 1];
    }
    for (VertexId v = 0; v < n_; ++v) offset_[v + 1] += offset_[v];

    nbr_.resize(2 * edges_.size());
    std::vector<std::uint32_t> cursor(offset_.begin(), offset_.end() - 1);
    for (const auto& e : edges_) {
        nbr_[cursor[e.first]++] = e.second;
        nbr_[cursor[e.second]++] = e.first;
    }
    for (VertexId v = 0; v < n_; ++v)
        std::sort(nbr_.begin() + offset_[v], nbr_.begin() + offset_[v + 1]);

    rev_.resize(nbr_.size());
    for (VertexId v = 0; v < n_; ++v)
        for (std::uint32_t s = offset_[v]; s < offset_[v + 1]; ++s)
            rev_[s] = slot_of(nbr_[s], v);
}

std::uint32_t Graph::slot_of(VertexId v, VertexId w) const {
    auto first = nbr_.begin() + offset_[v];
    auto last = nbr_.begin() + offset_[v + 1];
    auto it = std::lower_bound(first, last, w);
    if (it == last || *it != w) throw std::invalid_argument("Graph::slot_of: not adjacent");
    return std::uint32_t(it - nbr_.begin());
}

Graph Graph::read_edge_list(std::istream& in) {
    std::uint64_t n = 0, m = 0;
    if (!(in >> n >> m)) throw std::runtime_error("edge list: missing header");
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) {
        std::uint64_t u, v;
        if (!(in >> u >> v)) throw std::runtime_error("edge list: truncated");
        edges.emplace_back(VertexId(u), VertexId(v));
    }
    return Graph(VertexId(n), std::move(edges));
}

void Graph::write_edge_list(std::ostream& out) const {
    out << n_ << ' ' << edges_.size() << '\n';
    for (const auto& e : edges_) out << e.first << ' ' << e.second << '\n';
}

std::vector<VertexId> peel_core(const Graph& g, int k) {
    const VertexId n = g.num_vertices();
    std::vector<std::int32_t> deg(n);
    std::vector<std::uint8_t> removed(n, 0);
    std::vector<VertexId> queue;
    for (VertexId v = 0; v < n; ++v) {
        deg[v] = std::int32_t(g.degree(v));
        if (deg[v] < k) { queue.push_back(v); removed[v] = 1; }
    }
    while (!queue.empty()) {
        VertexId v = queue.back();
        queue.pop_back();
        for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
            VertexId w = g.neighbor_at(s);
            if (removed[w]) continue;
            if (--deg[w] < k) { removed[w] = 1; queue.push_back(w); }
        }
    }
    std::vector<VertexId> core;
    for (VertexId v = 0; v < n; ++v)
        if (!removed[v]) core.push_back(v);
    return core;
}

const WpState& WpEngine::run(const Graph& g, int k) {
    const VertexId n = g.num_vertices();
    const std::size_t slots = 2 * g.num_edges();
    state_.messages.assign(slots, 1);
    state_.in_ones.assign(n, 0);
    state_.marks.assign(n, 0);
    state_.rounds = 0;
    for (VertexId v = 0; v < n; ++v) state_.in_ones[v] = std::int32_t(g.degree(v));

    frontier_.clear();
    next_frontier_.clear();
    queued_.assign(n, 0);
    frontier_.reserve(n);
    for (VertexId v = 0; v < n; ++v) frontier_.push_back(v);

    auto& msg = state_.messages;
    auto& in = state_.in_ones;

    while (!frontier_.empty()) {
        // Collect this round's flips against the previous round's state, then
        // apply them all at once: exact parallel-round semantics.
        flip_slots_.clear();
        for (VertexId v : frontier_) {
            queued_[v] = 0;
            for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
                if (!msg[s]) continue;
                if (in[v] - std::int32_t(msg[g.reverse_slot(s)]) < k - 1)
                    flip_slots_.push_back(s);
            }
        }
        if (flip_slots_.empty()) break;
        ++state_.rounds;
        for (std::uint32_t s : flip_slots_) {
            assert(msg[s] == 1);  // flips are one-way
            msg[s] = 0;
            VertexId w = g.neighbor_at(s);
            --in[w];
            if (!queued_[w]) { queued_[w] = 1; next_frontier_.push_back(w); }
        }
        frontier_.swap(next_frontier_);
        next_frontier_.clear();
    }
    // The scan that found nothing to flip is the final (unchanged) round.
    ++state_.rounds;

    for (VertexId v = 0; v < n; ++v) state_.marks[v] = in[v] >= k ? 1 : 0;
    return state_;
}

WpState wp_run(const Graph& g, int k) {
    WpEngine engine;
    engine.run(g, k);
    return std::move(engine.state());
}

Decomposition decompose(const Graph& g, int k) {
    Decomposition dec;
    dec.wp = wp_run(g, k);
    const VertexId n = g.num_vertices();
    dec.klass.assign(n, 0);
    dec.typed_deg.assign(n, {0, 0, 0, 0});
    for (VertexId v = 0; v < n; ++v) {
        std::int32_t in1 = dec.wp.in_ones[v];
        if (in1 <= k - 2) { dec.klass[v] = 0; dec.n0.push_back(v); }
        else if (in1 == k - 1) { dec.klass[v] = 1; dec.nstar.push_back(v); }
        else { dec.klass[v] = 2; dec.n1.push_back(v); }
        for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
            int a = dec.wp.messages[g.reverse_slot(s)];
            int b = dec.wp.messages[s];
            ++dec.typed_deg[v][2 * a + b];
            ++dec.m_ab[2 * a + b];
        }
    }
    assert(dec.m_ab[1] == dec.m_ab[2]);
    assert(dec.m_ab[0] % 2 == 0 && dec.m_ab[3] % 2 == 0);
    assert(dec.m_ab[0] + dec.m_ab[1] + dec.m_ab[2] + dec.m_ab[3] ==
           std::int64_t(2 * g.num_edges()));
    return dec;
}

namespace {

// Relabels the incident vertices to 0..s-1 and returns adjacency with
// multiplicities; loops are split out.
struct CompactMulti {
    std::vector<std::vector<std::pair<std::uint32_t, std::int64_t>>> adj;
    std::int64_t loop_instances = 0;

    CompactMulti(const std::vector<Edge>& items, bool directed) {
        std::unordered_map<VertexId, std::uint32_t> id;
        std::unordered_map<std::uint64_t, std::int64_t> mult;
        auto intern = [&](VertexId v) {
            auto [it, fresh] = id.emplace(v, std::uint32_t(id.size()));
            return it->second;
        };
        for (const auto& e : items) {
            if (e.first == e.second) { ++loop_instances; intern(e.first); continue; }
            std::uint32_t a = intern(e.first), b = intern(e.second);
            if (!directed && a > b) std::swap(a, b);
            ++mult[(std::uint64_t(a) << 32) | b];
        }
        adj.resize(id.size());
        for (auto& [key, c] : mult) {
            auto a = std::uint32_t(key >> 32);
            auto b = std::uint32_t(key & 0xffffffffu);
            adj[a].emplace_back(b, c);
            if (!directed) adj[b].emplace_back(a, c);
        }
        for (auto& lst : adj) std::sort(lst.begin(), lst.end());
    }
};

// DFS over vertices > anchor, accumulating multiplicity products.
struct CycleDfs {
    const CompactMulti& g;
    bool directed;
    std::vector<std::uint8_t> on_path;
    std::int64_t total = 0;
    std::uint32_t anchor = 0;

    explicit CycleDfs(const CompactMulti& graph, bool dir)
        : g(graph), directed(dir), on_path(graph.adj.size(), 0) {}

    // mult(u -> anchor) for closing arcs; for undirected the adjacency is
    // symmetric so the same lookup works.
    std::int64_t closing_mult(std::uint32_t u) const {
        const auto& lst = g.adj[u];
        auto it = std::lower_bound(lst.begin(), lst.end(),
                                   std::make_pair(anchor, std::int64_t(0)));
        if (it != lst.end() && it->first == anchor) return it->second;
        return 0;
    }

    void walk(std::uint32_t u, std::int64_t product, int depth) {
        on_path[u] = 1;
        for (const auto& [w, c] : g.adj[u]) {
            if (w == anchor) {
                if (depth >= 2) total += product * c;  // length >= 3 closure
                continue;
            }
            if (w < anchor || on_path[w]) continue;
            walk(w, product * c, depth + 1);
        }
        on_path[u] = 0;
    }
};

}  // namespace

std::int64_t count_directed_cycles(const std::vector<Edge>& arcs) {
    CompactMulti g(arcs, /*directed=*/true);
    std::int64_t total = g.loop_instances;
    // 2-cycles: unordered pairs of antiparallel arc instances.
    for (std::uint32_t v = 0; v < g.adj.size(); ++v)
        for (const auto& [w, c] : g.adj[v]) {
            if (w <= v) continue;
            const auto& back = g.adj[w];
            auto it = std::lower_bound(back.begin(), back.end(),
                                       std::make_pair(v, std::int64_t(0)));
            if (it != back.end() && it->first == v) total += c * it->second;
        }
    CycleDfs dfs(g, true);
    for (std::uint32_t s = 0; s < g.adj.size(); ++s) {
        dfs.anchor = s;
        dfs.walk(s, 1, 0);
    }
    return total + dfs.total;
}

std::int64_t count_undirected_cycles(const std::vector<Edge>& edge_instances) {
    CompactMulti g(edge_instances, /*directed=*/false);
    std::int64_t total = g.loop_instances;
    // 2-cycles: unordered pairs of parallel edge instances.
    for (std::uint32_t v = 0; v < g.adj.size(); ++v)
        for (const auto& [w, c] : g.adj[v])
            if (w > v) total += c * (c - 1) / 2;
    // Longer cycles are traversed in both directions; halve at the end.
    CycleDfs dfs(g, false);
    std::int64_t doubled = 0;
    for (std::uint32_t s = 0; s < g.adj.size(); ++s) {
        dfs.anchor = s;
        dfs.total = 0;
        dfs.walk(s, 1, 0);
        doubled += dfs.total;
    }
    assert(doubled % 2 == 0);
    return total + doubled / 2;
}

ForbiddenCycles count_forbidden_cycles(const Graph& g, const Decomposition& dec, int k) {
    ForbiddenCycles fc;
    std::vector<Edge> arcs;
    for (VertexId v : dec.nstar)
        for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
            VertexId w = g.neighbor_at(s);
            if (dec.klass[w] != 1) continue;
            if (dec.wp.messages[s] == 1 && dec.wp.messages[g.reverse_slot(s)] == 0)
                arcs.emplace_back(v, w);
        }
    fc.x_star = count_directed_cycles(arcs);

    std::vector<std::uint8_t> in_plus(g.num_vertices(), 0);
    for (VertexId v : dec.n0)
        if (dec.typed_deg[v][2] == k - 2) in_plus[v] = 1;
    std::vector<Edge> edges;
    for (VertexId v : dec.n0) {
        if (!in_plus[v]) continue;
        for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
            VertexId w = g.neighbor_at(s);
            if (w <= v || !in_plus[w]) continue;
            if (dec.wp.messages[s] == 0 && dec.wp.messages[g.reverse_slot(s)] == 0)
                edges.emplace_back(v, w);
        }
    }
    fc.x_plus = count_undirected_cycles(edges);
    return fc;
}

}  // namespace kcore
