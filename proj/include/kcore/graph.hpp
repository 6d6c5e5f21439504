#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace kcore {

using VertexId = std::uint32_t;
using Edge = std::pair<VertexId, VertexId>;  // stored with first < second

// Simple graph with CSR adjacency, sorted neighbour lists and a cross
// reference from every directed slot (v->w) to its reverse slot (w->v).
class Graph {
public:
    Graph() = default;
    Graph(VertexId n, std::vector<Edge> edges) { assign(n, std::move(edges)); }

    // Rebuild in place (validates: no loops, no duplicate pairs, ids < n).
    // `validated` skips normalisation and the duplicate scan for callers
    // that construct edges distinct and ordered by construction.
    void assign(VertexId n, std::vector<Edge> edges, bool validated = false);

    VertexId num_vertices() const { return n_; }
    std::size_t num_edges() const { return edges_.size(); }
    const std::vector<Edge>& edges() const { return edges_; }

    std::uint32_t degree(VertexId v) const { return offset_[v + 1] - offset_[v]; }
    std::uint32_t slot_begin(VertexId v) const { return offset_[v]; }
    std::uint32_t slot_end(VertexId v) const { return offset_[v + 1]; }
    VertexId neighbor_at(std::uint32_t slot) const { return nbr_[slot]; }
    std::uint32_t reverse_slot(std::uint32_t slot) const { return rev_[slot]; }

    // Slot of the directed pair (v,w); v and w must be adjacent.
    std::uint32_t slot_of(VertexId v, VertexId w) const;

    static Graph read_edge_list(std::istream& in);
    void write_edge_list(std::ostream& out) const;

private:
    VertexId n_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::uint32_t> offset_;  // n+1
    std::vector<VertexId> nbr_;          // 2m, sorted within each vertex
    std::vector<std::uint32_t> rev_;     // 2m
};

// Vertices of the k-core (sorted). Bucket-queue peeling, O(n+m).
std::vector<VertexId> peel_core(const Graph& g, int k);

// Warning Propagation fixed point. messages[slot] is the 0/1 message sent
// along that directed slot; in_ones[v] counts incoming 1-messages.
struct WpState {
    std::vector<std::uint8_t> messages;
    std::vector<std::uint8_t> marks;
    std::vector<std::int32_t> in_ones;
    int rounds = 0;
};

// Core/mantle decomposition induced by the WP fixed point.
struct Decomposition {
    WpState wp;
    std::vector<std::uint8_t> klass;      // per vertex: 0, 1 (= star), 2 (= one)
    std::vector<VertexId> n0, nstar, n1;  // sorted vertex lists
    // typed_deg[v][2a+b] = #neighbours w with msg(w->v)=a, msg(v->w)=b
    std::vector<std::array<std::int32_t, 4>> typed_deg;
    std::int64_t m_ab[4] = {0, 0, 0, 0};  // ordered-pair counts m_00,m_01,m_10,m_11

    std::int64_t n_star() const { return std::int64_t(nstar.size()); }
    std::int64_t n_one() const { return std::int64_t(n1.size()); }
};

// Reusable engine; one instance per worker thread.
class WpEngine {
public:
    const WpState& run(const Graph& g, int k);
    WpState& state() { return state_; }

private:
    WpState state_;
    std::vector<VertexId> frontier_, next_frontier_;
    std::vector<std::uint8_t> queued_;
    std::vector<std::uint32_t> flip_slots_;
};

WpState wp_run(const Graph& g, int k);
Decomposition decompose(const Graph& g, int k);

// ---- cycle counting on small sparse (multi)graphs ----

// Directed cycles over arc instances: length-1 loops count one each, a
// 2-cycle is an unordered pair of antiparallel arc instances, longer cycles
// visit distinct vertices (counted once, anchored at their minimal vertex).
std::int64_t count_directed_cycles(const std::vector<Edge>& arcs);

// Undirected cycles over edge instances, counted up to rotation and
// reflection; loops and parallel pairs are the length-1 and length-2 cases.
std::int64_t count_undirected_cycles(const std::vector<Edge>& edge_instances);

// Forbidden-cycle diagnostics of a decomposition: directed cycles inside
// N_star (arcs where exactly the v->w message is 1) and cycles inside
// N_+ = {v in N_0 : d_10(v) = k-2} using edges with both messages 0.
struct ForbiddenCycles {
    std::int64_t x_star = 0;
    std::int64_t x_plus = 0;
};
ForbiddenCycles count_forbidden_cycles(const Graph& g, const Decomposition& dec, int k);

}  // namespace kcore
