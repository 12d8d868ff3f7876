#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sbc {

using NodeSet = std::set<std::string>;

struct Edge {
    std::string parent;
    std::string child;
    /// Free-form annotation, e.g. "dashed:cannibalization". Empty for plain edges.
    std::string tag;

    friend bool operator==(const Edge& a, const Edge& b) {
        return a.parent == b.parent && a.child == b.child;
    }
};

/// Immutable directed acyclic graph over named nodes.
///
/// Construction validates the graph: every edge endpoint must be declared,
/// self loops and duplicate edges are rejected, and the graph must admit a
/// topological order. Any violation throws StructuralError.
class Dag {
public:
    Dag() = default;
    Dag(std::vector<std::string> nodes, std::vector<Edge> edges, std::map<std::string, std::string> metadata = {});

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const std::map<std::string, std::string>& metadata() const noexcept { return metadata_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    bool has_node(const std::string& name) const { return index_.count(name) != 0; }
    bool has_edge(const std::string& parent, const std::string& child) const;
    /// Index of a node; throws IdentificationError for unknown names.
    std::size_t index_of(const std::string& name) const;

    const std::vector<std::size_t>& parents(std::size_t node) const { return parents_[node]; }
    const std::vector<std::size_t>& children(std::size_t node) const { return children_[node]; }
    NodeSet parents(const std::string& name) const;
    NodeSet children(const std::string& name) const;
    NodeSet descendants(const std::string& name) const;  ///< excludes the node itself
    NodeSet ancestors(const std::string& name) const;    ///< excludes the node itself

    /// Node indices in a topological order (parents first).
    const std::vector<std::size_t>& topological_order() const noexcept { return topo_; }

    /// Copy of this graph without the given edges (missing edges are ignored).
    Dag without_edges(const std::vector<std::pair<std::string, std::string>>& drop) const;
    /// Copy of this graph with every edge leaving `node` removed.
    Dag without_outgoing(const std::string& node) const;
    /// Copy with extra edges appended; revalidated.
    Dag with_edges(const std::vector<Edge>& extra) const;

    friend bool operator==(const Dag& a, const Dag& b);

private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
    std::map<std::string, std::string> metadata_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> parents_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> topo_;
};

/// True iff every path between x and y is blocked by z.
/// Uses the reachability ("Bayes-ball") formulation, linear in the graph size.
bool is_d_separated(const Dag& dag, const std::string& x, const std::string& y, const NodeSet& z);

/// Back-door criterion for the ordered pair (treatment, outcome).
bool satisfies_backdoor(const Dag& dag, const std::string& treatment, const std::string& outcome, const NodeSet& z);

/// Named catalog of the search-advertising diagrams:
/// "figure1" (query-level), "figure2" (simple scenario), "figure3" and
/// "figure4" (non-search media, with and without the shared budget), and
/// "figure6" (auction-level diagram).
std::map<std::string, Dag> builtin_diagrams();
/// Single catalog entry; throws IdentificationError when the key is unknown.
Dag builtin_diagram(const std::string& key);

// ---------------------------------------------------------------------------
// Serialization: `parent -> child` edge lists and JSON.
// ---------------------------------------------------------------------------

/// Parses the edge-list format. Lines are `a -> b`, a bare node name, or
/// comments starting with '#'. An optional `[tag]` after the child annotates
/// the edge.
Dag parse_edge_list(const std::string& text);
std::string to_edge_list(const Dag& dag);
Dag load_edge_list(const std::string& path);
void save_edge_list(const Dag& dag, const std::string& path);

/// JSON form: {"nodes": [...], "edges": [["a","b"], ...] or [{"from","to","tag"}], "metadata": {...}}.
Dag dag_from_json(const std::string& text);
std::string dag_to_json(const Dag& dag);

// ---------------------------------------------------------------------------
// Discrete structural causal models.
// ---------------------------------------------------------------------------

/// A DAG with a finite state space per node and a conditional probability
/// table per node.
///
/// CPT layout: `cpts[node]` is row-major with one row per joint parent
/// configuration (parents ordered as `dag.parents(node)`, the last parent
/// varying fastest) and one column per node state.
class DiscreteScm {
public:
    static constexpr std::size_t max_joint_cells = 1'000'000;

    DiscreteScm(Dag dag, std::vector<std::size_t> cardinalities, std::vector<std::vector<double>> cpts);

    const Dag& dag() const noexcept { return dag_; }
    const std::vector<std::size_t>& cardinalities() const noexcept { return card_; }
    const std::vector<std::vector<double>>& cpts() const noexcept { return cpts_; }
    std::size_t joint_size() const noexcept { return joint_size_; }

    /// Row index into cpts[node] for a full assignment of states.
    std::size_t parent_row(std::size_t node, const std::vector<std::size_t>& states) const;
    double conditional(std::size_t node, const std::vector<std::size_t>& states) const;

    /// Full joint distribution in mixed-radix order (node 0 slowest).
    std::vector<double> joint() const;
    /// Decodes a flat joint index into per-node states.
    std::vector<std::size_t> decode(std::size_t flat) const;

private:
    Dag dag_;
    std::vector<std::size_t> card_;
    std::vector<std::vector<double>> cpts_;
    std::size_t joint_size_ = 1;
};

/// Pr(outcome | do(treatment = value)) by the back-door adjustment formula
/// sum_z Pr(outcome | treatment, z) Pr(z), evaluated by exact enumeration.
std::vector<double> backdoor_adjust(const DiscreteScm& scm, const std::string& treatment, std::size_t treatment_value,
                                    const std::string& outcome, const NodeSet& z);

}  // namespace sbc
