#include "sbc/causal_graph.hpp"

#include "sbc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace sbc {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string join(const NodeSet& set) {
    std::string out;
    for (const auto& s : set) {
        if (!out.empty()) out += ",";
        out += s;
    }
    return out;
}

}  // namespace

Dag::Dag(std::vector<std::string> nodes, std::vector<Edge> edges, std::map<std::string, std::string> metadata)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), metadata_(std::move(metadata)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].empty()) throw StructuralError("empty node name");
        if (!index_.emplace(nodes_[i], i).second) throw StructuralError("duplicate node '" + nodes_[i] + "'");
    }
    parents_.assign(nodes_.size(), {});
    children_.assign(nodes_.size(), {});
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : edges_) {
        const auto p = index_.find(e.parent);
        const auto c = index_.find(e.child);
        if (p == index_.end()) throw StructuralError("edge endpoint '" + e.parent + "' is not a declared node");
        if (c == index_.end()) throw StructuralError("edge endpoint '" + e.child + "' is not a declared node");
        if (p->second == c->second) throw StructuralError("self loop on '" + e.parent + "'");
        if (!seen.emplace(p->second, c->second).second)
            throw StructuralError("duplicate edge " + e.parent + " -> " + e.child);
        parents_[c->second].push_back(p->second);
        children_[p->second].push_back(c->second);
    }

    // Kahn's algorithm; lowest index first keeps the order stable.
    std::vector<std::size_t> indegree(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) indegree[i] = parents_[i].size();
    std::set<std::size_t> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (indegree[i] == 0) ready.insert(i);
    while (!ready.empty()) {
        const auto n = *ready.begin();
        ready.erase(ready.begin());
        topo_.push_back(n);
        for (auto c : children_[n])
            if (--indegree[c] == 0) ready.insert(c);
    }
    if (topo_.size() != nodes_.size()) {
        std::string cyclic;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (indegree[i] > 0) cyclic += (cyclic.empty() ? "" : ",") + nodes_[i];
        throw StructuralError("graph has a cycle through {" + cyclic + "}");
    }
}

bool Dag::has_edge(const std::string& parent, const std::string& child) const {
    const auto p = index_.find(parent);
    const auto c = index_.find(child);
    if (p == index_.end() || c == index_.end()) return false;
    const auto& ch = children_[p->second];
    return std::find(ch.begin(), ch.end(), c->second) != ch.end();
}

std::size_t Dag::index_of(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw IdentificationError("unknown node '" + name + "'");
    return it->second;
}

NodeSet Dag::parents(const std::string& name) const {
    NodeSet out;
    for (auto p : parents_[index_of(name)]) out.insert(nodes_[p]);
    return out;
}

NodeSet Dag::children(const std::string& name) const {
    NodeSet out;
    for (auto c : children_[index_of(name)]) out.insert(nodes_[c]);
    return out;
}

NodeSet Dag::descendants(const std::string& name) const {
    NodeSet out;
    std::vector<std::size_t> stack{index_of(name)};
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        for (auto c : children_[n])
            if (out.insert(nodes_[c]).second) stack.push_back(c);
    }
    return out;
}

NodeSet Dag::ancestors(const std::string& name) const {
    NodeSet out;
    std::vector<std::size_t> stack{index_of(name)};
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        for (auto p : parents_[n])
            if (out.insert(nodes_[p]).second) stack.push_back(p);
    }
    return out;
}

Dag Dag::without_edges(const std::vector<std::pair<std::string, std::string>>& drop) const {
    std::vector<Edge> kept;
    for (const auto& e : edges_) {
        const bool dropped = std::any_of(drop.begin(), drop.end(),
                                         [&](const auto& d) { return d.first == e.parent && d.second == e.child; });
        if (!dropped) kept.push_back(e);
    }
    return Dag(nodes_, std::move(kept), metadata_);
}

Dag Dag::without_outgoing(const std::string& node) const {
    index_of(node);
    std::vector<Edge> kept;
    for (const auto& e : edges_)
        if (e.parent != node) kept.push_back(e);
    return Dag(nodes_, std::move(kept), metadata_);
}

Dag Dag::with_edges(const std::vector<Edge>& extra) const {
    auto all = edges_;
    all.insert(all.end(), extra.begin(), extra.end());
    return Dag(nodes_, std::move(all), metadata_);
}

bool operator==(const Dag& a, const Dag& b) {
    if (NodeSet(a.nodes_.begin(), a.nodes_.end()) != NodeSet(b.nodes_.begin(), b.nodes_.end())) return false;
    std::set<std::pair<std::string, std::string>> ea, eb;
    for (const auto& e : a.edges_) ea.emplace(e.parent, e.child);
    for (const auto& e : b.edges_) eb.emplace(e.parent, e.child);
    return ea == eb;
}

// ---------------------------------------------------------------------------
// d-separation
// ---------------------------------------------------------------------------

bool is_d_separated(const Dag& dag, const std::string& x, const std::string& y, const NodeSet& z) {
    const auto xi = dag.index_of(x);
    const auto yi = dag.index_of(y);
    if (xi == yi) throw IdentificationError("d-separation query needs two distinct nodes, got '" + x + "' twice");
    std::vector<char> in_z(dag.size(), 0);
    for (const auto& name : z) in_z[dag.index_of(name)] = 1;
    if (in_z[xi] || in_z[yi]) throw IdentificationError("conditioning set must not contain the queried nodes");

    // Phase 1: Z and its ancestors. A collider passes the ball only if it is in this set.
    std::vector<char> z_or_ancestor(dag.size(), 0);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < dag.size(); ++i)
        if (in_z[i]) {
            z_or_ancestor[i] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        for (auto p : dag.parents(n))
            if (!z_or_ancestor[p]) {
                z_or_ancestor[p] = 1;
                stack.push_back(p);
            }
    }

    // Phase 2: traverse (node, direction) pairs. `up` means the ball arrived from a child.
    enum Dir : int { up = 0, down = 1 };
    std::vector<std::array<char, 2>> visited(dag.size(), {0, 0});
    std::deque<std::pair<std::size_t, Dir>> queue{{xi, up}};
    while (!queue.empty()) {
        const auto [n, dir] = queue.front();
        queue.pop_front();
        if (visited[n][dir]) continue;
        visited[n][dir] = 1;
        if (!in_z[n] && n == yi) return false;
        if (dir == up) {
            if (in_z[n]) continue;
            for (auto p : dag.parents(n)) queue.emplace_back(p, up);
            for (auto c : dag.children(n)) queue.emplace_back(c, down);
        } else {
            if (!in_z[n])
                for (auto c : dag.children(n)) queue.emplace_back(c, down);
            if (z_or_ancestor[n])
                for (auto p : dag.parents(n)) queue.emplace_back(p, up);
        }
    }
    return true;
}

bool satisfies_backdoor(const Dag& dag, const std::string& treatment, const std::string& outcome, const NodeSet& z) {
    dag.index_of(treatment);
    dag.index_of(outcome);
    if (treatment == outcome) throw IdentificationError("treatment and outcome must differ");
    if (z.count(treatment) || z.count(outcome))
        throw IdentificationError("adjustment set must exclude treatment and outcome");
    const auto desc = dag.descendants(treatment);
    for (const auto& name : z) {
        dag.index_of(name);
        if (desc.count(name)) return false;
    }
    return is_d_separated(dag.without_outgoing(treatment), treatment, outcome, z);
}

// ---------------------------------------------------------------------------
// Built-in diagrams
// ---------------------------------------------------------------------------

namespace {

Dag make(std::vector<std::string> nodes, const std::vector<std::pair<std::string, std::string>>& edges,
         std::map<std::string, std::string> metadata = {}) {
    std::vector<Edge> es;
    for (const auto& [p, c] : edges) es.push_back({p, c, {}});
    return Dag(std::move(nodes), std::move(es), std::move(metadata));
}

Dag figure2() {
    return make({"consumer_demand", "V", "auction", "X", "organic_search", "eps0", "eps1", "Y"},
                {{"consumer_demand", "V"},
                 {"consumer_demand", "eps0"},
                 {"V", "auction"},
                 {"V", "X"},
                 {"V", "organic_search"},
                 {"auction", "X"},
                 {"organic_search", "eps1"},
                 {"X", "Y"},
                 {"eps0", "Y"},
                 {"eps1", "Y"}},
                {{"description", "simple scenario: search is the only paid channel, budget unconstrained"}});
}

Dag figure3() {
    return make({"consumer_demand", "V", "auction", "X1", "X2", "budget", "organic_search", "eps0", "eps1", "eps2", "Y"},
                {{"consumer_demand", "V"},
                 {"consumer_demand", "eps0"},
                 {"consumer_demand", "X2"},
                 {"X2", "V"},
                 {"X2", "eps2"},
                 {"X2", "budget"},
                 {"budget", "X1"},
                 {"V", "auction"},
                 {"V", "X1"},
                 {"V", "organic_search"},
                 {"auction", "X1"},
                 {"organic_search", "eps1"},
                 {"X1", "Y"},
                 {"eps0", "Y"},
                 {"eps1", "Y"},
                 {"eps2", "Y"}},
                {{"description", "non-search media X2 share a budget with search spend X1"},
                 {"budget", "remaining shared budget after non-search spend caps X1"}});
}

}  // namespace

std::map<std::string, Dag> builtin_diagrams() {
    std::map<std::string, Dag> catalog;
    catalog.emplace("figure1", make({"Q", "A", "O", "P", "Y"},
                                    {{"Q", "O"}, {"Q", "P"}, {"A", "P"}, {"O", "Y"}, {"P", "Y"}},
                                    {{"description", "query-level diagram: query, auction, organic, paid impression, sales"}}));
    catalog.emplace("figure2", figure2());
    const auto f3 = figure3();
    catalog.emplace("figure3", f3);
    auto f4 = f3.without_edges({{"budget", "X1"}});
    catalog.emplace("figure4", Dag(f4.nodes(), f4.edges(),
                                   {{"description", "as figure3 with search spend unconstrained by the shared budget"}}));

    std::vector<Edge> f6_edges = {
        {"queries", "organic_rank", {}},        {"queries", "ad_rank", {}},
        {"queries", "organic_clicks", {}},      {"queries", "paid_clicks", {}},
        {"bids", "ad_rank", {}},                {"bids", "ad_spend", {}},
        {"budget", "ad_rank", {}},              {"budget", "ad_spend", {}},
        {"ad_rank", "paid_clicks", {}},         {"organic_rank", "organic_clicks", {}},
        {"paid_clicks", "organic_clicks", "dashed:cannibalization"},
        {"paid_clicks", "ad_spend", {}},        {"paid_clicks", "sales", {}},
        {"organic_clicks", "sales", {}},
    };
    catalog.emplace("figure6",
                    Dag({"queries", "bids", "budget", "ad_rank", "organic_rank", "paid_clicks", "organic_clicks",
                         "ad_spend", "sales"},
                        std::move(f6_edges),
                        {{"description", "auction-level diagram"},
                         {"lagged_edge", "paid_clicks -> ad_rank (next period, omitted from the static graph)"},
                         {"loop_resolution", "paid_clicks -> organic_clicks"}}));
    return catalog;
}

Dag builtin_diagram(const std::string& key) {
    auto catalog = builtin_diagrams();
    const auto it = catalog.find(key);
    if (it == catalog.end()) {
        std::string valid;
        for (const auto& [name, dag] : catalog) valid += (valid.empty() ? "" : ", ") + name;
        throw IdentificationError("no built-in diagram named '" + key + "'; valid: " + valid);
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

Dag parse_edge_list(const std::string& text) {
    std::vector<std::string> nodes;
    std::set<std::string> known;
    std::vector<Edge> edges;
    auto declare = [&](const std::string& n) {
        if (known.insert(n).second) nodes.push_back(n);
    };
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto arrow = line.find("->");
        if (arrow == std::string::npos) {
            declare(line);
            continue;
        }
        const auto parent = trim(line.substr(0, arrow));
        auto rest = trim(line.substr(arrow + 2));
        std::string tag;
        if (const auto lb = rest.find('['); lb != std::string::npos) {
            const auto rb = rest.find(']', lb);
            if (rb == std::string::npos) throw StructuralError("line " + std::to_string(lineno) + ": unterminated tag");
            tag = trim(rest.substr(lb + 1, rb - lb - 1));
            rest = trim(rest.substr(0, lb));
        }
        if (parent.empty() || rest.empty())
            throw StructuralError("line " + std::to_string(lineno) + ": expected 'parent -> child'");
        declare(parent);
        declare(rest);
        edges.push_back({parent, rest, tag});
    }
    return Dag(std::move(nodes), std::move(edges));
}

std::string to_edge_list(const Dag& dag) {
    std::ostringstream out;
    for (const auto& [k, v] : dag.metadata()) out << "# " << k << ": " << v << "\n";
    std::set<std::string> in_edge;
    for (const auto& e : dag.edges()) {
        in_edge.insert(e.parent);
        in_edge.insert(e.child);
    }
    for (const auto& n : dag.nodes())
        if (!in_edge.count(n)) out << n << "\n";
    for (const auto& e : dag.edges()) {
        out << e.parent << " -> " << e.child;
        if (!e.tag.empty()) out << " [" << e.tag << "]";
        out << "\n";
    }
    return out.str();
}

Dag load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open graph file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_edge_list(buf.str());
}

void save_edge_list(const Dag& dag, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write graph file '" + path + "'");
    out << to_edge_list(dag);
}

Dag dag_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("invalid graph JSON: ") + e.what());
    }
    if (!j.contains("nodes") || !j.contains("edges")) throw StructuralError("graph JSON needs 'nodes' and 'edges'");
    std::vector<std::string> nodes = j.at("nodes").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
        if (e.is_array() && e.size() == 2) {
            edges.push_back({e[0].get<std::string>(), e[1].get<std::string>(), {}});
        } else if (e.is_object()) {
            edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(), e.value("tag", "")});
        } else {
            throw StructuralError("graph JSON edge must be [parent, child] or {from, to}");
        }
    }
    std::map<std::string, std::string> meta;
    if (j.contains("metadata")) meta = j.at("metadata").get<std::map<std::string, std::string>>();
    return Dag(std::move(nodes), std::move(edges), std::move(meta));
}

std::string dag_to_json(const Dag& dag) {
    nlohmann::json j;
    j["nodes"] = dag.nodes();
    j["edges"] = nlohmann::json::array();
    for (const auto& e : dag.edges()) {
        if (e.tag.empty())
            j["edges"].push_back({e.parent, e.child});
        else
            j["edges"].push_back({{"from", e.parent}, {"to", e.child}, {"tag", e.tag}});
    }
    if (!dag.metadata().empty()) j["metadata"] = dag.metadata();
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Discrete SCM
// ---------------------------------------------------------------------------

DiscreteScm::DiscreteScm(Dag dag, std::vector<std::size_t> cardinalities, std::vector<std::vector<double>> cpts)
    : dag_(std::move(dag)), card_(std::move(cardinalities)), cpts_(std::move(cpts)) {
    const auto n = dag_.size();
    if (card_.size() != n || cpts_.size() != n)
        throw ConfigError("need one cardinality and one CPT per node");
    for (std::size_t i = 0; i < n; ++i) {
        if (card_[i] == 0) throw ConfigError("node '" + dag_.nodes()[i] + "' has zero states");
        if (joint_size_ > max_joint_cells / card_[i])
            throw ConfigError("joint state space exceeds " + std::to_string(max_joint_cells) + " cells");
        joint_size_ *= card_[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t rows = 1;
        for (auto p : dag_.parents(i)) rows *= card_[p];
        const auto& cpt = cpts_[i];
        if (cpt.size() != rows * card_[i])
            throw ConfigError("CPT of '" + dag_.nodes()[i] + "' has " + std::to_string(cpt.size()) + " entries, expected " +
                              std::to_string(rows * card_[i]));
        for (std::size_t r = 0; r < rows; ++r) {
            double sum = 0.0;
            for (std::size_t s = 0; s < card_[i]; ++s) {
                const double p = cpt[r * card_[i] + s];
                if (!(p >= 0.0 && p <= 1.0))
                    throw ConfigError("CPT of '" + dag_.nodes()[i] + "' has a probability outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ConfigError("CPT row " + std::to_string(r) + " of '" + dag_.nodes()[i] + "' does not sum to 1");
        }
    }
}

std::size_t DiscreteScm::parent_row(std::size_t node, const std::vector<std::size_t>& states) const {
    std::size_t row = 0;
    for (auto p : dag_.parents(node)) row = row * card_[p] + states[p];
    return row;
}

double DiscreteScm::conditional(std::size_t node, const std::vector<std::size_t>& states) const {
    return cpts_[node][parent_row(node, states) * card_[node] + states[node]];
}

std::vector<std::size_t> DiscreteScm::decode(std::size_t flat) const {
    std::vector<std::size_t> states(card_.size());
    for (std::size_t i = card_.size(); i-- > 0;) {
        states[i] = flat % card_[i];
        flat /= card_[i];
    }
    return states;
}

std::vector<double> DiscreteScm::joint() const {
    std::vector<double> p(joint_size_);
    for (std::size_t f = 0; f < joint_size_; ++f) {
        const auto states = decode(f);
        double prob = 1.0;
        for (std::size_t i = 0; i < card_.size() && prob > 0.0; ++i) prob *= conditional(i, states);
        p[f] = prob;
    }
    return p;
}

std::vector<double> backdoor_adjust(const DiscreteScm& scm, const std::string& treatment, std::size_t treatment_value,
                                    const std::string& outcome, const NodeSet& z) {
    const auto& dag = scm.dag();
    const auto xi = dag.index_of(treatment);
    const auto yi = dag.index_of(outcome);
    if (!satisfies_backdoor(dag, treatment, outcome, z))
        throw IdentificationError("{" + join(z) + "} does not satisfy the back-door criterion for (" + treatment + ", " +
                                  outcome + ")");
    const auto& card = scm.cardinalities();
    if (treatment_value >= card[xi]) throw IdentificationError("treatment value out of range for '" + treatment + "'");

    std::vector<std::size_t> zi;
    std::size_t z_cells = 1;
    for (const auto& name : z) {
        zi.push_back(dag.index_of(name));
        z_cells *= card[zi.back()];
    }
    const auto ny = card[yi];
    std::vector<double> pz(z_cells, 0.0), pxz(z_cells, 0.0), pyxz(z_cells * ny, 0.0);

    const auto joint = scm.joint();
    for (std::size_t f = 0; f < joint.size(); ++f) {
        if (joint[f] == 0.0) continue;
        const auto states = scm.decode(f);
        std::size_t zc = 0;
        for (auto i : zi) zc = zc * card[i] + states[i];
        pz[zc] += joint[f];
        if (states[xi] == treatment_value) {
            pxz[zc] += joint[f];
            pyxz[zc * ny + states[yi]] += joint[f];
        }
    }

    std::vector<double> result(ny, 0.0);
    for (std::size_t zc = 0; zc < z_cells; ++zc) {
        if (pz[zc] == 0.0) continue;
        if (pxz[zc] == 0.0) {
            std::string cell;
            auto rem = zc;
            std::vector<std::size_t> zs(zi.size());
            for (std::size_t k = zi.size(); k-- > 0;) {
                zs[k] = rem % card[zi[k]];
                rem /= card[zi[k]];
            }
            for (std::size_t k = 0; k < zi.size(); ++k)
                cell += (k ? "," : "") + dag.nodes()[zi[k]] + "=" + std::to_string(zs[k]);
            throw DegenerateSupportError("Pr(" + treatment + "=" + std::to_string(treatment_value) + ", " +
                                         (cell.empty() ? std::string("{}") : cell) +
                                         ") is zero while Pr(z) is positive; cell {" + cell + "}");
        }
        for (std::size_t y = 0; y < ny; ++y) result[y] += pyxz[zc * ny + y] / pxz[zc] * pz[zc];
    }
    return result;
}

}  // namespace sbc
