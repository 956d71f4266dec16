#include "robust_te/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "robust_te/errors.hpp"

namespace robust_te {

std::optional<NodeIndex> Topology::find_node(std::string_view name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it == names_.end() || *it != name) return std::nullopt;
  return static_cast<NodeIndex>(it - names_.begin());
}

NodeIndex Topology::node(std::string_view name) const {
  auto n = find_node(name);
  if (!n) throw DataError("unknown node '" + std::string(name) + "'");
  return *n;
}

std::optional<LinkIndex> Topology::find_link(NodeIndex src, NodeIndex dst) const {
  for (LinkIndex l : out_.at(src)) {
    if (links_[l].dst == dst) return l;
  }
  return std::nullopt;
}

std::string Topology::link_label(LinkIndex l) const {
  const Link& lk = links_.at(l);
  return names_[lk.src] + "->" + names_[lk.dst];
}

Topology Topology::with_capacities(std::span<const double> capacities) const {
  if (capacities.size() != links_.size()) {
    throw DataError("capacity vector has wrong length");
  }
  Topology copy = *this;
  for (std::size_t l = 0; l < links_.size(); ++l) {
    if (!(capacities[l] > 0.0)) throw DataError("link capacity must be positive");
    copy.links_[l].capacity = capacities[l];
  }
  return copy;
}

Topology build_topology(const TopologySpec& spec) {
  std::set<std::string> names;
  for (const auto& n : spec.nodes) {
    if (n.empty()) throw DataError("empty node name");
    if (!names.insert(n).second) throw DataError("duplicate node '" + n + "'");
  }
  const bool declared = !spec.nodes.empty();
  for (const auto& l : spec.links) {
    for (const auto* end : {&l.src, &l.dst}) {
      if (declared && !names.contains(*end)) {
        throw DataError("link endpoint '" + *end + "' is not a declared node");
      }
      if (!declared) names.insert(*end);
    }
  }

  Topology topo;
  topo.names_.assign(names.begin(), names.end());
  topo.out_.resize(topo.names_.size());

  std::map<std::pair<NodeIndex, NodeIndex>, Link> sorted;
  for (const auto& l : spec.links) {
    const std::string label = l.src + "->" + l.dst;
    if (l.src == l.dst) throw DataError("self-loop link " + label);
    if (!(l.capacity > 0.0) || !std::isfinite(l.capacity)) {
      throw DataError("non-positive capacity on link " + label);
    }
    const double weight = l.weight.value_or(1.0);
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw DataError("non-positive weight on link " + label);
    }
    Link link{*topo.find_node(l.src), *topo.find_node(l.dst), l.capacity, weight};
    if (!sorted.emplace(std::pair{link.src, link.dst}, link).second) {
      throw DataError("duplicate link " + label);
    }
  }
  for (const auto& [key, link] : sorted) {
    topo.out_[link.src].push_back(topo.links_.size());
    topo.links_.push_back(link);
  }
  return topo;
}

namespace {

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace

Topology read_topology(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_content_line(in, line, line_no)) throw DataError("topology: empty input");

  std::istringstream header(line);
  std::string nodes_kw, links_kw;
  long long n_nodes = -1, n_links = -1;
  if (!(header >> nodes_kw >> n_nodes >> links_kw >> n_links) || nodes_kw != "nodes" ||
      links_kw != "links" || n_nodes < 0 || n_links < 0) {
    throw DataError("topology: expected header 'nodes N links M' at line " +
                    std::to_string(line_no));
  }

  TopologySpec spec;
  for (long long i = 0; i < n_links; ++i) {
    if (!next_content_line(in, line, line_no)) {
      throw DataError("topology: expected " + std::to_string(n_links) + " links, found " +
                      std::to_string(i));
    }
    std::istringstream row(line);
    LinkSpec link;
    if (!(row >> link.src >> link.dst >> link.capacity)) {
      throw DataError("topology: malformed link at line " + std::to_string(line_no));
    }
    double weight = 0.0;
    if (row >> weight) link.weight = weight;
    std::string extra;
    if (row >> extra) {
      throw DataError("topology: trailing field at line " + std::to_string(line_no));
    }
    spec.links.push_back(std::move(link));
  }
  if (next_content_line(in, line, line_no)) {
    throw DataError("topology: unexpected content at line " + std::to_string(line_no));
  }

  Topology topo = build_topology(spec);
  if (static_cast<long long>(topo.num_nodes()) != n_nodes) {
    throw DataError("topology: header declares " + std::to_string(n_nodes) +
                    " nodes but links reference " + std::to_string(topo.num_nodes()));
  }
  return topo;
}

Topology read_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open topology file " + path);
  return read_topology(in);
}

void write_topology(const Topology& topo, std::ostream& out) {
  out << "nodes " << topo.num_nodes() << " links " << topo.num_links() << "\n";
  out << std::setprecision(17);
  for (const auto& l : topo.links()) {
    out << topo.node_name(l.src) << ' ' << topo.node_name(l.dst) << ' ' << l.capacity << ' '
        << l.weight << "\n";
  }
}

std::string format_path_id(PathId id) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << id;
  return os.str();
}

bool Path::uses_link(LinkIndex l) const {
  return std::find(links.begin(), links.end(), l) != links.end();
}

PathId path_id(const Topology& topo, std::span<const LinkIndex> links) {
  constexpr std::uint64_t kOffset = 14695981039346656037ull;
  constexpr std::uint64_t kPrime = 1099511628211ull;
  std::uint64_t h = kOffset;
  auto mix = [&](std::string_view s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= kPrime;
    }
  };
  for (LinkIndex l : links) {
    const Link& lk = topo.link(l);
    mix(topo.node_name(lk.src));
    mix(">");
    mix(topo.node_name(lk.dst));
    mix("|");
  }
  return h;
}

Path make_path(const Topology& topo, FlowPair pair, std::vector<LinkIndex> links) {
  Path p;
  p.pair = pair;
  p.links = std::move(links);
  p.nodes.push_back(pair.src);
  for (LinkIndex l : p.links) {
    p.nodes.push_back(topo.link(l).dst);
    p.weight += topo.link(l).weight;
  }
  p.id = path_id(topo, p.links);
  validate_path(topo, p);
  return p;
}

void validate_path(const Topology& topo, const Path& path) {
  if (path.links.empty()) throw DataError("path has no links");
  if (path.nodes.size() != path.links.size() + 1) throw DataError("path node list mismatch");
  if (path.nodes.front() != path.pair.src || path.nodes.back() != path.pair.dst) {
    throw DataError("path endpoints do not match its flow pair");
  }
  for (std::size_t i = 0; i < path.links.size(); ++i) {
    const Link& l = topo.link(path.links[i]);
    if (l.src != path.nodes[i] || l.dst != path.nodes[i + 1]) {
      throw DataError("path is not contiguous");
    }
  }
  std::vector<NodeIndex> sorted = path.nodes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("path revisits a node");
  }
}

std::string describe_path(const Topology& topo, const Path& path) {
  std::string s;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    if (i) s += "->";
    s += topo.node_name(path.nodes[i]);
  }
  return s;
}

namespace {

// Shortest distance from every node to `dst` (reverse Dijkstra).
std::vector<double> distances_to(const Topology& topo, NodeIndex dst) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<LinkIndex>> in(topo.num_nodes());
  for (LinkIndex l = 0; l < topo.num_links(); ++l) in[topo.link(l).dst].push_back(l);

  std::vector<double> dist(topo.num_nodes(), inf);
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[dst] = 0.0;
  pq.emplace(0.0, dst);
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (LinkIndex l : in[v]) {
      const Link& lk = topo.link(l);
      const double nd = d + lk.weight;
      if (nd < dist[lk.src]) {
        dist[lk.src] = nd;
        pq.emplace(nd, lk.src);
      }
    }
  }
  return dist;
}

struct Partial {
  double priority = 0.0;  // cost so far + lower bound on remaining cost
  double cost = 0.0;
  std::vector<NodeIndex> nodes;
  std::vector<LinkIndex> links;
};

struct PartialAfter {
  bool operator()(const Partial& a, const Partial& b) const {
    if (a.priority != b.priority) return a.priority > b.priority;
    return a.nodes > b.nodes;
  }
};

}  // namespace

// Best-first search over simple partial paths keyed by (cost + remaining
// distance, node sequence). With a consistent lower bound, completed paths
// leave the queue in (weight, node sequence) order, so the first k popped
// are the k shortest loop-free paths under the lexicographic tie-break.
std::vector<Path> k_shortest_paths(const Topology& topo, FlowPair pair, std::size_t k) {
  if (pair.src >= topo.num_nodes() || pair.dst >= topo.num_nodes()) {
    throw DataError("flow pair endpoint outside topology");
  }
  if (pair.src == pair.dst) throw DataError("flow pair with identical endpoints");
  if (k == 0) throw DataError("k must be at least 1");

  const auto label = topo.node_name(pair.src) + "->" + topo.node_name(pair.dst);
  const std::vector<double> remaining = distances_to(topo, pair.dst);
  if (!std::isfinite(remaining[pair.src])) {
    throw DataError("no path exists for flow pair " + label);
  }
  // Slightly shrunk bound keeps a prefix strictly ahead of its completions.
  auto bound = [&](NodeIndex v) { return remaining[v] * (1.0 - 1e-12); };

  std::vector<Path> result;
  std::priority_queue<Partial, std::vector<Partial>, PartialAfter> pq;
  pq.push(Partial{bound(pair.src), 0.0, {pair.src}, {}});
  while (!pq.empty() && result.size() < k) {
    Partial cur = pq.top();
    pq.pop();
    const NodeIndex tail = cur.nodes.back();
    if (tail == pair.dst) {
      result.push_back(make_path(topo, pair, std::move(cur.links)));
      continue;
    }
    for (LinkIndex l : topo.out_links(tail)) {
      const Link& lk = topo.link(l);
      if (!std::isfinite(remaining[lk.dst])) continue;
      if (std::find(cur.nodes.begin(), cur.nodes.end(), lk.dst) != cur.nodes.end()) continue;
      Partial next;
      next.cost = cur.cost + lk.weight;
      next.priority = lk.dst == pair.dst ? next.cost : next.cost + bound(lk.dst);
      next.nodes = cur.nodes;
      next.nodes.push_back(lk.dst);
      next.links = cur.links;
      next.links.push_back(l);
      pq.push(std::move(next));
    }
  }
  return result;
}

Path shortest_path(const Topology& topo, FlowPair pair) {
  return std::move(k_shortest_paths(topo, pair, 1).front());
}

CandidatePathSet::CandidatePathSet(std::vector<FlowPair> pairs,
                                   std::vector<std::vector<Path>> paths, std::size_t k,
                                   std::string method)
    : pairs_(std::move(pairs)), paths_(std::move(paths)), k_(k), method_(std::move(method)) {
  if (pairs_.size() != paths_.size()) throw DataError("candidate set: pair/path count mismatch");
  offsets_.push_back(0);
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    if (paths_[p].empty()) throw DataError("candidate set: pair without paths");
    std::set<PathId> seen;
    for (std::size_t r = 0; r < paths_[p].size(); ++r) {
      if (paths_[p][r].pair != pairs_[p]) throw DataError("candidate set: path for wrong pair");
      if (!seen.insert(paths_[p][r].id).second) {
        throw DataError("candidate set: duplicate path id");
      }
      refs_.push_back(PathRef{p, r});
    }
    offsets_.push_back(refs_.size());
  }
}

const Path& CandidatePathSet::path(std::size_t flat) const {
  const PathRef& r = refs_.at(flat);
  return paths_[r.pair][r.rank];
}

std::optional<std::size_t> CandidatePathSet::find(PathId id) const {
  for (std::size_t f = 0; f < refs_.size(); ++f) {
    if (path(f).id == id) return f;
  }
  return std::nullopt;
}

CandidatePathSet build_candidate_paths(const Topology& topo, std::span<const FlowPair> pairs,
                                       std::size_t k) {
  std::vector<FlowPair> ordered(pairs.begin(), pairs.end());
  if (!std::is_sorted(ordered.begin(), ordered.end()) ||
      std::adjacent_find(ordered.begin(), ordered.end()) != ordered.end()) {
    throw DataError("flow pairs must be unique and sorted");
  }
  std::vector<std::vector<Path>> paths;
  paths.reserve(ordered.size());
  for (const FlowPair& p : ordered) paths.push_back(k_shortest_paths(topo, p, k));
  return CandidatePathSet(std::move(ordered), std::move(paths), k, "ksp");
}

PathSubset::PathSubset(std::vector<std::size_t> flat_indices) : indices_(std::move(flat_indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

PathSubset PathSubset::all(const CandidatePathSet& cps) {
  std::vector<std::size_t> idx(cps.num_paths());
  for (std::size_t f = 0; f < idx.size(); ++f) idx[f] = f;
  return PathSubset(std::move(idx));
}

bool PathSubset::contains(std::size_t flat) const {
  return std::binary_search(indices_.begin(), indices_.end(), flat);
}

bool PathSubset::covers(const CandidatePathSet& cps, std::size_t pair_index) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), cps.first_of(pair_index));
  return it != indices_.end() && *it < cps.end_of(pair_index);
}

void PathSubset::insert(std::size_t flat) {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), flat);
  if (it == indices_.end() || *it != flat) indices_.insert(it, flat);
}

std::vector<PathId> PathSubset::ids(const CandidatePathSet& cps) const {
  std::vector<PathId> out;
  out.reserve(indices_.size());
  for (std::size_t f : indices_) out.push_back(cps.path(f).id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace robust_te
