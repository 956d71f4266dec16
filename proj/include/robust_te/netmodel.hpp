#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace robust_te {

using NodeIndex = std::size_t;
using LinkIndex = std::size_t;

struct Link {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  double capacity = 0.0;
  double weight = 1.0;
};

struct LinkSpec {
  std::string src;
  std::string dst;
  double capacity = 0.0;
  std::optional<double> weight;  // defaults to 1
};

struct TopologySpec {
  std::vector<std::string> nodes;  // may be empty: nodes are then the link endpoints
  std::vector<LinkSpec> links;
};

// Directed capacitated graph. Nodes are sorted by name and links by
// (src, dst) node index, so indices are deterministic for a given input.
class Topology {
 public:
  Topology() = default;

  std::size_t num_nodes() const { return names_.size(); }
  std::size_t num_links() const { return links_.size(); }

  const std::string& node_name(NodeIndex n) const { return names_.at(n); }
  const std::vector<std::string>& node_names() const { return names_; }
  std::optional<NodeIndex> find_node(std::string_view name) const;
  NodeIndex node(std::string_view name) const;  // throws DataError

  const Link& link(LinkIndex l) const { return links_.at(l); }
  const std::vector<Link>& links() const { return links_; }
  std::optional<LinkIndex> find_link(NodeIndex src, NodeIndex dst) const;
  std::span<const LinkIndex> out_links(NodeIndex n) const { return out_.at(n); }

  std::string link_label(LinkIndex l) const;

  // Copy with a new capacity vector (same link order).
  Topology with_capacities(std::span<const double> capacities) const;

  friend Topology build_topology(const TopologySpec& spec);

 private:
  std::vector<std::string> names_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkIndex>> out_;
};

Topology build_topology(const TopologySpec& spec);

// Text format: header `nodes N links M`, then M lines `src dst capacity [weight]`.
// Blank lines and `#` comments are ignored.
Topology read_topology(std::istream& in);
Topology read_topology_file(const std::string& path);
void write_topology(const Topology& topo, std::ostream& out);

struct FlowPair {
  NodeIndex src = 0;
  NodeIndex dst = 0;
  auto operator<=>(const FlowPair&) const = default;
};

using PathId = std::uint64_t;

std::string format_path_id(PathId id);

struct Path {
  FlowPair pair;
  std::vector<LinkIndex> links;
  std::vector<NodeIndex> nodes;  // src ... dst
  double weight = 0.0;
  PathId id = 0;

  bool uses_link(LinkIndex l) const;
};

// FNV-1a over the link endpoint names; independent of index assignment.
PathId path_id(const Topology& topo, std::span<const LinkIndex> links);
Path make_path(const Topology& topo, FlowPair pair, std::vector<LinkIndex> links);
// Checks contiguity, loop freedom and endpoints. Throws DataError.
void validate_path(const Topology& topo, const Path& path);
std::string describe_path(const Topology& topo, const Path& path);

// Up to k loop-free paths ordered by (total weight, node-index sequence).
// Throws DataError when the pair is disconnected.
std::vector<Path> k_shortest_paths(const Topology& topo, FlowPair pair, std::size_t k);
Path shortest_path(const Topology& topo, FlowPair pair);

// Global path numbering: flat index f <-> (pair index, position in the pair's list).
struct PathRef {
  std::size_t pair = 0;
  std::size_t rank = 0;
};

class CandidatePathSet {
 public:
  CandidatePathSet() = default;
  CandidatePathSet(std::vector<FlowPair> pairs, std::vector<std::vector<Path>> paths,
                   std::size_t k, std::string method);

  std::size_t num_pairs() const { return pairs_.size(); }
  std::size_t num_paths() const { return refs_.size(); }
  const std::vector<FlowPair>& pairs() const { return pairs_; }
  const FlowPair& pair(std::size_t p) const { return pairs_.at(p); }
  std::span<const Path> paths_of(std::size_t pair_index) const { return paths_.at(pair_index); }

  const Path& path(std::size_t flat) const;
  const PathRef& ref(std::size_t flat) const { return refs_.at(flat); }
  std::size_t flat_index(std::size_t pair_index, std::size_t rank) const {
    return offsets_.at(pair_index) + rank;
  }
  std::size_t first_of(std::size_t pair_index) const { return offsets_.at(pair_index); }
  std::size_t end_of(std::size_t pair_index) const { return offsets_.at(pair_index + 1); }
  std::optional<std::size_t> find(PathId id) const;

  std::size_t k() const { return k_; }
  const std::string& method() const { return method_; }

 private:
  std::vector<FlowPair> pairs_;
  std::vector<std::vector<Path>> paths_;
  std::vector<PathRef> refs_;
  std::vector<std::size_t> offsets_;
  std::size_t k_ = 0;
  std::string method_;
};

CandidatePathSet build_candidate_paths(const Topology& topo, std::span<const FlowPair> pairs,
                                       std::size_t k);

// A subset of candidate paths, stored as sorted flat indices.
class PathSubset {
 public:
  PathSubset() = default;
  explicit PathSubset(std::vector<std::size_t> flat_indices);
  static PathSubset all(const CandidatePathSet& cps);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t flat) const;
  bool covers(const CandidatePathSet& cps, std::size_t pair_index) const;
  void insert(std::size_t flat);
  std::vector<PathId> ids(const CandidatePathSet& cps) const;

  bool operator==(const PathSubset&) const = default;

 private:
  std::vector<std::size_t> indices_;
};

}  // namespace robust_te
