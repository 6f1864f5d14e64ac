#pragma once

#include "pptree/laws.hpp"
#include "pptree/rng.hpp"

#include <cstdint>
#include <ranges>
#include <string_view>
#include <vector>

namespace pptree {

using NodeId = std::uint32_t;

inline constexpr NodeId kRootNode = 0;
inline constexpr NodeId kNoParent = static_cast<NodeId>(-1);

struct TreeCaps
{
    std::uint64_t max_nodes = 10'000'000;
    std::uint32_t max_generation = 10'000;
};

enum class CapHit : std::uint8_t { None = 0, Nodes = 1, Generation = 2 };

std::string_view to_string(CapHit c) noexcept;

/// Lazily expanded rooted tree. Offspring counts are drawn from the node's own
/// lane of the replicate stream at expansion time, so the realization does not
/// depend on the order in which nodes are expanded.
class TreeStore
{
public:
    struct Node
    {
        NodeKey key = kRootKey;
        NodeId parent = kNoParent;
        std::uint32_t generation = 0;
        NodeId first_child = 0;
        std::uint32_t child_count = 0;
        bool expanded = false;
    };

    using ChildRange = std::ranges::iota_view<NodeId, NodeId>;

    TreeStore(OffspringLaw law, TreeCaps caps, const RngStream& stream);

    /// Children of `node`, materializing them on first call. Returns an empty
    /// range and records a cap hit when expansion would exceed a cap; the node
    /// then stays unexpanded.
    ChildRange children(NodeId node);

    /// Materializes the path given by child indices from the root. Throws
    /// std::out_of_range if an index exceeds the drawn offspring count.
    NodeId node_at(const std::vector<std::uint32_t>& label);

    const Node& node(NodeId id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::uint32_t generation(NodeId id) const { return nodes_.at(id).generation; }
    NodeId parent(NodeId id) const { return nodes_.at(id).parent; }
    NodeKey key(NodeId id) const { return nodes_.at(id).key; }

    bool censored() const noexcept { return cap_hit_ != CapHit::None; }
    CapHit cap_hit() const noexcept { return cap_hit_; }
    const TreeCaps& caps() const noexcept { return caps_; }
    const OffspringLaw& law() const noexcept { return law_; }
    const RngStream& stream() const noexcept { return *stream_; }

private:
    void record_cap(CapHit hit) noexcept
    {
        if (cap_hit_ == CapHit::None || hit == CapHit::Nodes)
            cap_hit_ = hit;
    }

    OffspringLaw law_;
    TreeCaps caps_;
    const RngStream* stream_;
    std::vector<Node> nodes_;
    CapHit cap_hit_ = CapHit::None;
};

TreeStore new_tree(OffspringLaw law, TreeCaps caps, const RngStream& stream);

/// Initially infected set A (node ids of one TreeStore) and the delay x.
struct InitialSet
{
    std::vector<NodeId> nodes;
    double delay = 0.0;
};

enum class InitialSetStatus { Ok, Disconnected, MissingRoot };

std::string_view to_string(InitialSetStatus s) noexcept;

/// A must contain the root and be connected (every member's parent is a member).
InitialSetStatus validate_initial_set(const TreeStore& tree, const InitialSet& a);

} // namespace pptree
