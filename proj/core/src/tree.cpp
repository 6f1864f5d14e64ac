#include "pptree/tree.hpp"

#include "pptree/point_process.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace pptree {

std::string_view to_string(CapHit c) noexcept
{
    switch (c) {
    case CapHit::None:
        return "none";
    case CapHit::Nodes:
        return "nodes";
    case CapHit::Generation:
        return "generation";
    }
    return "?";
}

TreeStore::TreeStore(OffspringLaw law, TreeCaps caps, const RngStream& stream)
    : law_(std::move(law)),
      caps_(caps),
      stream_(&stream)
{
    if (caps_.max_nodes == 0)
        throw std::invalid_argument("max_nodes must be positive");
    nodes_.reserve(std::min<std::uint64_t>(caps_.max_nodes, 1024));
    nodes_.push_back(Node{});
}

TreeStore::ChildRange TreeStore::children(NodeId id)
{
    Node& n = nodes_.at(id);
    if (n.expanded)
        return {n.first_child, n.first_child + n.child_count};

    const std::uint32_t count = law_.sample(stream_->uniform_at(n.key, kOffspringSlot));
    if (count == 0) {
        n.expanded = true;
        n.first_child = static_cast<NodeId>(nodes_.size());
        return {n.first_child, n.first_child};
    }
    if (n.generation >= caps_.max_generation) {
        record_cap(CapHit::Generation);
        return {};
    }
    if (nodes_.size() + count > caps_.max_nodes) {
        record_cap(CapHit::Nodes);
        return {};
    }

    const auto first = static_cast<NodeId>(nodes_.size());
    const NodeKey key = n.key;
    const std::uint32_t generation = n.generation + 1;
    n.expanded = true;
    n.first_child = first;
    n.child_count = count;
    // `n` may dangle after the pushes below.
    for (std::uint32_t i = 0; i < count; ++i)
        nodes_.push_back(Node{child_key(key, i), id, generation, 0, 0, false});
    return {first, first + count};
}

NodeId TreeStore::node_at(const std::vector<std::uint32_t>& label)
{
    NodeId cur = kRootNode;
    for (const std::uint32_t index : label) {
        const auto kids = children(cur);
        if (index >= kids.size())
            throw std::out_of_range("label leaves the tree: child index beyond offspring count or caps");
        cur = kids[index];
    }
    return cur;
}

TreeStore new_tree(OffspringLaw law, TreeCaps caps, const RngStream& stream)
{
    return TreeStore(std::move(law), caps, stream);
}

std::string_view to_string(InitialSetStatus s) noexcept
{
    switch (s) {
    case InitialSetStatus::Ok:
        return "ok";
    case InitialSetStatus::Disconnected:
        return "Disconnected";
    case InitialSetStatus::MissingRoot:
        return "MissingRoot";
    }
    return "?";
}

InitialSetStatus validate_initial_set(const TreeStore& tree, const InitialSet& a)
{
    const std::unordered_set<NodeId> members(a.nodes.begin(), a.nodes.end());
    if (!members.contains(kRootNode))
        return InitialSetStatus::MissingRoot;
    for (const NodeId id : members) {
        if (id >= tree.size())
            throw std::out_of_range("initial set references a node that is not materialized");
        if (id != kRootNode && !members.contains(tree.parent(id)))
            return InitialSetStatus::Disconnected;
    }
    return InitialSetStatus::Ok;
}

} // namespace pptree
