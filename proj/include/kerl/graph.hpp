#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kerl/tensor.hpp"

// Category-attribute knowledge graph: C category nodes, A attribute nodes,
// weighted category->attribute edges given by a confidence matrix S. Node
// indices [0,C) are categories, [C,C+A) attributes. Graphs are immutable
// after construction.

namespace kerl::graph {

struct NodeRegistry {
    std::vector<std::string> categories;
    std::vector<std::string> attributes;  // "part::value" naming, e.g. "throat::buff"

    std::size_t num_categories() const { return categories.size(); }
    std::size_t num_attributes() const { return attributes.size(); }
    std::size_t num_nodes() const { return categories.size() + attributes.size(); }
};

// C x A, entries in [0,1]
struct ConfidenceMatrix {
    Mat s;
};

struct KnowledgeGraph {
    NodeRegistry registry;
    ConfidenceMatrix confidence;

    std::size_t num_categories() const { return registry.num_categories(); }
    std::size_t num_attributes() const { return registry.num_attributes(); }
    std::size_t num_nodes() const { return registry.num_nodes(); }
    const Mat& s() const { return confidence.s; }
};

struct AdjacencyPair {
    Mat a_c;     // (C+A) x (C+A), top-right block holds S, zero elsewhere
    Mat a_full;  // (C+A) x 2(C+A) = [a_c | a_c^T]
};

struct BuildReport {
    std::vector<std::size_t> empty_categories;  // categories with zero instances
    double raw_min = 0.0;
    double raw_max = 0.0;
};

enum class NormMode { global, per_column };

struct Instance {
    std::size_t category;
    Vec attribute_scores;  // length A, finite, >= 0
};

// Linear map of the raw count matrix onto [0,1]. Degenerate case max==min:
// all 1 when positive, all 0 when zero. per_column applies the same rule to
// each attribute column independently.
ConfidenceMatrix normalize_scores(const Mat& raw, NormMode mode = NormMode::global);

KnowledgeGraph build_graph(const std::vector<Instance>& instances, NodeRegistry registry,
                           NormMode mode = NormMode::global, BuildReport* report = nullptr);

AdjacencyPair adjacency(const KnowledgeGraph& g);

// Text format: header with counts and node names, then S row-major at full
// decimal precision. Round-trips bit-exactly.
void save_graph(const KnowledgeGraph& g, const std::string& path);
void save_graph(const KnowledgeGraph& g, std::ostream& out);
KnowledgeGraph load_graph(const std::string& path);
// name appears in parse diagnostics in place of a file path
KnowledgeGraph load_graph(std::istream& in, const std::string& name);

void export_dot(const KnowledgeGraph& g, const std::string& path);

}  // namespace kerl::graph
