#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace omake::ontology {

// Path accounting convention. With root_counts=true a path is the node list
// from the root down (so |path| == depth and the shared root keeps every
// pair's similarity above zero); with root_counts=false the root is excluded,
// which is equivalent to counting edges instead of nodes.
struct PathConvention {
    bool root_counts = true;
};

// Rooted disease taxonomy. Immutable after parse; names are matched after
// trimming, whitespace collapsing and lowercasing.
class OntologyTree {
public:
    // One edge per line, "child<TAB>parent". The root is declared by a line
    // mapping a name to itself. '#' starts a comment line.
    static OntologyTree parse(std::string_view text);
    static OntologyTree parse_file(const std::filesystem::path& path);
    std::string to_text() const;

    static std::string normalize_name(std::string_view name);

    bool contains(std::string_view name) const;
    std::size_t node_count() const { return display_.size(); }
    const std::string& root_name() const { return display_[root_]; }

    // Node depth, root has depth 1.
    std::size_t depth(std::string_view name) const;
    // Display names from the root down to `name` inclusive.
    std::vector<std::string> path_to_root(std::string_view name) const;
    // All node display names in parse order.
    std::vector<std::string> nodes() const { return display_; }
    // Nodes without children, in parse order.
    std::vector<std::string> leaves() const;

private:
    std::size_t id_of(std::string_view name) const; // throws LookupError

    std::vector<std::string> display_;            // id -> display name
    std::vector<std::size_t> parent_;             // id -> parent id (root maps to itself)
    std::vector<std::size_t> depth_;              // id -> depth, root = 1
    std::unordered_map<std::string, std::size_t> index_; // normalized name -> id
    std::size_t root_ = 0;
};

struct SimilarityMatrix {
    std::size_t size = 0;
    std::vector<double> entries; // row-major size x size

    double at(std::size_t i, std::size_t j) const { return entries[i * size + j]; }
    double& at(std::size_t i, std::size_t j) { return entries[i * size + j]; }
};

struct SoftLabelMatrix {
    std::size_t size = 0;
    std::vector<double> entries;
    double beta = 0.0;
    double tau_s = 0.0;

    double at(std::size_t i, std::size_t j) const { return entries[i * size + j]; }
    // Row i as a span, usable directly as a supervision distribution.
    std::span<const double> row(std::size_t i) const {
        return {entries.data() + i * size, size};
    }
};

// 2*|shared root-first prefix| / (|path_i| + |path_j|). Identical nodes give
// exactly 1 under either convention.
double path_similarity(const OntologyTree& tree, std::string_view a, std::string_view b,
                       PathConvention convention = {});

SimilarityMatrix batch_similarity(const OntologyTree& tree,
                                  std::span<const std::string> labels,
                                  PathConvention convention = {});

// (1-beta) * onehot + beta * softmax(S / tau_s) per row. The one-hot keys on
// batch index, not label equality.
SoftLabelMatrix soft_labels(const SimilarityMatrix& similarity, double beta, double tau_s);

} // namespace omake::ontology
