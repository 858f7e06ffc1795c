#include "omake/ontology.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "omake/errors.hpp"
#include "omake/tensor.hpp"

namespace omake::ontology {

std::string OntologyTree::normalize_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool in_space = true; // leading whitespace is dropped
    for (char ch : name) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    return out;
}

OntologyTree OntologyTree::parse(std::string_view text) {
    struct Edge {
        std::string child, parent;
        std::size_t line;
    };
    std::vector<Edge> edges;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                                              : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        // strip comments and trailing CR
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (blank) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw ParseError("ontology: line " + std::to_string(line_no) +
                             ": expected 'child<TAB>parent'");
        }
        Edge e{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1)), line_no};
        if (normalize_name(e.child).empty() || normalize_name(e.parent).empty()) {
            throw ParseError("ontology: line " + std::to_string(line_no) + ": empty name");
        }
        edges.push_back(std::move(e));
    }
    if (edges.empty()) throw ParseError("ontology: no edges found");

    OntologyTree tree;
    auto intern = [&tree](const std::string& display) -> std::size_t {
        const std::string key = normalize_name(display);
        auto it = tree.index_.find(key);
        if (it != tree.index_.end()) return it->second;
        const std::size_t id = tree.display_.size();
        tree.display_.push_back(display);
        tree.parent_.push_back(id); // provisional self-loop, fixed by edges
        tree.index_.emplace(key, id);
        return id;
    };

    bool root_seen = false;
    std::vector<bool> has_parent; // indexed lazily below
    std::vector<std::size_t> defining_line;
    auto grow = [&](std::size_t id) {
        if (has_parent.size() <= id) {
            has_parent.resize(id + 1, false);
            defining_line.resize(id + 1, 0);
        }
    };

    for (const Edge& e : edges) {
        const std::size_t child = intern(e.child);
        const std::size_t parent = intern(e.parent);
        grow(std::max(child, parent));
        if (child == parent) {
            if (root_seen && tree.root_ != child) {
                throw ParseError("ontology: line " + std::to_string(e.line) +
                                 ": second root '" + e.child + "'");
            }
            root_seen = true;
            tree.root_ = child;
            has_parent[child] = true;
            defining_line[child] = e.line;
            continue;
        }
        if (has_parent[child] && tree.parent_[child] != parent) {
            throw ParseError("ontology: line " + std::to_string(e.line) + ": child '" + e.child +
                             "' already has a different parent (line " +
                             std::to_string(defining_line[child]) + ")");
        }
        tree.parent_[child] = parent;
        has_parent[child] = true;
        defining_line[child] = e.line;
    }
    if (!root_seen) throw ParseError("ontology: no root line 'name<TAB>name' found");

    grow(tree.display_.size() - 1);
    for (std::size_t id = 0; id < tree.display_.size(); ++id) {
        if (!has_parent[id]) {
            throw ParseError("ontology: '" + tree.display_[id] +
                             "' is referenced as a parent but never defined (orphan subtree)");
        }
    }

    // depth + cycle detection by walking to the root
    tree.depth_.assign(tree.display_.size(), 0);
    for (std::size_t id = 0; id < tree.display_.size(); ++id) {
        std::size_t cur = id;
        std::size_t hops = 0;
        while (cur != tree.root_) {
            cur = tree.parent_[cur];
            if (++hops > tree.display_.size()) {
                throw ParseError("ontology: cycle detected involving '" + tree.display_[id] +
                                 "' (line " + std::to_string(defining_line[id]) + ")");
            }
        }
        tree.depth_[id] = hops + 1;
    }
    return tree;
}

OntologyTree OntologyTree::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("ontology: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse(buf.str());
}

std::string OntologyTree::to_text() const {
    std::ostringstream os;
    for (std::size_t id = 0; id < display_.size(); ++id) {
        os << display_[id] << '\t' << display_[parent_[id]] << '\n';
    }
    return os.str();
}

bool OntologyTree::contains(std::string_view name) const {
    return index_.count(normalize_name(name)) > 0;
}

std::size_t OntologyTree::id_of(std::string_view name) const {
    auto it = index_.find(normalize_name(name));
    if (it == index_.end()) {
        throw LookupError("ontology: unknown disease '" + std::string(name) + "'");
    }
    return it->second;
}

std::size_t OntologyTree::depth(std::string_view name) const { return depth_[id_of(name)]; }

std::vector<std::string> OntologyTree::path_to_root(std::string_view name) const {
    std::size_t id = id_of(name);
    std::vector<std::string> path;
    path.reserve(depth_[id]);
    while (true) {
        path.push_back(display_[id]);
        if (id == root_) break;
        id = parent_[id];
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<std::string> OntologyTree::leaves() const {
    std::vector<bool> is_parent(display_.size(), false);
    for (std::size_t id = 0; id < display_.size(); ++id) {
        if (id != parent_[id] || id == root_) is_parent[parent_[id]] = true;
    }
    is_parent[root_] = true;
    std::vector<std::string> out;
    for (std::size_t id = 0; id < display_.size(); ++id) {
        if (!is_parent[id]) out.push_back(display_[id]);
    }
    return out;
}

double path_similarity(const OntologyTree& tree, std::string_view a, std::string_view b,
                       PathConvention convention) {
    const std::string ka = OntologyTree::normalize_name(a);
    const std::string kb = OntologyTree::normalize_name(b);
    if (!tree.contains(ka)) throw LookupError("ontology: unknown disease '" + std::string(a) + "'");
    if (!tree.contains(kb)) throw LookupError("ontology: unknown disease '" + std::string(b) + "'");
    if (ka == kb) return 1.0;

    const std::vector<std::string> pa = tree.path_to_root(ka);
    const std::vector<std::string> pb = tree.path_to_root(kb);
    std::size_t shared = 0;
    while (shared < pa.size() && shared < pb.size() &&
           OntologyTree::normalize_name(pa[shared]) == OntologyTree::normalize_name(pb[shared])) {
        ++shared;
    }
    std::size_t len_a = pa.size();
    std::size_t len_b = pb.size();
    if (!convention.root_counts) {
        // edge counting: drop the root from the shared prefix and both paths
        shared -= 1;
        len_a -= 1;
        len_b -= 1;
        if (len_a + len_b == 0) return 1.0;
    }
    return 2.0 * static_cast<double>(shared) / static_cast<double>(len_a + len_b);
}

SimilarityMatrix batch_similarity(const OntologyTree& tree, std::span<const std::string> labels,
                                  PathConvention convention) {
    const std::size_t b = labels.size();
    SimilarityMatrix s{b, std::vector<double>(b * b, 0.0)};
    for (std::size_t i = 0; i < b; ++i) {
        s.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < b; ++j) {
            double v = 0.0;
            try {
                v = path_similarity(tree, labels[i], labels[j], convention);
            } catch (const LookupError& e) {
                throw LookupError(std::string(e.what()) + " (batch samples " + std::to_string(i) +
                                  ", " + std::to_string(j) + ")");
            }
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
        if (!tree.contains(labels[i])) {
            throw LookupError("ontology: unknown disease '" + labels[i] + "' (batch sample " +
                              std::to_string(i) + ")");
        }
    }
    return s;
}

SoftLabelMatrix soft_labels(const SimilarityMatrix& similarity, double beta, double tau_s) {
    if (beta < 0.0 || beta > 1.0) {
        throw ParameterError("soft_labels: beta must be in [0,1], got " + std::to_string(beta));
    }
    if (tau_s <= 0.0) {
        throw ParameterError("soft_labels: tau_s must be > 0, got " + std::to_string(tau_s));
    }
    const std::size_t b = similarity.size;
    SoftLabelMatrix out{b, similarity.entries, beta, tau_s};
    numerics::softmax_rows_inplace(out.entries, b, tau_s);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double onehot = (i == j) ? 1.0 : 0.0;
            out.entries[i * b + j] = (1.0 - beta) * onehot + beta * out.entries[i * b + j];
        }
    }
    return out;
}

} // namespace omake::ontology
