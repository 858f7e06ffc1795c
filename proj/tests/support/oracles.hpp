#pragma once

// Test-only oracles. Everything here is written against plain doubles with
// its own log-sum-exp / enumeration logic, independent of the graph ops it
// is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "omake/rng.hpp"

namespace oracles {

inline double logsumexp(const std::vector<double>& xs) {
    double mx = xs[0];
    for (double x : xs) mx = std::max(mx, x);
    double s = 0.0;
    for (double x : xs) s += std::exp(x - mx);
    return mx + std::log(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// -sum_j soft_j * log softmax_j(anchor . target_j / tau)
inline double reference_soft_ce(const std::vector<double>& anchor,
                                const std::vector<std::vector<double>>& targets,
                                const std::vector<double>& soft, double tau) {
    std::vector<double> logits(targets.size());
    for (std::size_t j = 0; j < targets.size(); ++j) logits[j] = dot(anchor, targets[j]) / tau;
    const double lse = logsumexp(logits);
    double loss = 0.0;
    for (std::size_t j = 0; j < targets.size(); ++j) loss -= soft[j] * (logits[j] - lse);
    return loss;
}

// Symmetric InfoNCE (the plain CLIP objective) over row-major embeddings.
inline double reference_clip_loss(const std::vector<std::vector<double>>& images,
                                  const std::vector<std::vector<double>>& texts, double tau) {
    const std::size_t b = images.size();
    double i2t = 0.0, t2i = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        std::vector<double> row(b), col(b);
        for (std::size_t j = 0; j < b; ++j) {
            row[j] = dot(images[i], texts[j]) / tau;
            col[j] = dot(texts[i], images[j]) / tau;
        }
        i2t -= row[i] - logsumexp(row);
        t2i -= col[i] - logsumexp(col);
    }
    return 0.5 * (i2t / static_cast<double>(b) + t2i / static_cast<double>(b));
}

// Random tree as an explicit parent map: node 0 is the root, every other
// node's parent has a smaller index.
struct RandomTree {
    std::vector<std::string> names;
    std::vector<std::size_t> parent;

    std::string tsv() const {
        std::string out = names[0] + "\t" + names[0] + "\n";
        for (std::size_t i = 1; i < names.size(); ++i) {
            out += names[i] + "\t" + names[parent[i]] + "\n";
        }
        return out;
    }
};

inline RandomTree random_tree(omake::numerics::Rng& rng, std::size_t nodes) {
    RandomTree t;
    t.names.resize(nodes);
    t.parent.resize(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        t.names[i] = "node" + std::to_string(i);
        t.parent[i] = i == 0 ? 0 : static_cast<std::size_t>(rng.below(i));
    }
    return t;
}

// Brute-force Wu-Palmer-style similarity by full path enumeration.
inline double brute_force_similarity(const RandomTree& t, std::size_t a, std::size_t b,
                                     bool root_counts = true) {
    auto path_of = [&](std::size_t n) {
        std::vector<std::size_t> p;
        while (true) {
            p.push_back(n);
            if (n == 0) break;
            n = t.parent[n];
        }
        std::reverse(p.begin(), p.end());
        return p;
    };
    if (a == b) return 1.0;
    const std::vector<std::size_t> pa = path_of(a);
    const std::vector<std::size_t> pb = path_of(b);
    std::size_t shared = 0;
    while (shared < pa.size() && shared < pb.size() && pa[shared] == pb[shared]) ++shared;
    std::size_t la = pa.size(), lb = pb.size();
    if (!root_counts) {
        shared -= 1;
        la -= 1;
        lb -= 1;
        if (la + lb == 0) return 1.0;
    }
    return 2.0 * static_cast<double>(shared) / static_cast<double>(la + lb);
}

inline std::vector<double> random_unit_vector(omake::numerics::Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

} // namespace oracles
