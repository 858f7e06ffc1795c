#pragma once

#include <span>
#include <vector>

#include "omake/encoders.hpp"
#include "omake/graph.hpp"
#include "omake/ontology.hpp"

namespace omake::losses {

// Objective hyperparameters and ablation toggles. The toggles map to the
// ablation rows: knowledge captions + sub-captions (M* / M), fine-grained
// alignment (F), ontology soft labels (O) and ontology weighting (W).
struct LossConfig {
    double tau = 0.07;    // alignment temperature
    double tau_s = 0.07;  // soft-label temperature
    double beta = 0.05;   // soft-label blend
    double lambda = 0.7;  // fine-grained alignment weight

    bool use_knowledge_captions = true;  // ontology + concept caption terms
    bool use_subcaptions = true;         // sub-caption terms in the global loss
    bool use_fga = true;
    bool use_ontology_softlabels = true;
    bool use_ontology_weighting = true;

    enum class FgaReduction { sum, mean };
    FgaReduction fga_reduction = FgaReduction::sum; // written as a plain sum

    void validate() const;
};

// Per-sub-caption importance: cosine against the ontology embedding divided
// by the per-sample max. Degenerate scores (max <= 1e-6) fall back to
// uniform. Treated as constants during differentiation.
std::vector<double> ontology_guided_weights(std::span<const double> onto,
                                            const std::vector<std::vector<double>>& subs);
std::vector<double> ontology_guided_weights(const numerics::Graph& g, numerics::Value onto,
                                            std::span<const numerics::Value> subs);

// Soft-target cross-entropy of anchor-vs-targets similarities at temperature
// tau. soft_row must be a distribution over the target rows.
numerics::Value alignment_loss(numerics::Graph& g, numerics::Value anchor,
                               numerics::Value targets, std::span<const double> soft_row,
                               double tau);

// Patch pooling weighted by raw-caption similarity scores, normalized by the
// signed score sum (mean pooling when |sum| <= 1e-6), then L2-normalized.
numerics::Value knowledge_enhanced_embedding(numerics::Graph& g, numerics::Value patches,
                                             numerics::Value raw);

struct MkiaResult {
    numerics::Value combined; // (i2t + t2i) / 2
    numerics::Value i2t;
    numerics::Value t2i;
};

// Global multi-knowledge alignment over a batch. `weights[i]` holds one
// entry per sub-caption of sample i. Sub-caption pools are ragged: the j-th
// term covers only samples owning a j-th sub-caption, with soft rows
// renormalized over that subset.
MkiaResult mkia_loss(numerics::Graph& g, const std::vector<encoders::BundleValues>& batch,
                     const ontology::SoftLabelMatrix& soft,
                     const std::vector<std::vector<double>>& weights, const LossConfig& cfg);

// Sub-caption vs knowledge-enhanced-embedding contrastive term, summed over
// every (sample, sub-caption) pair unless mean reduction is configured.
numerics::Value fga_loss(numerics::Graph& g, const std::vector<encoders::BundleValues>& batch,
                         const LossConfig& cfg);

struct LossBreakdown {
    double mkia_i2t = 0.0;
    double mkia_t2i = 0.0;
    double mkia = 0.0;
    double fga = 0.0;
    double total = 0.0;
};

struct TotalLoss {
    numerics::Value value;
    LossBreakdown breakdown;
};

// Full objective: MKIA + lambda * FGA with every toggle applied. Weights are
// recomputed from the current graph values unless `frozen_weights` is given
// (gradient checking freezes them at the base point, matching their
// stop-gradient treatment).
TotalLoss total_loss(numerics::Graph& g, const std::vector<encoders::BundleValues>& batch,
                     const ontology::SimilarityMatrix& similarity, const LossConfig& cfg,
                     const std::vector<std::vector<double>>* frozen_weights = nullptr);

} // namespace omake::losses
