#include "omake/losses.hpp"

#include <algorithm>
#include <cmath>

#include "omake/errors.hpp"

namespace omake::losses {

using numerics::Graph;
using numerics::Tensor;
using numerics::Value;

void LossConfig::validate() const {
    if (tau <= 0.0) throw ParameterError("loss config: tau must be > 0");
    if (tau_s <= 0.0) throw ParameterError("loss config: tau_s must be > 0");
    if (beta < 0.0 || beta > 1.0) throw ParameterError("loss config: beta must be in [0,1]");
    if (lambda < 0.0) throw ParameterError("loss config: lambda must be >= 0");
}

std::vector<double> ontology_guided_weights(std::span<const double> onto,
                                            const std::vector<std::vector<double>>& subs) {
    if (subs.empty()) throw ContractError("ontology_guided_weights: no sub-captions");
    std::vector<double> scores(subs.size());
    for (std::size_t j = 0; j < subs.size(); ++j) {
        if (subs[j].size() != onto.size()) {
            throw DimensionError("ontology_guided_weights: sub-caption dim mismatch");
        }
        scores[j] = numerics::dot(onto, subs[j]);
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    if (mx <= 1e-6) return std::vector<double>(subs.size(), 1.0);
    for (double& s : scores) s /= mx;
    return scores;
}

std::vector<double> ontology_guided_weights(const Graph& g, Value onto,
                                            std::span<const Value> subs) {
    std::vector<std::vector<double>> sub_vecs;
    sub_vecs.reserve(subs.size());
    for (Value s : subs) sub_vecs.push_back(g.value(s).values());
    return ontology_guided_weights(g.value(onto).span(), sub_vecs);
}

Value alignment_loss(Graph& g, Value anchor, Value targets, std::span<const double> soft_row,
                     double tau) {
    const Tensor& tv = g.value(targets);
    if (tv.rank() != 2 || tv.shape()[0] == 0) {
        throw ContractError("alignment_loss: targets must be a nonempty (B x d) matrix");
    }
    const std::size_t b = tv.shape()[0];
    const std::size_t d = tv.shape()[1];
    if (g.value(anchor).size() != d) {
        throw DimensionError("alignment_loss: anchor dim does not match targets");
    }
    if (soft_row.size() != b) {
        throw DimensionError("alignment_loss: soft_row length does not match batch");
    }
    double total = 0.0;
    for (double v : soft_row) total += v;
    if (std::abs(total - 1.0) > 1e-6) {
        throw ContractError("alignment_loss: soft_row must sum to 1");
    }
    Value logits = g.matmul(g.reshape(anchor, {1, d}), g.transpose(targets));
    Value logp = g.log_softmax_rows(logits, tau);
    Tensor soft({1, b}, std::vector<double>(soft_row.begin(), soft_row.end()));
    return g.mul_scalar(g.sum(g.mul(g.constant(std::move(soft)), logp)), -1.0);
}

Value knowledge_enhanced_embedding(Graph& g, Value patches, Value raw) {
    const Tensor& pv = g.value(patches);
    if (pv.rank() != 2 || pv.shape()[0] == 0) {
        throw ContractError("knowledge_enhanced_embedding: patches must be a nonempty matrix");
    }
    const std::size_t d = pv.shape()[1];
    if (g.value(raw).size() != d) {
        throw DimensionError("knowledge_enhanced_embedding: raw embedding dim mismatch");
    }
    Value z = g.matmul(patches, g.reshape(raw, {d, 1})); // (HW x 1) scores
    Value zsum = g.sum(z);
    Value pooled;
    if (std::abs(g.scalar_value(zsum)) <= 1e-6) {
        pooled = g.mean_pool_rows(patches);
    } else {
        Value weighted = g.matmul(g.transpose(patches), z); // (d x 1)
        pooled = g.reshape(g.div_by_scalar(weighted, zsum), {d});
    }
    return g.l2_normalize_rows(pooled);
}

namespace {

// -(1/B) * sum(soft ⊙ log_softmax(anchors · targets^T / tau)); soft rows may
// carry per-anchor weights folded in by the caller.
Value soft_ce_block(Graph& g, Value anchors, Value targets, Tensor soft, double tau,
                    double inv_b) {
    Value logits = g.matmul(anchors, g.transpose(targets));
    Value logp = g.log_softmax_rows(logits, tau);
    return g.mul_scalar(g.sum(g.mul(g.constant(std::move(soft)), logp)), -inv_b);
}

Tensor transpose_soft(const ontology::SoftLabelMatrix& soft) {
    const std::size_t b = soft.size;
    Tensor t({b, b});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) t[i * b + j] = soft.at(j, i);
    return t;
}

} // namespace

MkiaResult mkia_loss(Graph& g, const std::vector<encoders::BundleValues>& batch,
                     const ontology::SoftLabelMatrix& soft,
                     const std::vector<std::vector<double>>& weights, const LossConfig& cfg) {
    const std::size_t b = batch.size();
    if (b == 0) throw ContractError("mkia_loss: empty batch");
    if (soft.size != b) throw DimensionError("mkia_loss: soft-label matrix size mismatch");
    if (weights.size() != b) throw DimensionError("mkia_loss: weights size mismatch");

    std::vector<Value> visuals(b);
    for (std::size_t i = 0; i < b; ++i) visuals[i] = batch[i].visual;
    Value v_mat = g.stack_rows(visuals);

    Tensor soft_i2t({b, b}, soft.entries);
    Tensor soft_t2i = transpose_soft(soft);
    const double inv_b = 1.0 / static_cast<double>(b);

    Value i2t;
    Value t2i;
    bool have = false;
    auto accumulate = [&](Value anchor_side, Value target_side) {
        if (!have) {
            i2t = anchor_side;
            t2i = target_side;
            have = true;
        } else {
            i2t = g.add(i2t, anchor_side);
            t2i = g.add(t2i, target_side);
        }
    };

    // Knowledge-level terms: raw always, ontology/concept behind the toggle.
    std::vector<std::vector<Value>> aspects;
    {
        std::vector<Value> raw(b), onto(b), concepts(b);
        for (std::size_t i = 0; i < b; ++i) {
            raw[i] = batch[i].raw;
            onto[i] = batch[i].onto;
            concepts[i] = batch[i].concept_vec;
        }
        aspects.push_back(std::move(raw));
        if (cfg.use_knowledge_captions) {
            aspects.push_back(std::move(onto));
            aspects.push_back(std::move(concepts));
        }
    }
    for (const auto& aspect : aspects) {
        Value t_mat = g.stack_rows(aspect);
        accumulate(soft_ce_block(g, v_mat, t_mat, soft_i2t, cfg.tau, inv_b),
                   soft_ce_block(g, t_mat, v_mat, soft_t2i, cfg.tau, inv_b));
    }

    if (cfg.use_subcaptions) {
        std::size_t max_n = 0;
        for (const auto& item : batch) max_n = std::max(max_n, item.subs.size());
        for (std::size_t j = 0; j < max_n; ++j) {
            std::vector<std::size_t> present;
            for (std::size_t i = 0; i < b; ++i) {
                if (j < batch[i].subs.size()) present.push_back(i);
            }
            if (present.empty()) continue;
            const std::size_t p = present.size();
            std::vector<Value> anchor_vis(p), target_sub(p);
            for (std::size_t r = 0; r < p; ++r) {
                anchor_vis[r] = batch[present[r]].visual;
                target_sub[r] = batch[present[r]].subs[j];
            }
            Value vp = p == b ? v_mat : g.stack_rows(anchor_vis);
            Value sp = g.stack_rows(target_sub);

            // Ragged pools: soft rows restricted to the present subset and
            // renormalized, then scaled by the anchor's sub-caption weight.
            Tensor sub_i2t({p, p});
            Tensor sub_t2i({p, p});
            for (std::size_t r = 0; r < p; ++r) {
                const std::size_t i = present[r];
                const double w = weights[i].size() > j ? weights[i][j] : 1.0;
                double row_sum = 0.0, col_sum = 0.0;
                for (std::size_t cidx = 0; cidx < p; ++cidx) {
                    row_sum += soft.at(i, present[cidx]);
                    col_sum += soft.at(present[cidx], i);
                }
                for (std::size_t cidx = 0; cidx < p; ++cidx) {
                    sub_i2t[r * p + cidx] = w * soft.at(i, present[cidx]) / row_sum;
                    sub_t2i[r * p + cidx] = w * soft.at(present[cidx], i) / col_sum;
                }
            }
            accumulate(soft_ce_block(g, vp, sp, std::move(sub_i2t), cfg.tau, inv_b),
                       soft_ce_block(g, sp, vp, std::move(sub_t2i), cfg.tau, inv_b));
        }
    }

    MkiaResult out;
    out.i2t = i2t;
    out.t2i = t2i;
    out.combined = g.mul_scalar(g.add(i2t, t2i), 0.5);
    return out;
}

Value fga_loss(Graph& g, const std::vector<encoders::BundleValues>& batch,
               const LossConfig& cfg) {
    const std::size_t b = batch.size();
    if (b == 0) throw ContractError("fga_loss: empty batch");

    std::vector<Value> enhanced(b);
    for (std::size_t i = 0; i < b; ++i) {
        enhanced[i] = knowledge_enhanced_embedding(g, batch[i].patches, batch[i].raw);
    }
    Value ek = g.stack_rows(enhanced);

    std::vector<Value> anchors;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < b; ++i) {
        for (Value s : batch[i].subs) {
            anchors.push_back(s);
            owner.push_back(i);
        }
    }
    if (anchors.empty()) throw ContractError("fga_loss: batch has no sub-captions");

    Value a_mat = g.stack_rows(anchors);
    Value logp = g.log_softmax_rows(g.matmul(a_mat, g.transpose(ek)), cfg.tau);
    Tensor mask({anchors.size(), b});
    for (std::size_t r = 0; r < anchors.size(); ++r) mask[r * b + owner[r]] = 1.0;
    Value loss = g.mul_scalar(g.sum(g.mul(g.constant(std::move(mask)), logp)), -1.0);
    if (cfg.fga_reduction == LossConfig::FgaReduction::mean) {
        loss = g.mul_scalar(loss, 1.0 / static_cast<double>(anchors.size()));
    }
    return loss;
}

TotalLoss total_loss(Graph& g, const std::vector<encoders::BundleValues>& batch,
                     const ontology::SimilarityMatrix& similarity, const LossConfig& cfg,
                     const std::vector<std::vector<double>>* frozen_weights) {
    cfg.validate();
    const std::size_t b = batch.size();
    if (b == 0) throw ContractError("total_loss: empty batch");
    if (similarity.size != b) throw DimensionError("total_loss: similarity matrix size mismatch");

    const double beta = cfg.use_ontology_softlabels ? cfg.beta : 0.0;
    const ontology::SoftLabelMatrix soft = ontology::soft_labels(similarity, beta, cfg.tau_s);

    std::vector<std::vector<double>> weights(b);
    if (frozen_weights) {
        if (frozen_weights->size() != b) {
            throw DimensionError("total_loss: frozen weights size mismatch");
        }
        weights = *frozen_weights;
    } else {
        for (std::size_t i = 0; i < b; ++i) {
            if (cfg.use_ontology_weighting && !batch[i].subs.empty()) {
                weights[i] = ontology_guided_weights(g, batch[i].onto, batch[i].subs);
            } else {
                weights[i].assign(std::max<std::size_t>(batch[i].subs.size(), 1), 1.0);
            }
        }
    }

    MkiaResult mkia = mkia_loss(g, batch, soft, weights, cfg);
    TotalLoss out;
    out.breakdown.mkia_i2t = g.scalar_value(mkia.i2t);
    out.breakdown.mkia_t2i = g.scalar_value(mkia.t2i);
    out.breakdown.mkia = g.scalar_value(mkia.combined);

    if (cfg.use_fga) {
        Value fga = fga_loss(g, batch, cfg);
        out.breakdown.fga = g.scalar_value(fga);
        out.value = g.add(mkia.combined, g.mul_scalar(fga, cfg.lambda));
    } else {
        out.value = mkia.combined;
    }
    out.breakdown.total = g.scalar_value(out.value);
    if (!std::isfinite(out.breakdown.total)) {
        throw NumericError("total_loss: non-finite loss value");
    }
    return out;
}

} // namespace omake::losses
