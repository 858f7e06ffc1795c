#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omake/errors.hpp"
#include "omake/losses.hpp"
#include "omake/rng.hpp"
#include "support/oracles.hpp"

using namespace omake;
using encoders::BundleValues;
using losses::LossConfig;
using numerics::Graph;
using numerics::Rng;
using numerics::Tensor;
using numerics::Value;

namespace {

struct PlainBundle {
    std::vector<double> visual;
    std::vector<std::vector<double>> patches;
    std::vector<double> raw, onto, concept_vec;
    std::vector<std::vector<double>> subs;
};

PlainBundle random_plain_bundle(Rng& rng, std::size_t d, std::size_t hw, std::size_t n_subs) {
    PlainBundle b;
    b.visual = oracles::random_unit_vector(rng, d);
    for (std::size_t i = 0; i < hw; ++i) b.patches.push_back(oracles::random_unit_vector(rng, d));
    b.raw = oracles::random_unit_vector(rng, d);
    b.onto = oracles::random_unit_vector(rng, d);
    b.concept_vec = oracles::random_unit_vector(rng, d);
    for (std::size_t j = 0; j < n_subs; ++j) b.subs.push_back(oracles::random_unit_vector(rng, d));
    return b;
}

BundleValues to_graph(Graph& g, const PlainBundle& p, bool requires_grad = false,
                      const std::string& name_prefix = {}) {
    auto leaf_vec = [&](const std::vector<double>& v, const std::string& suffix) {
        Tensor t = Tensor::vector(v, requires_grad);
        return requires_grad ? g.leaf(std::move(t), name_prefix + suffix)
                             : g.constant(std::move(t));
    };
    BundleValues b;
    b.visual = leaf_vec(p.visual, ".visual");
    std::vector<double> flat;
    for (const auto& row : p.patches) flat.insert(flat.end(), row.begin(), row.end());
    Tensor patches({p.patches.size(), p.visual.size()}, std::move(flat), requires_grad);
    b.patches = requires_grad ? g.leaf(std::move(patches), name_prefix + ".patches")
                              : g.constant(std::move(patches));
    b.raw = leaf_vec(p.raw, ".raw");
    b.onto = leaf_vec(p.onto, ".onto");
    b.concept_vec = leaf_vec(p.concept_vec, ".concept");
    for (std::size_t j = 0; j < p.subs.size(); ++j) {
        b.subs.push_back(leaf_vec(p.subs[j], ".sub" + std::to_string(j)));
    }
    return b;
}

ontology::SimilarityMatrix random_similarity(Rng& rng, std::size_t b) {
    ontology::SimilarityMatrix s{b, std::vector<double>(b * b, 0.0)};
    for (std::size_t i = 0; i < b; ++i) {
        s.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < b; ++j) {
            const double v = rng.uniform();
            s.at(i, j) = v;
            s.at(j, i) = v;
        }
    }
    return s;
}

LossConfig clip_reduction_config() {
    LossConfig cfg;
    cfg.beta = 0.0;
    cfg.use_knowledge_captions = false;
    cfg.use_subcaptions = false;
    cfg.use_fga = false;
    cfg.use_ontology_softlabels = false;
    cfg.use_ontology_weighting = false;
    return cfg;
}

} // namespace

TEST_CASE("ontology-guided weights") {
    SUBCASE("single sub-caption self-normalizes to one") {
        std::vector<double> onto = {1.0, 0.0};
        const auto w = losses::ontology_guided_weights(onto, {{0.6, 0.8}});
        REQUIRE(w.size() == 1);
        CHECK(w[0] == 1.0);
    }
    SUBCASE("equal scores are all one") {
        std::vector<double> onto = {1.0, 0.0};
        const auto w = losses::ontology_guided_weights(onto, {{0.5, 0.1}, {0.5, -0.3}});
        CHECK(w[0] == 1.0);
        CHECK(w[1] == 1.0);
    }
    SUBCASE("scores divide by the max") {
        std::vector<double> onto = {1.0, 0.0};
        // dot products 0.2 and 0.4
        const auto w = losses::ontology_guided_weights(onto, {{0.2, 0.9}, {0.4, 0.1}});
        CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(w[1] == 1.0);
    }
    SUBCASE("degenerate max falls back to uniform") {
        std::vector<double> onto = {1.0, 0.0};
        const auto w = losses::ontology_guided_weights(onto, {{0.0, 1.0}, {-0.5, 0.0}});
        CHECK(w == std::vector<double>{1.0, 1.0});
    }
    SUBCASE("no sub-captions is a contract error") {
        std::vector<double> onto = {1.0};
        CHECK_THROWS_AS((void)losses::ontology_guided_weights(onto, {}), ContractError);
    }
}

TEST_CASE("alignment loss") {
    Rng rng(71);
    SUBCASE("B = 1 gives zero") {
        Graph g;
        const auto anchor = oracles::random_unit_vector(rng, 6);
        Value a = g.constant(Tensor::vector(anchor));
        Value t = g.constant(Tensor({1, 6}, anchor));
        std::vector<double> soft = {1.0};
        CHECK(g.scalar_value(losses::alignment_loss(g, a, t, soft, 0.07)) == 0.0);
    }
    SUBCASE("one-hot soft row matches the log-sum-exp reference within 1e-10") {
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t b = 2 + rng.below(8);
            const std::size_t d = 4 + rng.below(6);
            const auto anchor = oracles::random_unit_vector(rng, d);
            std::vector<std::vector<double>> targets;
            std::vector<double> flat;
            for (std::size_t j = 0; j < b; ++j) {
                targets.push_back(oracles::random_unit_vector(rng, d));
                flat.insert(flat.end(), targets.back().begin(), targets.back().end());
            }
            std::vector<double> soft(b, 0.0);
            const std::size_t hot = rng.below(b);
            soft[hot] = 1.0;

            Graph g;
            Value loss = losses::alignment_loss(g, g.constant(Tensor::vector(anchor)),
                                                g.constant(Tensor({b, d}, flat)), soft, 0.07);
            const double expect = oracles::reference_soft_ce(anchor, targets, soft, 0.07);
            CHECK(std::abs(g.scalar_value(loss) - expect) < 1e-10);
        }
    }
    SUBCASE("uniform soft row over mutually orthogonal targets gives log B") {
        const std::size_t b = 5, d = 8;
        std::vector<double> flat(b * d, 0.0);
        for (std::size_t j = 0; j < b; ++j) flat[j * d + j] = 1.0; // e_1..e_5
        std::vector<double> anchor(d, 0.0);
        anchor[7] = 1.0; // orthogonal to every target
        std::vector<double> soft(b, 1.0 / static_cast<double>(b));
        Graph g;
        Value loss = losses::alignment_loss(g, g.constant(Tensor::vector(anchor)),
                                            g.constant(Tensor({b, d}, flat)), soft, 0.07);
        CHECK(g.scalar_value(loss) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("soft row must be a distribution") {
        Graph g;
        Value a = g.constant(Tensor({3}, 0.1));
        Value t = g.constant(Tensor({2, 3}, 0.1));
        std::vector<double> bad = {0.9, 0.3};
        CHECK_THROWS_AS((void)losses::alignment_loss(g, a, t, bad, 0.07), ContractError);
    }
    SUBCASE("gradient pressure equals p_j minus soft_j") {
        // L = -sum_j soft_j log softmax(x)_j over a leaf logit row
        for (double tau : {1.0, 0.07}) {
            const std::size_t b = 6;
            Tensor logits({1, b}, 0.0, true);
            for (std::size_t j = 0; j < b; ++j) logits[j] = rng.uniform(-1.0, 1.0);
            std::vector<double> soft(b);
            double sum = 0.0;
            for (auto& v : soft) {
                v = rng.uniform(0.05, 1.0);
                sum += v;
            }
            for (auto& v : soft) v /= sum;

            Graph g;
            Value x = g.leaf(logits, "x");
            Value logp = g.log_softmax_rows(x, tau);
            Value loss = g.mul_scalar(
                g.sum(g.mul(g.constant(Tensor({1, b}, soft)), logp)), -1.0);
            auto grads = g.backward(loss);

            Tensor probs = logits;
            numerics::softmax_rows_inplace(probs.values(), b, tau);
            for (std::size_t j = 0; j < b; ++j) {
                CHECK(grads.at("x")[j] ==
                      doctest::Approx((probs[j] - soft[j]) / tau).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("knowledge-enhanced embedding") {
    Rng rng(91);
    const std::size_t d = 6;

    SUBCASE("identical patches collapse to the normalized shared vector") {
        const auto v = oracles::random_unit_vector(rng, d);
        std::vector<double> flat;
        for (int i = 0; i < 4; ++i) flat.insert(flat.end(), v.begin(), v.end());
        Graph g;
        Value patches = g.constant(Tensor({4, d}, flat));
        Value raw = g.constant(Tensor::vector(oracles::random_unit_vector(rng, d)));
        Value ek = losses::knowledge_enhanced_embedding(g, patches, raw);
        for (std::size_t c = 0; c < d; ++c) {
            CHECK(g.value(ek)[c] == doctest::Approx(v[c]).epsilon(1e-9));
        }
    }
    SUBCASE("raw orthogonal to every patch triggers the mean-pool guard") {
        // patches live in the first two axes, raw on the last
        std::vector<double> flat((std::size_t)3 * d, 0.0);
        flat[0 * d + 0] = 1.0;
        flat[1 * d + 1] = 1.0;
        flat[2 * d + 0] = -1.0;
        std::vector<double> raw(d, 0.0);
        raw[d - 1] = 1.0;
        Graph g;
        Value ek = losses::knowledge_enhanced_embedding(
            g, g.constant(Tensor({3, d}, flat)), g.constant(Tensor::vector(raw)));
        // mean of patches = (e0 + e1 - e0)/3 = e1/3, normalized -> e1
        CHECK(g.value(ek)[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(g.value(ek)[0] == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("two patches with scores one and three blend as (p1 + 3 p2) / 4") {
        // raw chosen so z = [1, 3]
        std::vector<double> p1(d, 0.0), p2(d, 0.0);
        p1[0] = 1.0;
        p2[1] = 1.0;
        std::vector<double> raw(d, 0.0);
        raw[0] = 1.0;
        raw[1] = 3.0;
        std::vector<double> flat;
        flat.insert(flat.end(), p1.begin(), p1.end());
        flat.insert(flat.end(), p2.begin(), p2.end());
        Graph g;
        Value ek = losses::knowledge_enhanced_embedding(
            g, g.constant(Tensor({2, d}, flat)), g.constant(Tensor::vector(raw)));
        std::vector<double> expect(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) expect[c] = (p1[c] + 3.0 * p2[c]) / 4.0;
        const double n = std::sqrt(oracles::dot(expect, expect));
        for (auto& e : expect) e /= n;
        for (std::size_t c = 0; c < d; ++c) {
            CHECK(g.value(ek)[c] == doctest::Approx(expect[c]).epsilon(1e-12));
        }
    }
    SUBCASE("weights sum to one whenever the guard is inactive") {
        for (int rep = 0; rep < 30; ++rep) {
            const std::size_t hw = 2 + rng.below(6);
            PlainBundle p = random_plain_bundle(rng, d, hw, 1);
            double zsum = 0.0;
            std::vector<double> z(hw);
            for (std::size_t n = 0; n < hw; ++n) {
                z[n] = oracles::dot(p.patches[n], p.raw);
                zsum += z[n];
            }
            if (std::abs(zsum) <= 1e-6) continue;
            double wsum = 0.0;
            for (std::size_t n = 0; n < hw; ++n) wsum += z[n] / zsum;
            CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    SUBCASE("empty patch matrix is a contract error") {
        Graph g;
        Value raw = g.constant(Tensor({d}, 0.1));
        Value patches = g.constant(Tensor({0, d}));
        CHECK_THROWS_AS((void)losses::knowledge_enhanced_embedding(g, patches, raw),
                        ContractError);
    }
}

TEST_CASE("mkia loss") {
    Rng rng(101);

    SUBCASE("reduces to the symmetric InfoNCE objective") {
        for (int rep = 0; rep < 10; ++rep) {
            const std::size_t b = 2 + rng.below(8);
            const std::size_t d = 8;
            std::vector<PlainBundle> plain;
            std::vector<std::vector<double>> images, texts;
            Graph g;
            std::vector<BundleValues> batch;
            for (std::size_t i = 0; i < b; ++i) {
                plain.push_back(random_plain_bundle(rng, d, 2, 1));
                images.push_back(plain.back().visual);
                texts.push_back(plain.back().raw);
                batch.push_back(to_graph(g, plain.back()));
            }
            const LossConfig cfg = clip_reduction_config();
            const auto sim = random_similarity(rng, b);
            losses::TotalLoss total = losses::total_loss(g, batch, sim, cfg);
            const double expect = oracles::reference_clip_loss(images, texts, cfg.tau);
            CHECK(std::abs(total.breakdown.total - expect) < 1e-10);
        }
    }

    SUBCASE("B = 1 gives zero") {
        Graph g;
        Rng r2(3);
        std::vector<BundleValues> batch = {to_graph(g, random_plain_bundle(r2, 8, 2, 2))};
        ontology::SimilarityMatrix sim{1, {1.0}};
        LossConfig cfg;
        cfg.use_fga = false;
        losses::TotalLoss total = losses::total_loss(g, batch, sim, cfg);
        CHECK(total.breakdown.total == 0.0);
    }

    SUBCASE("doubling one weight shifts i2t by exactly (w/B) times the term") {
        const std::size_t b = 4, d = 8, n = 2;
        Graph g;
        Rng r2(17);
        std::vector<PlainBundle> plain;
        std::vector<BundleValues> batch;
        for (std::size_t i = 0; i < b; ++i) {
            plain.push_back(random_plain_bundle(r2, d, 2, n));
            batch.push_back(to_graph(g, plain.back()));
        }
        const auto sim = random_similarity(r2, b);
        const auto soft = ontology::soft_labels(sim, 0.05, 0.07);

        std::vector<std::vector<double>> weights(b, std::vector<double>(n, 1.0));
        LossConfig cfg; // subcaptions on, defaults elsewhere
        const auto base = losses::mkia_loss(g, batch, soft, weights, cfg);

        const std::size_t pi = 1, pj = 0;
        std::vector<std::vector<double>> bumped = weights;
        bumped[pi][pj] = 2.0;
        const auto moved = losses::mkia_loss(g, batch, soft, bumped, cfg);

        // the (pi, pj) alignment terms recomputed standalone, both directions
        std::vector<double> soft_row(b), soft_col(b);
        for (std::size_t m = 0; m < b; ++m) {
            soft_row[m] = soft.at(pi, m);
            soft_col[m] = soft.at(m, pi);
        }
        double rs = 0.0, cs = 0.0;
        for (double v : soft_row) rs += v;
        for (double v : soft_col) cs += v;
        for (auto& v : soft_row) v /= rs;
        for (auto& v : soft_col) v /= cs;
        std::vector<std::vector<double>> sub_targets, visuals;
        for (std::size_t m = 0; m < b; ++m) {
            sub_targets.push_back(plain[m].subs[pj]);
            visuals.push_back(plain[m].visual);
        }
        const double term_i2t =
            oracles::reference_soft_ce(plain[pi].visual, sub_targets, soft_row, cfg.tau);
        const double term_t2i =
            oracles::reference_soft_ce(plain[pi].subs[pj], visuals, soft_col, cfg.tau);

        const double delta_i2t =
            g.scalar_value(moved.i2t) - g.scalar_value(base.i2t);
        const double delta_t2i =
            g.scalar_value(moved.t2i) - g.scalar_value(base.t2i);
        CHECK(delta_i2t == doctest::Approx((1.0 / b) * term_i2t).epsilon(1e-9));
        CHECK(delta_t2i == doctest::Approx((1.0 / b) * term_t2i).epsilon(1e-9));
    }

    SUBCASE("ragged sub-caption pools skip absent members") {
        const std::size_t d = 8;
        Graph g;
        Rng r2(23);
        std::vector<PlainBundle> plain = {random_plain_bundle(r2, d, 2, 2),
                                          random_plain_bundle(r2, d, 2, 1),
                                          random_plain_bundle(r2, d, 2, 3)};
        std::vector<BundleValues> batch;
        for (const auto& p : plain) batch.push_back(to_graph(g, p));
        const auto sim = random_similarity(r2, 3);
        const auto soft = ontology::soft_labels(sim, 0.05, 0.07);
        std::vector<std::vector<double>> weights = {{1.0, 1.0}, {1.0}, {1.0, 1.0, 1.0}};
        LossConfig cfg;
        const auto out = losses::mkia_loss(g, batch, soft, weights, cfg);
        CHECK(std::isfinite(g.scalar_value(out.combined)));
        // j=2 pool holds only sample 2 -> that block contributes zero
        // (single-candidate softmax), so removing sample 2's third sub must
        // leave the loss unchanged.
        Graph g2;
        std::vector<PlainBundle> trimmed = plain;
        trimmed[2].subs.resize(2);
        std::vector<BundleValues> batch2;
        for (const auto& p : trimmed) batch2.push_back(to_graph(g2, p));
        std::vector<std::vector<double>> weights2 = {{1.0, 1.0}, {1.0}, {1.0, 1.0}};
        const auto out2 = losses::mkia_loss(g2, batch2, soft, weights2, cfg);
        CHECK(g.scalar_value(out.combined) ==
              doctest::Approx(g2.scalar_value(out2.combined)).epsilon(1e-12));
    }
}

TEST_CASE("fga loss") {
    Rng rng(211);
    SUBCASE("B = 1 gives zero for any sub-caption count") {
        Graph g;
        std::vector<BundleValues> batch = {to_graph(g, random_plain_bundle(rng, 8, 4, 3))};
        LossConfig cfg;
        CHECK(g.scalar_value(losses::fga_loss(g, batch, cfg)) == 0.0);
    }
    SUBCASE("identical enhanced embeddings give sum log B") {
        const std::size_t b = 4, d = 8;
        Graph g;
        std::vector<BundleValues> batch;
        std::size_t total_subs = 0;
        PlainBundle shared = random_plain_bundle(rng, d, 3, 1);
        for (std::size_t i = 0; i < b; ++i) {
            PlainBundle p = random_plain_bundle(rng, d, 3, 1 + i % 2);
            p.patches = shared.patches; // same patches + same raw -> same E^k
            p.raw = shared.raw;
            total_subs += p.subs.size();
            batch.push_back(to_graph(g, p));
        }
        LossConfig cfg;
        const double loss = g.scalar_value(losses::fga_loss(g, batch, cfg));
        CHECK(loss ==
              doctest::Approx(static_cast<double>(total_subs) * std::log(4.0)).epsilon(1e-10));
    }
    SUBCASE("mean reduction divides by the pair count") {
        const std::size_t b = 3, d = 6;
        Graph g;
        std::vector<BundleValues> batch;
        std::size_t total_subs = 0;
        for (std::size_t i = 0; i < b; ++i) {
            PlainBundle p = random_plain_bundle(rng, d, 2, 2);
            total_subs += p.subs.size();
            batch.push_back(to_graph(g, p));
        }
        LossConfig sum_cfg, mean_cfg;
        mean_cfg.fga_reduction = LossConfig::FgaReduction::mean;
        const double s = g.scalar_value(losses::fga_loss(g, batch, sum_cfg));
        const double m = g.scalar_value(losses::fga_loss(g, batch, mean_cfg));
        CHECK(m == doctest::Approx(s / static_cast<double>(total_subs)).epsilon(1e-12));
    }
}

TEST_CASE("total loss") {
    Rng rng(307);

    auto build_batch = [&](Graph& g, std::size_t b, std::size_t d, bool grad,
                           std::vector<PlainBundle>* plain_out = nullptr) {
        std::vector<BundleValues> batch;
        for (std::size_t i = 0; i < b; ++i) {
            PlainBundle p = random_plain_bundle(rng, d, 3, 1 + i % 3);
            if (plain_out) plain_out->push_back(p);
            batch.push_back(to_graph(g, p, grad, "s" + std::to_string(i)));
        }
        return batch;
    };

    SUBCASE("lambda = 0 equals the MKIA term exactly") {
        Graph g;
        auto batch = build_batch(g, 5, 8, false);
        const auto sim = random_similarity(rng, 5);
        LossConfig cfg;
        cfg.lambda = 0.0;
        const auto out = losses::total_loss(g, batch, sim, cfg);
        CHECK(out.breakdown.total == out.breakdown.mkia);
    }
    SUBCASE("breakdown terms sum to the total within 1e-12") {
        Graph g;
        auto batch = build_batch(g, 6, 8, false);
        const auto sim = random_similarity(rng, 6);
        LossConfig cfg;
        const auto out = losses::total_loss(g, batch, sim, cfg);
        const double recombined =
            0.5 * (out.breakdown.mkia_i2t + out.breakdown.mkia_t2i) +
            cfg.lambda * out.breakdown.fga;
        CHECK(std::abs(recombined - out.breakdown.total) <= 1e-12);
    }
    SUBCASE("permuting the batch leaves the scalar unchanged") {
        const std::size_t b = 6, d = 8;
        std::vector<PlainBundle> plain;
        Graph g;
        auto batch = build_batch(g, b, d, false, &plain);
        auto sim = random_similarity(rng, b);
        LossConfig cfg;
        const auto base = losses::total_loss(g, batch, sim, cfg);

        std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
        Graph g2;
        std::vector<BundleValues> permuted;
        for (std::size_t i : perm) permuted.push_back(to_graph(g2, plain[i]));
        ontology::SimilarityMatrix sim2{b, std::vector<double>(b * b)};
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < b; ++j) sim2.at(i, j) = sim.at(perm[i], perm[j]);
        const auto moved = losses::total_loss(g2, permuted, sim2, cfg);
        CHECK(std::abs(base.breakdown.total - moved.breakdown.total) <= 1e-12);
    }
    SUBCASE("every toggle off with beta zero reproduces plain contrastive") {
        Graph g;
        std::vector<PlainBundle> plain;
        auto batch = build_batch(g, 7, 8, false, &plain);
        const auto sim = random_similarity(rng, 7);
        const auto out = losses::total_loss(g, batch, sim, clip_reduction_config());
        std::vector<std::vector<double>> images, texts;
        for (const auto& p : plain) {
            images.push_back(p.visual);
            texts.push_back(p.raw);
        }
        CHECK(std::abs(out.breakdown.total -
                       oracles::reference_clip_loss(images, texts, 0.07)) < 1e-10);
    }
    SUBCASE("full objective passes a finite-difference gradient check") {
        const std::size_t b = 3, d = 6;
        std::vector<PlainBundle> plain;
        {
            for (std::size_t i = 0; i < b; ++i)
                plain.push_back(random_plain_bundle(rng, d, 2, 1 + i % 2));
        }
        auto sim = random_similarity(rng, b);
        LossConfig cfg; // everything on

        // freeze the stop-gradient weights at the base point
        std::vector<std::vector<double>> frozen;
        for (const auto& p : plain) {
            frozen.push_back(losses::ontology_guided_weights(p.onto, p.subs));
        }

        auto run = [&](numerics::GradientMap* grads_out) {
            Graph g;
            std::vector<BundleValues> batch;
            for (std::size_t i = 0; i < b; ++i) {
                batch.push_back(to_graph(g, plain[i], true, "s" + std::to_string(i)));
            }
            auto out = losses::total_loss(g, batch, sim, cfg, &frozen);
            if (grads_out) *grads_out = g.backward(out.value);
            return out.breakdown.total;
        };

        numerics::GradientMap analytic;
        run(&analytic);
        const double h = 1e-6;
        auto fd_check = [&](std::vector<double>& storage, const std::string& name,
                            std::size_t grad_offset = 0) {
            const Tensor& a = analytic.at(name);
            for (std::size_t i = 0; i < storage.size(); ++i) {
                const double saved = storage[i];
                storage[i] = saved + h;
                const double up = run(nullptr);
                storage[i] = saved - h;
                const double down = run(nullptr);
                storage[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double av = a[grad_offset + i];
                if (std::abs(av) < 1e-7 && std::abs(fd) < 1e-7) continue;
                const double rel = std::abs(av - fd) / std::max(std::abs(av), std::abs(fd));
                CAPTURE(name);
                CAPTURE(i);
                CHECK(rel < 1e-4);
            }
        };
        fd_check(plain[0].visual, "s0.visual");
        fd_check(plain[1].raw, "s1.raw");
        fd_check(plain[2].onto, "s2.onto");
        fd_check(plain[0].subs[0], "s0.sub0");
        fd_check(plain[1].patches[1], "s1.patches", d); // second patch row
    }
}
