#include "omake/harness/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "omake/errors.hpp"
#include "omake/losses.hpp"
#include "omake/rng.hpp"

namespace omake::harness {

using numerics::Graph;
using numerics::Rng;
using numerics::Tensor;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kEpochStreamBase = 100;

} // namespace

std::vector<const corpus::Sample*> LoadedCorpus::train_view() const {
    std::vector<const corpus::Sample*> out;
    out.reserve(train_indices.size());
    for (std::size_t i : train_indices) out.push_back(&samples[i]);
    return out;
}

std::vector<const corpus::Sample*> LoadedCorpus::eval_view() const {
    std::vector<const corpus::Sample*> out;
    out.reserve(eval_indices.size());
    for (std::size_t i : eval_indices) out.push_back(&samples[i]);
    return out;
}

LoadedCorpus load_corpus(const RunConfig& cfg) {
    cfg.validate();
    LoadedCorpus out;
    if (cfg.corpus.synthetic) {
        corpus::SyntheticCorpus syn = corpus::generate_synthetic(*cfg.corpus.synthetic);
        out.tree = std::move(syn.tree);
        out.samples = std::move(syn.samples);
    } else {
        out.tree = ontology::OntologyTree::parse_file(cfg.corpus.ontology);
        out.samples = corpus::load_jsonl(cfg.corpus.jsonl, &out.tree);
    }

    std::vector<std::size_t> order(out.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.samples[a].id < out.samples[b].id;
    });
    Rng split_rng = Rng(cfg.seed).fork(kSplitStream);
    split_rng.shuffle(order);

    const std::size_t eval_count =
        static_cast<std::size_t>(std::floor(cfg.eval.split_fraction *
                                            static_cast<double>(order.size())));
    const std::size_t train_count = order.size() - eval_count;
    out.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
    out.eval_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
    return out;
}

TrainResult train(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    LoadedCorpus corpus = load_corpus(cfg);
    if (corpus.train_indices.empty()) throw ConfigError("train: empty training split");

    numerics::ParamStore store;
    encoders::EncoderModel model(cfg.encoder, store, Rng(cfg.seed).fork(kInitStream).next_u64());
    numerics::AdamW optimizer({cfg.train.learning_rate, 0.9, 0.999, 1e-8,
                               cfg.train.weight_decay, cfg.train.warmup_steps});

    const std::filesystem::path ckpt_path = out_dir / "checkpoint.omke";
    const std::filesystem::path metrics_path = out_dir / "metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("train: cannot open '" + metrics_path.string() + "'");

    TrainResult result;
    result.checkpoint = ckpt_path;
    result.metrics = metrics_path;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        std::vector<std::size_t> order = corpus.train_indices;
        Rng epoch_rng = Rng(cfg.seed).fork(kEpochStreamBase + epoch);
        epoch_rng.shuffle(order);

        for (std::size_t at = 0; at < order.size(); at += cfg.train.batch_size) {
            const std::size_t take = std::min(cfg.train.batch_size, order.size() - at);
            if (take < 2) break; // single-sample remainder has no contrastive signal
            std::vector<const corpus::Sample*> batch;
            std::vector<std::string> labels;
            batch.reserve(take);
            for (std::size_t b = 0; b < take; ++b) {
                batch.push_back(&corpus.samples[order[at + b]]);
                labels.push_back(batch.back()->disease_label);
            }

            Graph g;
            std::vector<encoders::BundleValues> bundles;
            bundles.reserve(batch.size());
            for (const corpus::Sample* s : batch) bundles.push_back(model.encode_bundle(g, *s));
            const ontology::SimilarityMatrix sim = ontology::batch_similarity(corpus.tree, labels);

            losses::TotalLoss loss;
            try {
                loss = losses::total_loss(g, bundles, sim, cfg.loss);
                numerics::GradientMap grads = g.backward(loss.value);
                optimizer.step(store, grads);
            } catch (const NumericError& e) {
                store.save(ckpt_path); // parameters are still from the last good step
                throw NumericError(std::string(e.what()) + " (aborted at step " +
                                   std::to_string(step + 1) + ", last-good checkpoint written)");
            }

            ++step;
            if (step == 1) result.first_loss = loss.breakdown.total;
            result.last_loss = loss.breakdown.total;
            ordered_json line;
            line["step"] = step;
            line["mkia_i2t"] = loss.breakdown.mkia_i2t;
            line["mkia_t2i"] = loss.breakdown.mkia_t2i;
            line["fga"] = loss.breakdown.fga;
            line["total"] = loss.breakdown.total;
            metrics << line.dump() << '\n';
        }
    }
    metrics.flush();
    result.steps = step;
    store.save(ckpt_path);

    std::ofstream meta(out_dir / "meta.json", std::ios::trunc);
    meta << run_config_to_json(cfg) << '\n';
    return result;
}

void parallel_for(std::size_t n, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const std::size_t workers = std::max<std::size_t>(1, std::min({max_threads, hw, n}));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        threads.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : threads) t.join();
}

std::map<std::string, std::string> build_class_prompts(
    const ontology::OntologyTree& tree, const std::vector<const corpus::Sample*>& samples,
    const std::string& template_mode) {
    std::set<std::string> classes;
    for (const corpus::Sample* s : samples) classes.insert(s->disease_label);
    std::map<std::string, std::string> prompts;
    for (const std::string& c : classes) {
        if (template_mode == "plain") {
            prompts[c] = c;
            continue;
        }
        if (!tree.contains(c)) {
            throw ConfigError("prompts: class '" + c + "' is missing from the ontology");
        }
        const std::vector<std::string> path = tree.path_to_root(c);
        std::string path_str = path[0];
        for (std::size_t i = 1; i < path.size(); ++i) path_str += " > " + path[i];
        prompts[c] = "a photo of " + c + ", " + path_str;
    }
    return prompts;
}

EvalReport zero_shot_classify(const encoders::EncoderModel& model,
                              const std::vector<const corpus::Sample*>& samples,
                              const std::map<std::string, std::string>& class_prompts,
                              std::size_t long_tail_threshold) {
    std::set<std::string> classes;
    for (const corpus::Sample* s : samples) classes.insert(s->disease_label);
    for (const std::string& c : classes) {
        if (!class_prompts.count(c)) {
            throw ConfigError("zero_shot: no prompt configured for class '" + c + "'");
        }
    }
    std::vector<std::string> class_names(classes.begin(), classes.end()); // lexicographic
    std::vector<std::vector<double>> class_embeds(class_names.size());
    parallel_for(class_names.size(), 8, [&](std::size_t i) {
        class_embeds[i] = model.encode_text_eval(class_prompts.at(class_names[i]));
    });

    std::vector<std::size_t> predictions(samples.size());
    parallel_for(samples.size(), 8, [&](std::size_t i) {
        const std::vector<double> visual = model.encode_visual_eval(samples[i]->image);
        std::size_t best = 0;
        double best_score = numerics::cosine(visual, class_embeds[0]);
        for (std::size_t c = 1; c < class_embeds.size(); ++c) {
            const double score = numerics::cosine(visual, class_embeds[c]);
            if (score > best_score) { // ties keep the lexicographically smaller class
                best_score = score;
                best = c;
            }
        }
        predictions[i] = best;
    });

    EvalReport report;
    report.sample_count = samples.size();
    std::map<std::string, std::size_t> correct;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string& label = samples[i]->disease_label;
        report.per_class_count[label] += 1;
        if (class_names[predictions[i]] == label) correct[label] += 1;
    }
    std::size_t total_correct = 0;
    std::size_t tail_correct = 0;
    for (const auto& [label, count] : report.per_class_count) {
        const std::size_t ok = correct.count(label) ? correct[label] : 0;
        total_correct += ok;
        report.per_class_accuracy[label] =
            static_cast<double>(ok) / static_cast<double>(count);
        if (count <= long_tail_threshold) {
            report.tail_classes.push_back(label);
            report.tail_sample_count += count;
            tail_correct += ok;
        }
    }
    report.overall_accuracy = samples.empty()
                                  ? 0.0
                                  : static_cast<double>(total_correct) /
                                        static_cast<double>(samples.size());
    report.tail_accuracy = report.tail_sample_count == 0
                               ? 0.0
                               : static_cast<double>(tail_correct) /
                                     static_cast<double>(report.tail_sample_count);
    return report;
}

EvalReport retrieval_eval(const encoders::EncoderModel& model,
                          const std::vector<const corpus::Sample*>& samples,
                          const std::vector<std::size_t>& ks) {
    const std::size_t n = samples.size();
    for (std::size_t k : ks) {
        if (k == 0 || k > n) {
            throw ParameterError("retrieval: k=" + std::to_string(k) +
                                 " outside [1, corpus size=" + std::to_string(n) + "]");
        }
    }
    std::vector<std::vector<double>> visual(n), text(n);
    parallel_for(n, 8, [&](std::size_t i) {
        visual[i] = model.encode_visual_eval(samples[i]->image);
        text[i] = model.encode_text_eval(samples[i]->raw_caption);
    });

    // rank of the true partner: candidates ordered by (score desc, id asc)
    auto rank_of_truth = [&](const std::vector<double>& query, std::size_t truth,
                             const std::vector<std::vector<double>>& candidates) {
        const double true_score = numerics::cosine(query, candidates[truth]);
        std::size_t rank = 0;
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            if (j == truth) continue;
            const double s = numerics::cosine(query, candidates[j]);
            if (s > true_score || (s == true_score && samples[j]->id < samples[truth]->id)) {
                ++rank;
            }
        }
        return rank;
    };

    std::vector<std::size_t> i2t_rank(n), t2i_rank(n);
    parallel_for(n, 8, [&](std::size_t i) {
        i2t_rank[i] = rank_of_truth(visual[i], i, text);
        t2i_rank[i] = rank_of_truth(text[i], i, visual);
    });

    EvalReport report;
    report.sample_count = n;
    for (std::size_t k : ks) {
        std::size_t hit_i2t = 0, hit_t2i = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i2t_rank[i] < k) ++hit_i2t;
            if (t2i_rank[i] < k) ++hit_t2i;
        }
        report.recall_i2t[k] = static_cast<double>(hit_i2t) / static_cast<double>(n);
        report.recall_t2i[k] = static_cast<double>(hit_t2i) / static_cast<double>(n);
    }
    return report;
}

std::string EvalReport::to_json() const {
    ordered_json j;
    j["sample_count"] = sample_count;
    j["overall_accuracy"] = overall_accuracy;
    j["tail_accuracy"] = tail_accuracy;
    j["tail_sample_count"] = tail_sample_count;
    j["tail_classes"] = tail_classes;
    ordered_json per_class = ordered_json::object();
    for (const auto& [label, acc] : per_class_accuracy) {
        per_class[label] = ordered_json{{"accuracy", acc}, {"count", per_class_count.at(label)}};
    }
    j["per_class"] = per_class;
    if (!recall_i2t.empty()) {
        ordered_json r1 = ordered_json::object(), r2 = ordered_json::object();
        for (const auto& [k, v] : recall_i2t) r1[std::to_string(k)] = v;
        for (const auto& [k, v] : recall_t2i) r2[std::to_string(k)] = v;
        j["recall_i2t"] = r1;
        j["recall_t2i"] = r2;
    }
    return j.dump(2);
}

RunConfig gradcheck_default_config() {
    RunConfig cfg;
    cfg.seed = 42;
    corpus::SyntheticCorpusConfig syn;
    syn.depth = 2;
    syn.branching = {4};
    syn.samples_per_leaf = 1;
    syn.image_side = 8;
    syn.patch_count = 2;
    syn.caption_noise_rate = 0.0;
    syn.seed = 42;
    cfg.corpus.synthetic = syn;
    cfg.encoder.embed_dim = 8;
    cfg.encoder.image_side = 8;
    cfg.encoder.patch_grid = 4; // HW = 16
    cfg.encoder.vision_layers = 1;
    cfg.encoder.text_layers = 1;
    cfg.encoder.vocab_size = 64;
    cfg.encoder.context_length = 16;
    cfg.eval.split_fraction = 0.0;
    cfg.train.batch_size = 4;
    return cfg;
}

GradCheckReport gradcheck(const RunConfig& cfg, const std::string& corrupt_parameter,
                          double step, double threshold) {
    const auto started = std::chrono::steady_clock::now();
    cfg.validate();
    LoadedCorpus corpus = load_corpus(cfg);
    const std::size_t b = std::min<std::size_t>(cfg.train.batch_size, corpus.samples.size());
    if (b < 2) throw ConfigError("gradcheck: needs a batch of at least 2 samples");

    std::vector<const corpus::Sample*> batch;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < b; ++i) {
        batch.push_back(&corpus.samples[i]);
        labels.push_back(batch.back()->disease_label);
    }
    // keep sub-caption counts small so the run stays inside the time budget
    const ontology::SimilarityMatrix sim = ontology::batch_similarity(corpus.tree, labels);

    numerics::ParamStore store;
    encoders::EncoderModel model(cfg.encoder, store, Rng(cfg.seed).fork(kInitStream).next_u64());

    // Base forward: captures the stop-gradient weights at the base point so
    // finite differences probe the same function the backward pass sees.
    std::vector<std::vector<double>> frozen_weights;
    losses::LossBreakdown base_breakdown;
    numerics::GradientMap analytic;
    {
        Graph g;
        std::vector<encoders::BundleValues> bundles;
        for (const corpus::Sample* s : batch) bundles.push_back(model.encode_bundle(g, *s));
        for (const auto& bundle : bundles) {
            if (cfg.loss.use_ontology_weighting && !bundle.subs.empty()) {
                frozen_weights.push_back(losses::ontology_guided_weights(
                    g, bundle.onto, bundle.subs));
            } else {
                frozen_weights.push_back(
                    std::vector<double>(std::max<std::size_t>(bundle.subs.size(), 1), 1.0));
            }
        }
        losses::TotalLoss loss = losses::total_loss(g, bundles, sim, cfg.loss, &frozen_weights);
        base_breakdown = loss.breakdown;
        analytic = g.backward(loss.value);
    }
    if (!corrupt_parameter.empty()) {
        auto it = analytic.find(corrupt_parameter);
        if (it == analytic.end()) {
            throw LookupError("gradcheck: unknown parameter '" + corrupt_parameter + "'");
        }
        it->second[0] += 1.0;
    }

    auto loss_at = [&]() {
        Graph g;
        std::vector<encoders::BundleValues> bundles;
        for (const corpus::Sample* s : batch) bundles.push_back(model.encode_bundle(g, *s));
        losses::TotalLoss loss = losses::total_loss(g, bundles, sim, cfg.loss, &frozen_weights);
        return loss.breakdown.total;
    };

    GradCheckReport report;
    report.threshold = threshold;
    report.step = step;
    // Fallback steps cover both failure modes of a fixed step: truncation
    // error on steep elements wants a smaller h, roundoff on tiny-gradient
    // elements wants a larger one.
    const double fallback_steps[] = {step * 3.0, step / 3.0, step * 10.0};
    for (auto& [name, tensor] : store.entries()) {
        const Tensor& grad = analytic.at(name);
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double a = grad[i];
            ++report.elements_checked;
            auto rel_at = [&](double h) {
                const double saved = tensor[i];
                tensor[i] = saved + h;
                const double up = loss_at();
                tensor[i] = saved - h;
                const double down = loss_at();
                tensor[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                // both sides under the roundoff floor count as agreement
                if (std::abs(a) < 1e-7 && std::abs(fd) < 1e-7) return 0.0;
                return std::abs(a - fd) / std::max(std::abs(a), std::abs(fd));
            };
            double rel = rel_at(step);
            for (double h : fallback_steps) {
                if (rel < threshold) break;
                rel = std::min(rel, rel_at(h));
            }
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    report.pass = report.max_rel_error < threshold;
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    (void)base_breakdown;
    return report;
}

std::string GradCheckReport::to_string() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL") << ": max relative error " << max_rel_error << " (threshold "
       << threshold << ", step " << step << ") over " << elements_checked << " elements";
    if (!worst_parameter.empty()) os << ", worst at " << worst_parameter;
    os << ", " << runtime_seconds << " s";
    return os.str();
}

void export_embeddings(const encoders::EncoderModel& model,
                       const std::vector<const corpus::Sample*>& samples,
                       const std::filesystem::path& out_path) {
    std::vector<std::vector<double>> visual(samples.size());
    parallel_for(samples.size(), 8, [&](std::size_t i) {
        visual[i] = model.encode_visual_eval(samples[i]->image);
    });
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw IoError("export: cannot open '" + out_path.string() + "'");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ordered_json j;
        j["id"] = samples[i]->id;
        j["label"] = samples[i]->disease_label;
        j["visual"] = visual[i];
        os << j.dump() << '\n';
    }
    if (!os) throw IoError("export: write to '" + out_path.string() + "' failed");
}

encoders::EncoderModel load_model(const RunConfig& cfg, numerics::ParamStore& store,
                                  const std::filesystem::path& checkpoint) {
    store = numerics::ParamStore::load(checkpoint);
    // Construction validates every parameter shape against the config.
    return encoders::EncoderModel(cfg.encoder, store, Rng(cfg.seed).fork(kInitStream).next_u64());
}

} // namespace omake::harness
