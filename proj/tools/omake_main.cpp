// omake command-line interface: training, evaluation, retrieval, gradient
// checking, embedding export, synthetic corpus generation and the MAGEN
// augmentation workflow.

#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "omake/errors.hpp"
#include "omake/harness/config.hpp"
#include "omake/harness/harness.hpp"
#include "omake/magen/agent.hpp"
#include "omake/magen/knowledge_base.hpp"
#include "omake/magen/pipeline.hpp"

namespace {

using namespace omake;

struct CommonOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<std::string> prompt_template;
};

harness::RunConfig resolve_config(const std::string& path, const CommonOverrides& o) {
    harness::RunConfig cfg = harness::load_run_config(path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.batch_size) cfg.train.batch_size = *o.batch_size;
    if (o.learning_rate) cfg.train.learning_rate = *o.learning_rate;
    if (o.prompt_template) cfg.eval.prompt_template = *o.prompt_template;
    cfg.validate();
    return cfg;
}

std::vector<const corpus::Sample*> pick_split(const harness::LoadedCorpus& corpus,
                                              const std::string& split) {
    if (split == "train") return corpus.train_view();
    if (split == "eval") return corpus.eval_view();
    if (split == "all") {
        std::vector<const corpus::Sample*> all;
        all.reserve(corpus.samples.size());
        for (const auto& s : corpus.samples) all.push_back(&s);
        return all;
    }
    throw ConfigError("split must be one of train|eval|all, got '" + split + "'");
}

std::unique_ptr<magen::AgentBackend> make_backend(const std::string& spec) {
    if (spec == "mock") return std::make_unique<magen::MockBackend>();
    if (spec.rfind("http:", 0) == 0) {
        return std::make_unique<magen::HttpBackend>(spec.substr(5));
    }
    throw ConfigError("backend must be 'mock' or 'http:URL', got '" + spec + "'");
}

void write_or_print(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << std::endl;
        return;
    }
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw IoError("cannot open '" + out_path + "' for writing");
    os << text << '\n';
}

int run(int argc, char** argv) {
    CLI::App app{"ontology-guided multi-aspect contrastive pretraining harness"};
    app.require_subcommand(1);

    CommonOverrides overrides;
    std::string config_path, out_path, checkpoint_path, split = "eval";

    // --- train ---------------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "train on the configured corpus");
    cmd_train->add_option("--config", config_path, "run configuration JSON")->required();
    cmd_train->add_option("--out", out_path, "output directory")->required();
    cmd_train->add_option("--seed", overrides.seed, "override the config seed");
    cmd_train->add_option("--epochs", overrides.epochs, "override epochs");
    cmd_train->add_option("--batch-size", overrides.batch_size, "override batch size");
    cmd_train->add_option("--lr", overrides.learning_rate, "override learning rate");
    cmd_train->callback([&]() {
        const harness::RunConfig cfg = resolve_config(config_path, overrides);
        const harness::TrainResult r = harness::train(cfg, out_path);
        std::cout << "checkpoint: " << r.checkpoint.string() << "\n"
                  << "metrics: " << r.metrics.string() << "\n"
                  << "steps: " << r.steps << "\n"
                  << "first_loss: " << r.first_loss << "\n"
                  << "last_loss: " << r.last_loss << std::endl;
    });

    // --- eval ----------------------------------------------------------
    auto* cmd_eval = app.add_subcommand("eval", "zero-shot classification report");
    std::string report_out;
    cmd_eval->add_option("--config", config_path, "run configuration JSON")->required();
    cmd_eval->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    cmd_eval->add_option("--split", split, "train|eval|all (default eval)");
    cmd_eval->add_option("--template", overrides.prompt_template, "prompt template: path|plain");
    cmd_eval->add_option("--seed", overrides.seed, "override the config seed");
    cmd_eval->add_option("--out", report_out, "write the JSON report here instead of stdout");
    cmd_eval->callback([&]() {
        const harness::RunConfig cfg = resolve_config(config_path, overrides);
        const harness::LoadedCorpus corpus = harness::load_corpus(cfg);
        numerics::ParamStore store;
        const encoders::EncoderModel model = harness::load_model(cfg, store, checkpoint_path);
        const auto view = pick_split(corpus, split);
        const auto prompts =
            harness::build_class_prompts(corpus.tree, view, cfg.eval.prompt_template);
        const harness::EvalReport report =
            harness::zero_shot_classify(model, view, prompts, cfg.eval.long_tail_threshold);
        write_or_print(report.to_json(), report_out);
    });

    // --- retrieve ------------------------------------------------------
    auto* cmd_retrieve = app.add_subcommand("retrieve", "cross-modal recall@k report");
    std::vector<std::size_t> ks = {10, 50, 100};
    std::string retrieve_split = "all";
    cmd_retrieve->add_option("--config", config_path, "run configuration JSON")->required();
    cmd_retrieve->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    cmd_retrieve->add_option("--ks", ks, "recall cutoffs (default 10 50 100)");
    cmd_retrieve->add_option("--split", retrieve_split, "train|eval|all (default all)");
    cmd_retrieve->add_option("--seed", overrides.seed, "override the config seed");
    cmd_retrieve->add_option("--out", report_out, "write the JSON report here instead of stdout");
    cmd_retrieve->callback([&]() {
        const harness::RunConfig cfg = resolve_config(config_path, overrides);
        const harness::LoadedCorpus corpus = harness::load_corpus(cfg);
        numerics::ParamStore store;
        const encoders::EncoderModel model = harness::load_model(cfg, store, checkpoint_path);
        const auto view = pick_split(corpus, retrieve_split);
        const harness::EvalReport report = harness::retrieval_eval(model, view, ks);
        write_or_print(report.to_json(), report_out);
    });

    // --- export --------------------------------------------------------
    auto* cmd_export = app.add_subcommand("export", "export visual embeddings as JSONL");
    std::string export_split = "all";
    cmd_export->add_option("--config", config_path, "run configuration JSON")->required();
    cmd_export->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    cmd_export->add_option("--out", out_path, "output JSONL path")->required();
    cmd_export->add_option("--split", export_split, "train|eval|all (default all)");
    cmd_export->add_option("--seed", overrides.seed, "override the config seed");
    cmd_export->callback([&]() {
        const harness::RunConfig cfg = resolve_config(config_path, overrides);
        const harness::LoadedCorpus corpus = harness::load_corpus(cfg);
        numerics::ParamStore store;
        const encoders::EncoderModel model = harness::load_model(cfg, store, checkpoint_path);
        harness::export_embeddings(model, pick_split(corpus, export_split), out_path);
        std::cout << "wrote " << out_path << std::endl;
    });

    // --- gradcheck -----------------------------------------------------
    auto* cmd_gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference check");
    std::string corrupt;
    double step = 3e-6;
    cmd_gradcheck->add_option("--config", config_path,
                              "run configuration JSON (default: built-in toy config)");
    cmd_gradcheck->add_option("--step", step, "finite-difference step (default 3e-6)");
    cmd_gradcheck->add_option("--corrupt", corrupt,
                              "perturb this parameter's analytic gradient (negative control)");
    cmd_gradcheck->callback([&]() {
        const harness::RunConfig cfg = config_path.empty()
                                           ? harness::gradcheck_default_config()
                                           : resolve_config(config_path, overrides);
        const harness::GradCheckReport report = harness::gradcheck(cfg, corrupt, step);
        std::cout << report.to_string() << std::endl;
        if (!report.pass) throw ConfigError("gradient check failed");
    });

    // --- synth ---------------------------------------------------------
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic corpus");
    cmd_synth->add_option("--config", config_path,
                          "run configuration JSON with a corpus.synthetic section")
        ->required();
    cmd_synth->add_option("--out", out_path, "output directory")->required();
    cmd_synth->add_option("--seed", overrides.seed, "override the config seed");
    cmd_synth->callback([&]() {
        const harness::RunConfig cfg = resolve_config(config_path, overrides);
        if (!cfg.corpus.synthetic) {
            throw ConfigError("synth requires a corpus.synthetic section");
        }
        const corpus::SyntheticCorpus syn = corpus::generate_synthetic(*cfg.corpus.synthetic);
        std::filesystem::create_directories(out_path);
        const auto dir = std::filesystem::path(out_path);
        corpus::save_jsonl(syn.samples, dir / "corpus.jsonl");
        std::ofstream tree_os(dir / "ontology.tsv", std::ios::trunc);
        tree_os << syn.tree.to_text();
        std::cout << "wrote " << (dir / "corpus.jsonl").string() << " ("
                  << syn.samples.size() << " samples) and " << (dir / "ontology.tsv").string()
                  << std::endl;
    });

    // --- augment ---------------------------------------------------------
    auto* cmd_augment = app.add_subcommand("augment", "MAGEN caption augmentation");
    std::string in_path, kb_dir, backend_spec = "mock", records_path;
    double threshold = 0.7;
    std::size_t max_inflight = 4;
    cmd_augment->add_option("--in", in_path, "input pairs JSONL")->required();
    cmd_augment->add_option("--out", out_path, "augmented JSONL output")->required();
    cmd_augment->add_option("--kb", kb_dir, "knowledge base directory")->required();
    cmd_augment->add_option("--threshold", threshold, "similarity routing threshold (default 0.7)");
    cmd_augment->add_option("--backend", backend_spec, "mock | http:URL (default mock)");
    cmd_augment->add_option("--checkpoint", checkpoint_path,
                            "encoder checkpoint for scoring/diagnosis (requires --config)");
    cmd_augment->add_option("--config", config_path, "run configuration JSON for the encoder");
    cmd_augment->add_option("--records", records_path, "write per-sample records JSONL here");
    cmd_augment->add_option("--max-inflight", max_inflight, "parallel samples (default 4)");
    cmd_augment->callback([&]() {
        const std::vector<corpus::Sample> samples = corpus::load_jsonl(in_path);
        magen::KnowledgeBase kb(kb_dir);

        std::unique_ptr<magen::AgentBackend> backend = make_backend(backend_spec);
        std::unique_ptr<magen::PairScorer> scorer;
        std::unique_ptr<magen::DiagnosisRanker> ranker;
        std::optional<harness::RunConfig> cfg;
        numerics::ParamStore store;
        std::optional<encoders::EncoderModel> model;
        if (!checkpoint_path.empty()) {
            if (config_path.empty()) {
                throw ConfigError("augment with --checkpoint also needs --config");
            }
            cfg = resolve_config(config_path, overrides);
            model.emplace(harness::load_model(*cfg, store, checkpoint_path));
            scorer = std::make_unique<magen::EncoderScorer>(*model);
            ranker = std::make_unique<magen::EncoderRanker>(*model);
        } else {
            scorer = std::make_unique<magen::LexicalScorer>();
            ranker = std::make_unique<magen::LexicalRanker>();
        }

        magen::AugmentOptions options;
        options.threshold = threshold;
        options.max_inflight = max_inflight;
        options.log = [](const std::string& msg) { std::cerr << "augment: " << msg << "\n"; };
        const magen::AugmentOutput result =
            magen::augment(samples, kb, *scorer, *ranker, *backend, *backend, options);
        corpus::save_jsonl(result.augmented, out_path);
        if (!records_path.empty()) magen::save_records_jsonl(result.records, records_path);

        std::size_t routed = 0, verified = 0, retained = 0, failed = 0;
        for (const auto& r : result.records) {
            routed += r.routed ? 1 : 0;
            verified += r.provenance == "verified" ? 1 : 0;
            retained += r.provenance == "initial_retained" ? 1 : 0;
            failed += r.failed ? 1 : 0;
        }
        std::cout << "samples: " << result.records.size() << ", routed: " << routed
                  << ", verified: " << verified << ", initial_retained: " << retained
                  << ", failed: " << failed << "\nwrote " << out_path << std::endl;
    });

    // --- kb ------------------------------------------------------------
    auto* cmd_kb = app.add_subcommand("kb", "knowledge base maintenance");
    cmd_kb->require_subcommand(1);
    auto* kb_build = cmd_kb->add_subcommand("build", "summarize disease profiles into cards");
    std::string profiles_path;
    kb_build->add_option("--profiles", profiles_path,
                         "JSONL with {\"disease\", \"profile\"} per line")
        ->required();
    kb_build->add_option("--kb", kb_dir, "knowledge base directory")->required();
    kb_build->add_option("--backend", backend_spec, "mock | http:URL (default mock)");
    kb_build->callback([&]() {
        std::unique_ptr<magen::AgentBackend> backend = make_backend(backend_spec);
        magen::KnowledgeBase kb(kb_dir);
        std::ifstream is(profiles_path);
        if (!is) throw IoError("cannot open '" + profiles_path + "'");
        std::string line;
        std::size_t line_no = 0, stored = 0, skipped = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError("profiles:" + std::to_string(line_no) + ": " + e.what());
            }
            if (!j.contains("disease") || !j.contains("profile")) {
                throw SchemaError("profiles:" + std::to_string(line_no) +
                                  ": need 'disease' and 'profile'");
            }
            try {
                const magen::SummaryResult out = magen::summarize(
                    j["disease"].get<std::string>(), j["profile"].get<std::string>(), *backend);
                for (const auto& w : out.warnings) std::cerr << "kb build: " << w << "\n";
                kb.store(out.card);
                ++stored;
            } catch (const SchemaError& e) {
                std::cerr << "kb build: skipping '" << j["disease"].get<std::string>()
                          << "': " << e.what() << "\n";
                ++skipped;
            }
        }
        std::cout << "stored " << stored << " cards (" << skipped << " skipped) in " << kb_dir
                  << std::endl;
    });
    auto* kb_list = cmd_kb->add_subcommand("list", "list stored cards");
    kb_list->add_option("--kb", kb_dir, "knowledge base directory")->required();
    kb_list->callback([&]() {
        magen::KnowledgeBase kb(kb_dir);
        for (const auto& n : kb.names()) std::cout << n << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return omake::is_validation_error(e) ? 1 : 2;
    }
}
