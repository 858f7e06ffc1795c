#include "omake/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omake/errors.hpp"

namespace omake::harness {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void RunConfig::validate() const {
    if (train.batch_size < 2) {
        throw ConfigError("config: batch_size must be >= 2 for contrastive terms");
    }
    if (eval.split_fraction < 0.0 || eval.split_fraction >= 1.0) {
        throw ConfigError("config: split_fraction must be in [0, 1)");
    }
    if (eval.prompt_template != "path" && eval.prompt_template != "plain") {
        throw ConfigError("config: prompt_template must be 'path' or 'plain'");
    }
    if (corpus.jsonl.empty() == !corpus.synthetic.has_value()) {
        throw ConfigError("config: corpus must name either a jsonl file or a synthetic section");
    }
    if (!corpus.jsonl.empty() && corpus.ontology.empty()) {
        throw ConfigError("config: a jsonl corpus requires an ontology path");
    }
    encoder.validate();
    loss.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    reject_unknown(j, {"seed", "corpus", "encoder", "loss", "train", "eval"}, "the top level");

    RunConfig cfg;
    read(j, "seed", cfg.seed);

    if (j.contains("corpus")) {
        const json& c = j["corpus"];
        reject_unknown(c, {"jsonl", "ontology", "synthetic"}, "corpus");
        read(c, "jsonl", cfg.corpus.jsonl);
        read(c, "ontology", cfg.corpus.ontology);
        if (c.contains("synthetic")) {
            const json& s = c["synthetic"];
            reject_unknown(s,
                           {"depth", "branching", "samples_per_leaf", "image_side", "patch_count",
                            "caption_noise_rate", "image_noise", "seed"},
                           "corpus.synthetic");
            corpus::SyntheticCorpusConfig sc;
            read(s, "depth", sc.depth);
            read(s, "branching", sc.branching);
            read(s, "samples_per_leaf", sc.samples_per_leaf);
            read(s, "image_side", sc.image_side);
            read(s, "patch_count", sc.patch_count);
            read(s, "caption_noise_rate", sc.caption_noise_rate);
            read(s, "image_noise", sc.image_noise);
            read(s, "seed", sc.seed);
            cfg.corpus.synthetic = sc;
        }
    }

    if (j.contains("encoder")) {
        const json& e = j["encoder"];
        reject_unknown(e,
                       {"embed_dim", "image_side", "patch_grid", "vision_layers", "text_layers",
                        "vocab_size", "context_length", "temperature"},
                       "encoder");
        read(e, "embed_dim", cfg.encoder.embed_dim);
        read(e, "image_side", cfg.encoder.image_side);
        read(e, "patch_grid", cfg.encoder.patch_grid);
        read(e, "vision_layers", cfg.encoder.vision_layers);
        read(e, "text_layers", cfg.encoder.text_layers);
        read(e, "vocab_size", cfg.encoder.vocab_size);
        read(e, "context_length", cfg.encoder.context_length);
        read(e, "temperature", cfg.encoder.temperature);
    }

    if (j.contains("loss")) {
        const json& l = j["loss"];
        reject_unknown(l,
                       {"tau", "tau_s", "beta", "lambda", "use_knowledge_captions",
                        "use_subcaptions", "use_fga", "use_ontology_softlabels",
                        "use_ontology_weighting", "fga_reduction"},
                       "loss");
        read(l, "tau", cfg.loss.tau);
        read(l, "tau_s", cfg.loss.tau_s);
        read(l, "beta", cfg.loss.beta);
        read(l, "lambda", cfg.loss.lambda);
        read(l, "use_knowledge_captions", cfg.loss.use_knowledge_captions);
        read(l, "use_subcaptions", cfg.loss.use_subcaptions);
        read(l, "use_fga", cfg.loss.use_fga);
        read(l, "use_ontology_softlabels", cfg.loss.use_ontology_softlabels);
        read(l, "use_ontology_weighting", cfg.loss.use_ontology_weighting);
        if (l.contains("fga_reduction")) {
            const std::string r = l["fga_reduction"].get<std::string>();
            if (r == "sum") {
                cfg.loss.fga_reduction = losses::LossConfig::FgaReduction::sum;
            } else if (r == "mean") {
                cfg.loss.fga_reduction = losses::LossConfig::FgaReduction::mean;
            } else {
                throw ConfigError("config: fga_reduction must be 'sum' or 'mean'");
            }
        }
    }

    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, {"epochs", "batch_size", "learning_rate", "weight_decay", "warmup_steps"},
                       "train");
        read(t, "epochs", cfg.train.epochs);
        read(t, "batch_size", cfg.train.batch_size);
        read(t, "learning_rate", cfg.train.learning_rate);
        read(t, "weight_decay", cfg.train.weight_decay);
        read(t, "warmup_steps", cfg.train.warmup_steps);
    }

    if (j.contains("eval")) {
        const json& e = j["eval"];
        reject_unknown(e, {"split_fraction", "long_tail_threshold", "prompt_template"}, "eval");
        read(e, "split_fraction", cfg.eval.split_fraction);
        read(e, "long_tail_threshold", cfg.eval.long_tail_threshold);
        read(e, "prompt_template", cfg.eval.prompt_template);
    }

    if (const char* env = std::getenv("OMAKE_SEED")) {
        try {
            cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("config: OMAKE_SEED must be an unsigned integer, got '" +
                              std::string(env) + "'");
        }
    }

    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_run_config(buf.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
    ordered_json j;
    j["seed"] = cfg.seed;
    ordered_json c;
    if (cfg.corpus.synthetic) {
        const auto& s = *cfg.corpus.synthetic;
        c["synthetic"] = ordered_json{{"depth", s.depth},
                                      {"branching", s.branching},
                                      {"samples_per_leaf", s.samples_per_leaf},
                                      {"image_side", s.image_side},
                                      {"patch_count", s.patch_count},
                                      {"caption_noise_rate", s.caption_noise_rate},
                                      {"image_noise", s.image_noise},
                                      {"seed", s.seed}};
    } else {
        c["jsonl"] = cfg.corpus.jsonl;
        c["ontology"] = cfg.corpus.ontology;
    }
    j["corpus"] = c;
    j["encoder"] = ordered_json{{"embed_dim", cfg.encoder.embed_dim},
                                {"image_side", cfg.encoder.image_side},
                                {"patch_grid", cfg.encoder.patch_grid},
                                {"vision_layers", cfg.encoder.vision_layers},
                                {"text_layers", cfg.encoder.text_layers},
                                {"vocab_size", cfg.encoder.vocab_size},
                                {"context_length", cfg.encoder.context_length},
                                {"temperature", cfg.encoder.temperature}};
    j["loss"] = ordered_json{
        {"tau", cfg.loss.tau},
        {"tau_s", cfg.loss.tau_s},
        {"beta", cfg.loss.beta},
        {"lambda", cfg.loss.lambda},
        {"use_knowledge_captions", cfg.loss.use_knowledge_captions},
        {"use_subcaptions", cfg.loss.use_subcaptions},
        {"use_fga", cfg.loss.use_fga},
        {"use_ontology_softlabels", cfg.loss.use_ontology_softlabels},
        {"use_ontology_weighting", cfg.loss.use_ontology_weighting},
        {"fga_reduction",
         cfg.loss.fga_reduction == losses::LossConfig::FgaReduction::sum ? "sum" : "mean"}};
    j["train"] = ordered_json{{"epochs", cfg.train.epochs},
                              {"batch_size", cfg.train.batch_size},
                              {"learning_rate", cfg.train.learning_rate},
                              {"weight_decay", cfg.train.weight_decay},
                              {"warmup_steps", cfg.train.warmup_steps}};
    j["eval"] = ordered_json{{"split_fraction", cfg.eval.split_fraction},
                             {"long_tail_threshold", cfg.eval.long_tail_threshold},
                             {"prompt_template", cfg.eval.prompt_template}};
    return j.dump(2);
}

} // namespace omake::harness
