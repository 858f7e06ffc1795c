#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "omake/corpus.hpp"
#include "omake/encoders.hpp"
#include "omake/losses.hpp"

namespace omake::harness {

struct CorpusSource {
    std::string jsonl;    // path to a sample JSONL file
    std::string ontology; // path to the ontology TSV (required with jsonl)
    std::optional<corpus::SyntheticCorpusConfig> synthetic;
};

struct TrainParams {
    std::size_t epochs = 5;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double weight_decay = 0.1;
    std::size_t warmup_steps = 50;
};

struct EvalParams {
    double split_fraction = 0.25;       // held-out fraction
    std::size_t long_tail_threshold = 15; // classes with <= this many eval samples are tail
    std::string prompt_template = "path"; // "path" | "plain"
};

// Desk-scale defaults. The configuration the original setup trained with
// (batch 2048, 15 epochs, lr 1e-4, warmup 1500) is documented in the README
// but far exceeds what a laptop-scale run needs.
struct RunConfig {
    std::uint64_t seed = 42;
    CorpusSource corpus;
    encoders::EncoderConfig encoder;
    losses::LossConfig loss;
    TrainParams train;
    EvalParams eval;

    void validate() const;
};

// Strict parse: unknown keys anywhere are configuration errors. The
// OMAKE_SEED environment variable, when set, overrides the configured seed.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

std::string run_config_to_json(const RunConfig& cfg);

} // namespace omake::harness
