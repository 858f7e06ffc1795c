#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omake/harness/config.hpp"
#include "omake/optimizer.hpp"

namespace omake::harness {

struct LoadedCorpus {
    ontology::OntologyTree tree;
    std::vector<corpus::Sample> samples;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> eval_indices;

    std::vector<const corpus::Sample*> train_view() const;
    std::vector<const corpus::Sample*> eval_view() const;
};

// Load or generate the corpus and carve the deterministic train/eval split
// (seeded shuffle over id-sorted samples).
LoadedCorpus load_corpus(const RunConfig& cfg);

struct TrainResult {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
    std::size_t steps = 0;
    double first_loss = 0.0;
    double last_loss = 0.0;
};

// Deterministic training run. Writes <out_dir>/checkpoint.omke, a per-step
// loss breakdown JSONL and a meta.json with the resolved config. A non-finite
// loss or gradient aborts after writing the last good checkpoint.
TrainResult train(const RunConfig& cfg, const std::filesystem::path& out_dir);

struct EvalReport {
    double overall_accuracy = 0.0;
    double tail_accuracy = 0.0;
    std::size_t sample_count = 0;
    std::size_t tail_sample_count = 0;
    std::map<std::string, double> per_class_accuracy;
    std::map<std::string, std::size_t> per_class_count;
    std::vector<std::string> tail_classes;
    // retrieval recalls keyed by k, present after retrieval_eval
    std::map<std::size_t, double> recall_i2t;
    std::map<std::size_t, double> recall_t2i;

    std::string to_json() const;
};

// Zero-shot classification: argmax cosine against class prompt embeddings,
// ties broken by lexicographically smaller class name.
EvalReport zero_shot_classify(const encoders::EncoderModel& model,
                              const std::vector<const corpus::Sample*>& samples,
                              const std::map<std::string, std::string>& class_prompts,
                              std::size_t long_tail_threshold);

// Prompt text per class label present in `samples`. "path" templates embed
// the ontology path; "plain" uses the bare class name.
std::map<std::string, std::string> build_class_prompts(
    const ontology::OntologyTree& tree, const std::vector<const corpus::Sample*>& samples,
    const std::string& template_mode);

// recall@k for image-to-text and text-to-image over raw captions; candidates
// ranked by (score desc, sample id asc).
EvalReport retrieval_eval(const encoders::EncoderModel& model,
                          const std::vector<const corpus::Sample*>& samples,
                          const std::vector<std::size_t>& ks = {10, 50, 100});

struct GradCheckReport {
    bool pass = false;
    double max_rel_error = 0.0;
    std::string worst_parameter;
    std::size_t elements_checked = 0;
    double threshold = 1e-4;
    double step = 3e-6;
    double runtime_seconds = 0.0;

    std::string to_string() const;
};

// Tiny default configuration for gradient checking (B=4, HW=16, d=8).
RunConfig gradcheck_default_config();

// Central finite differences of the full objective against the analytic
// gradients for every parameter element. `corrupt_parameter`, when set,
// perturbs that parameter's first analytic gradient entry (negative control).
GradCheckReport gradcheck(const RunConfig& cfg, const std::string& corrupt_parameter = {},
                          double step = 3e-6, double threshold = 1e-4);

// One line per sample: {"id","label","visual":[...]}.
void export_embeddings(const encoders::EncoderModel& model,
                       const std::vector<const corpus::Sample*>& samples,
                       const std::filesystem::path& out_path);

// Helpers shared by the CLI and tests.
encoders::EncoderModel load_model(const RunConfig& cfg, numerics::ParamStore& store,
                                  const std::filesystem::path& checkpoint);
void parallel_for(std::size_t n, std::size_t max_threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace omake::harness
