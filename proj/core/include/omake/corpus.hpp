#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "omake/ontology.hpp"

namespace omake::corpus {

// Grayscale float grid in [0,1], row-major.
struct ImageGrid {
    std::size_t side = 0;
    std::vector<double> pixels;

    double at(std::size_t r, std::size_t c) const { return pixels[r * side + c]; }
    double& at(std::size_t r, std::size_t c) { return pixels[r * side + c]; }
};

// One image with its caption set. sub_captions is never empty after load:
// when absent it is populated by split_subcaptions (whole caption fallback).
struct Sample {
    std::string id;
    ImageGrid image;
    std::string image_path; // nonempty when the grid came from a file reference
    std::string raw_caption;
    std::string ontology_caption;
    std::string concept_caption;
    std::vector<std::string> sub_captions;
    std::string disease_label;
};

inline constexpr std::size_t kDefaultMaxSubCaptions = 8;

// Sentence split at '.', '!' or '?' followed by whitespace or end of input.
// Segments are trimmed, empties dropped, and anything past n_max merges into
// the final segment. Nonempty input always yields at least one segment.
std::vector<std::string> split_subcaptions(const std::string& raw,
                                           std::size_t n_max = kDefaultMaxSubCaptions);

// One JSON object per line:
//   {"id", "image": {"inline": [[...]]} | {"path": "grid.json"},
//    "raw_caption", "ontology_caption", "concept_caption",
//    "sub_captions" (optional), "disease_label"}
// Image path references resolve relative to the JSONL file and must contain
// a JSON array-of-arrays float grid. When `tree` is given, disease labels
// must resolve in it.
std::vector<Sample> load_jsonl(const std::filesystem::path& path,
                               const ontology::OntologyTree* tree = nullptr,
                               std::size_t n_max_subcaptions = kDefaultMaxSubCaptions);
void save_jsonl(const std::vector<Sample>& samples, const std::filesystem::path& path);

struct SyntheticCorpusConfig {
    std::size_t depth = 3;                   // levels including the root
    std::vector<std::size_t> branching = {3, 4}; // per level below the root
    std::size_t samples_per_leaf = 2;
    std::size_t image_side = 32;
    std::size_t patch_count = 4;             // prototype pattern blocks per side
    double caption_noise_rate = 0.0;         // fraction of samples with degraded captions
    double image_noise = 0.08;               // per-pixel noise amplitude
    std::uint64_t seed = 42;
};

struct SyntheticCorpus {
    ontology::OntologyTree tree;
    std::vector<Sample> samples;
    // class prototype images keyed in leaf order, exposed for tests
    std::vector<std::pair<std::string, ImageGrid>> prototypes;
};

// Balanced taxonomy with per-leaf prototype images and templated captions.
// Fully determined by the config (including the seed).
SyntheticCorpus generate_synthetic(const SyntheticCorpusConfig& config);

} // namespace omake::corpus
