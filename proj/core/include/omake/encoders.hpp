#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "omake/corpus.hpp"
#include "omake/graph.hpp"
#include "omake/param_store.hpp"

namespace omake::encoders {

struct EncoderConfig {
    std::size_t embed_dim = 64;       // d
    std::size_t image_side = 32;      // input resolution, must divide by patch_grid
    std::size_t patch_grid = 4;       // patches per image side, HW = patch_grid^2
    std::size_t vision_layers = 2;
    std::size_t text_layers = 2;
    std::size_t vocab_size = 512;     // hash buckets, id 0 reserved for empty text
    std::size_t context_length = 77;
    double temperature = 0.07;        // tau carried alongside the encoders

    std::size_t patch_tokens() const { return patch_grid * patch_grid; }
    std::size_t patch_pixels() const {
        const std::size_t side = image_side / patch_grid;
        return side * side;
    }
    void validate() const;
};

// Whitespace/punctuation tokens hashed into [1, vocab). Empty text maps to
// the reserved null token so it still has a learned embedding.
std::vector<std::size_t> hash_tokens(std::string_view text, std::size_t vocab_size,
                                     std::size_t context_length);

// Per-sample embeddings on the graph; all vectors are L2-normalized.
struct BundleValues {
    numerics::Value visual;                 // (d)
    numerics::Value patches;                // (HW x d), rows unit length
    numerics::Value raw;                    // (d)
    numerics::Value onto;                   // (d)
    numerics::Value concept_vec;                // (d)
    std::vector<numerics::Value> subs;      // N_i entries, each (d)
};

// Plain-float view, for evaluation with frozen parameters.
struct EmbeddingBundle {
    std::vector<double> visual;
    numerics::Tensor patches;               // (HW x d)
    std::vector<double> raw;
    std::vector<double> onto;
    std::vector<double> concept_vec;
    std::vector<std::vector<double>> subs;
};

// Patch-projection + self-attention vision tower and a hash-token text tower
// sharing one parameter store. Construction creates any missing parameters
// (in a fixed order, which defines checkpoint layout) and validates shapes
// against an already-loaded store.
class EncoderModel {
public:
    EncoderModel(EncoderConfig cfg, numerics::ParamStore& store, std::uint64_t init_seed);

    const EncoderConfig& config() const { return cfg_; }
    numerics::ParamStore& params() { return *store_; }
    const numerics::ParamStore& params() const { return *store_; }

    // (patches HW x d with unit rows, visual d unit). The visual embedding is
    // the normalized mean of the pre-normalization patch outputs.
    std::pair<numerics::Value, numerics::Value> encode_image(numerics::Graph& g,
                                                             const corpus::ImageGrid& image) const;
    numerics::Value encode_text(numerics::Graph& g, std::string_view text) const;
    BundleValues encode_bundle(numerics::Graph& g, const corpus::Sample& sample) const;

    // Frozen-parameter helpers running a private graph.
    EmbeddingBundle encode_bundle_eval(const corpus::Sample& sample) const;
    std::vector<double> encode_text_eval(std::string_view text) const;
    std::vector<double> encode_visual_eval(const corpus::ImageGrid& image) const;

private:
    numerics::Value linear(numerics::Graph& g, numerics::Value x, const std::string& prefix) const;
    numerics::Value attention_block(numerics::Graph& g, numerics::Value x,
                                    const std::string& prefix) const;

    EncoderConfig cfg_;
    numerics::ParamStore* store_;
};

} // namespace omake::encoders
