#include "omake/encoders.hpp"

#include <cctype>
#include <cmath>
#include <iterator>

#include "omake/errors.hpp"
#include "omake/rng.hpp"

namespace omake::encoders {

using numerics::Graph;
using numerics::Rng;
using numerics::Shape;
using numerics::Tensor;
using numerics::Value;

void EncoderConfig::validate() const {
    if (embed_dim == 0 || image_side == 0 || patch_grid == 0 || vision_layers == 0 ||
        text_layers == 0 || vocab_size < 2 || context_length == 0) {
        throw ParameterError("encoder config: all dimensions must be positive (vocab >= 2)");
    }
    if (image_side % patch_grid != 0) {
        throw DimensionError("encoder config: image side " + std::to_string(image_side) +
                             " not divisible by patch grid " + std::to_string(patch_grid));
    }
    if (temperature <= 0.0) throw ParameterError("encoder config: temperature must be > 0");
}

std::vector<std::size_t> hash_tokens(std::string_view text, std::size_t vocab_size,
                                     std::size_t context_length) {
    std::vector<std::size_t> ids;
    std::uint64_t h = 1469598103934665603ull; // FNV-1a offset basis
    bool in_token = false;
    auto flush = [&]() {
        if (!in_token) return;
        if (ids.size() < context_length) ids.push_back(1 + h % (vocab_size - 1));
        in_token = false;
        h = 1469598103934665603ull;
    };
    for (char c : text) {
        if (ids.size() >= context_length && !in_token) break;
        if (std::isalnum(static_cast<unsigned char>(c))) {
            const char lc = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(lc));
            h *= 1099511628211ull;
            in_token = true;
        } else {
            flush();
        }
    }
    flush();
    if (ids.empty()) ids.push_back(0); // null token
    if (ids.size() > context_length) ids.resize(context_length);
    return ids;
}

namespace {

constexpr double kEmbedInitStd = 0.02;

} // namespace

EncoderModel::EncoderModel(EncoderConfig cfg, numerics::ParamStore& store, std::uint64_t init_seed)
    : cfg_(cfg), store_(&store) {
    cfg_.validate();
    Rng rng(init_seed);
    const std::size_t d = cfg_.embed_dim;

    auto ensure_embed = [&](const std::string& name, Shape shape) {
        store_->ensure(name, shape, [&]() { return Tensor::randn(shape, rng, kEmbedInitStd); });
    };
    auto ensure_linear = [&](const std::string& name, Shape shape) {
        store_->ensure(name, shape, [&]() {
            const double stddev = 1.0 / std::sqrt(static_cast<double>(shape[0]));
            return Tensor::randn(shape, rng, stddev);
        });
    };

    // Creation order is fixed; it defines the checkpoint layout.
    ensure_embed("text.tok_embed", {cfg_.vocab_size, d});
    ensure_embed("text.pos_embed", {cfg_.context_length, d});
    for (std::size_t l = 0; l < cfg_.text_layers; ++l) {
        const std::string p = "text.layer" + std::to_string(l);
        ensure_linear(p + ".w", {d, d});
        ensure_embed(p + ".b", {d});
    }
    ensure_linear("vision.patch_proj.w", {cfg_.patch_pixels(), d});
    ensure_embed("vision.patch_proj.b", {d});
    for (std::size_t l = 0; l < cfg_.vision_layers; ++l) {
        const std::string p = "vision.layer" + std::to_string(l);
        ensure_linear(p + ".wq", {d, d});
        ensure_linear(p + ".wk", {d, d});
        ensure_linear(p + ".wv", {d, d});
        ensure_linear(p + ".wo", {d, d});
        ensure_linear(p + ".ffn.w", {d, d});
        ensure_embed(p + ".ffn.b", {d});
    }
}

Value EncoderModel::linear(Graph& g, Value x, const std::string& prefix) const {
    Value w = g.param(prefix + ".w", store_->get(prefix + ".w"));
    Value b = g.param(prefix + ".b", store_->get(prefix + ".b"));
    return g.add_rowvec(g.matmul(x, w), b);
}

Value EncoderModel::attention_block(Graph& g, Value x, const std::string& prefix) const {
    const double scale = std::sqrt(static_cast<double>(cfg_.embed_dim));
    Value q = g.matmul(x, g.param(prefix + ".wq", store_->get(prefix + ".wq")));
    Value k = g.matmul(x, g.param(prefix + ".wk", store_->get(prefix + ".wk")));
    Value v = g.matmul(x, g.param(prefix + ".wv", store_->get(prefix + ".wv")));
    Value attn = g.softmax_rows(g.matmul(q, g.transpose(k)), scale);
    Value mixed = g.matmul(g.matmul(attn, v), g.param(prefix + ".wo", store_->get(prefix + ".wo")));
    Value h = g.add(x, mixed);
    Value ffn = g.tanh(g.add_rowvec(g.matmul(h, g.param(prefix + ".ffn.w", store_->get(prefix + ".ffn.w"))),
                                    g.param(prefix + ".ffn.b", store_->get(prefix + ".ffn.b"))));
    return g.add(h, ffn);
}

std::pair<Value, Value> EncoderModel::encode_image(Graph& g, const corpus::ImageGrid& image) const {
    if (image.side % cfg_.patch_grid != 0) {
        throw DimensionError("encode_image: image side " + std::to_string(image.side) +
                             " not divisible by patch grid " + std::to_string(cfg_.patch_grid));
    }
    if (image.side != cfg_.image_side) {
        throw DimensionError("encode_image: image side " + std::to_string(image.side) +
                             " does not match the configured side " +
                             std::to_string(cfg_.image_side));
    }
    const std::size_t grid = cfg_.patch_grid;
    const std::size_t psize = image.side / grid;
    const std::size_t hw = cfg_.patch_tokens();
    const std::size_t pp = cfg_.patch_pixels();

    Tensor flat({hw, pp});
    for (std::size_t pr = 0; pr < grid; ++pr) {
        for (std::size_t pc = 0; pc < grid; ++pc) {
            const std::size_t patch = pr * grid + pc;
            for (std::size_t r = 0; r < psize; ++r) {
                for (std::size_t c = 0; c < psize; ++c) {
                    flat[patch * pp + r * psize + c] = image.at(pr * psize + r, pc * psize + c);
                }
            }
        }
    }

    Value x = g.constant(std::move(flat));
    x = g.add_rowvec(g.matmul(x, g.param("vision.patch_proj.w", store_->get("vision.patch_proj.w"))),
                     g.param("vision.patch_proj.b", store_->get("vision.patch_proj.b")));
    for (std::size_t l = 0; l < cfg_.vision_layers; ++l) {
        x = attention_block(g, x, "vision.layer" + std::to_string(l));
    }
    Value visual = g.l2_normalize_rows(g.mean_pool_rows(x));
    Value patches = g.l2_normalize_rows(x);
    return {patches, visual};
}

Value EncoderModel::encode_text(Graph& g, std::string_view text) const {
    const std::vector<std::size_t> ids =
        hash_tokens(text, cfg_.vocab_size, cfg_.context_length);
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;

    Value tok = g.gather_rows(g.param("text.tok_embed", store_->get("text.tok_embed")), ids);
    Value pos = g.gather_rows(g.param("text.pos_embed", store_->get("text.pos_embed")),
                              std::move(positions));
    Value x = g.add(tok, pos);
    for (std::size_t l = 0; l < cfg_.text_layers; ++l) {
        x = g.tanh(linear(g, x, "text.layer" + std::to_string(l)));
    }
    return g.l2_normalize_rows(g.mean_pool_rows(x));
}

BundleValues EncoderModel::encode_bundle(Graph& g, const corpus::Sample& sample) const {
    BundleValues b;
    auto [patches, visual] = encode_image(g, sample.image);
    b.patches = patches;
    b.visual = visual;
    b.raw = encode_text(g, sample.raw_caption);
    b.onto = encode_text(g, sample.ontology_caption);
    b.concept_vec = encode_text(g, sample.concept_caption);
    b.subs.reserve(sample.sub_captions.size());
    for (const std::string& sc : sample.sub_captions) b.subs.push_back(encode_text(g, sc));
    return b;
}

EmbeddingBundle EncoderModel::encode_bundle_eval(const corpus::Sample& sample) const {
    Graph g;
    BundleValues v = encode_bundle(g, sample);
    EmbeddingBundle out;
    out.visual = g.value(v.visual).values();
    out.patches = g.value(v.patches);
    out.raw = g.value(v.raw).values();
    out.onto = g.value(v.onto).values();
    out.concept_vec = g.value(v.concept_vec).values();
    out.subs.reserve(v.subs.size());
    for (Value s : v.subs) out.subs.push_back(g.value(s).values());
    return out;
}

std::vector<double> EncoderModel::encode_text_eval(std::string_view text) const {
    Graph g;
    return g.value(encode_text(g, text)).values();
}

std::vector<double> EncoderModel::encode_visual_eval(const corpus::ImageGrid& image) const {
    Graph g;
    auto [patches, visual] = encode_image(g, image);
    (void)patches;
    return g.value(visual).values();
}

} // namespace omake::encoders
