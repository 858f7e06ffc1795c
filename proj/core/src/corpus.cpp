#include "omake/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omake/errors.hpp"
#include "omake/rng.hpp"

namespace omake::corpus {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

} // namespace

std::vector<std::string> split_subcaptions(const std::string& raw, std::size_t n_max) {
    if (raw.empty()) throw ContractError("split_subcaptions: empty input");
    if (n_max == 0) n_max = 1;

    std::vector<std::string> segments;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!is_terminator(raw[i])) continue;
        const bool at_end = i + 1 == raw.size();
        if (!at_end && !std::isspace(static_cast<unsigned char>(raw[i + 1]))) continue;
        std::string seg = trim(std::string_view(raw).substr(start, i + 1 - start));
        if (!seg.empty()) segments.push_back(std::move(seg));
        start = i + 1;
    }
    if (start < raw.size()) {
        std::string tail = trim(std::string_view(raw).substr(start));
        if (!tail.empty()) segments.push_back(std::move(tail));
    }
    if (segments.empty()) return {raw};
    if (segments.size() > n_max) {
        std::string merged = segments[n_max - 1];
        for (std::size_t i = n_max; i < segments.size(); ++i) {
            merged += ' ';
            merged += segments[i];
        }
        segments.resize(n_max - 1);
        segments.push_back(std::move(merged));
    }
    return segments;
}

namespace {

ImageGrid grid_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) {
        throw SchemaError(where + ": image grid must be a nonempty array of arrays");
    }
    const std::size_t side = j.size();
    ImageGrid grid{side, std::vector<double>(side * side, 0.0)};
    for (std::size_t r = 0; r < side; ++r) {
        const auto& row = j[r];
        if (!row.is_array() || row.size() != side) {
            throw SchemaError(where + ": image grid must be square, row " + std::to_string(r) +
                              " has " + std::to_string(row.size()) + " of " +
                              std::to_string(side) + " columns");
        }
        for (std::size_t c = 0; c < side; ++c) grid.at(r, c) = row[c].get<double>();
    }
    return grid;
}

json grid_to_json(const ImageGrid& grid) {
    json rows = json::array();
    for (std::size_t r = 0; r < grid.side; ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < grid.side; ++c) row.push_back(grid.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string require_string(const json& j, const char* field, const std::string& where) {
    if (!j.contains(field)) throw SchemaError(where + ": missing field '" + field + "'");
    if (!j[field].is_string()) throw SchemaError(where + ": field '" + field + "' must be a string");
    return j[field].get<std::string>();
}

} // namespace

std::vector<Sample> load_jsonl(const std::filesystem::path& path,
                               const ontology::OntologyTree* tree,
                               std::size_t n_max_subcaptions) {
    std::ifstream is(path);
    if (!is) throw IoError("corpus: cannot open '" + path.string() + "'");
    std::vector<Sample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.filename().string() + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(where + ": malformed JSON: " + e.what());
        }
        Sample s;
        s.id = require_string(j, "id", where);
        s.raw_caption = require_string(j, "raw_caption", where);
        if (trim(s.raw_caption).empty()) {
            throw SchemaError(where + ": field 'raw_caption' must be nonempty");
        }
        s.ontology_caption = require_string(j, "ontology_caption", where);
        s.concept_caption = require_string(j, "concept_caption", where);
        s.disease_label = require_string(j, "disease_label", where);
        if (!j.contains("image")) throw SchemaError(where + ": missing field 'image'");
        const json& img = j["image"];
        if (img.contains("inline")) {
            s.image = grid_from_json(img["inline"], where);
        } else if (img.contains("path")) {
            s.image_path = img["path"].get<std::string>();
            const std::filesystem::path ref = path.parent_path() / s.image_path;
            std::ifstream gs(ref);
            if (!gs) throw IoError(where + ": cannot open image grid '" + ref.string() + "'");
            json gj;
            try {
                gj = json::parse(gs);
            } catch (const json::exception& e) {
                throw ParseError(where + ": malformed image grid '" + ref.string() +
                                 "': " + e.what());
            }
            s.image = grid_from_json(gj, where);
        } else {
            throw SchemaError(where + ": image must carry 'inline' or 'path'");
        }
        if (j.contains("sub_captions")) {
            for (const auto& sc : j["sub_captions"]) s.sub_captions.push_back(sc.get<std::string>());
            if (s.sub_captions.empty()) s.sub_captions = split_subcaptions(s.raw_caption, n_max_subcaptions);
        } else {
            s.sub_captions = split_subcaptions(s.raw_caption, n_max_subcaptions);
        }
        if (tree && !tree->contains(s.disease_label)) {
            throw SchemaError(where + ": disease_label '" + s.disease_label +
                              "' not present in the ontology");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void save_jsonl(const std::vector<Sample>& samples, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("corpus: cannot open '" + path.string() + "' for writing");
    for (const Sample& s : samples) {
        ordered_json j;
        j["id"] = s.id;
        if (!s.image_path.empty()) {
            j["image"] = ordered_json{{"path", s.image_path}};
        } else {
            j["image"] = ordered_json{{"inline", grid_to_json(s.image)}};
        }
        j["raw_caption"] = s.raw_caption;
        j["ontology_caption"] = s.ontology_caption;
        j["concept_caption"] = s.concept_caption;
        j["sub_captions"] = s.sub_captions;
        j["disease_label"] = s.disease_label;
        os << j.dump() << '\n';
    }
    if (!os) throw IoError("corpus: write to '" + path.string() + "' failed");
}

namespace {

const char* kFamilyWords[] = {"acral",      "bullous",  "cystic",     "dermal",
                              "eczematous", "follicular", "granular", "hyperkeratotic",
                              "indurated",  "lichenoid"};
const char* kGenusWords[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
const char* kLeafWords[] = {"one", "two", "three", "four", "five", "six", "seven", "eight"};

const char* kAttributePhrases[] = {
    "silvery scale",        "erythematous plaques",  "annular borders",
    "follicular papules",   "vesicular clusters",    "lichenified patches",
    "pigmented macules",    "telangiectatic vessels", "crusted erosions",
    "atrophic scarring",    "indurated nodules",     "serpiginous margins",
    "umbilicated papules",  "targetoid lesions",     "sclerotic bands",
    "hypopigmented streaks", "verrucous surfaces",   "petechial speckling",
    "dusky discoloration",  "fissured hyperkeratosis"};

std::string level_word(std::size_t level, std::size_t index) {
    const char* base;
    std::size_t bank;
    if (level == 1) {
        base = kFamilyWords[index % std::size(kFamilyWords)];
        bank = std::size(kFamilyWords);
    } else if (level == 2) {
        base = kGenusWords[index % std::size(kGenusWords)];
        bank = std::size(kGenusWords);
    } else {
        base = kLeafWords[index % std::size(kLeafWords)];
        bank = std::size(kLeafWords);
    }
    std::string w = base;
    if (index >= bank) w += std::to_string(index / bank + 1);
    return w;
}

struct ProtoNode {
    std::string name;
    std::size_t parent;
    std::size_t level; // root = 0
    std::vector<double> pattern; // patch_count x patch_count block values
    std::string attribute;
};

} // namespace

SyntheticCorpus generate_synthetic(const SyntheticCorpusConfig& config) {
    if (config.depth < 2) throw ParameterError("synthetic: depth must be >= 2");
    if (config.branching.size() != config.depth - 1) {
        throw ParameterError("synthetic: branching must list " + std::to_string(config.depth - 1) +
                             " factors, got " + std::to_string(config.branching.size()));
    }
    for (std::size_t b : config.branching) {
        if (b == 0) throw ParameterError("synthetic: branching factors must be >= 1");
    }
    if (config.samples_per_leaf == 0 || config.image_side == 0 || config.patch_count == 0) {
        throw ParameterError("synthetic: counts must be >= 1");
    }

    numerics::Rng master(config.seed);
    numerics::Rng pattern_rng = master.fork(1);
    numerics::Rng attr_rng = master.fork(2);

    const std::size_t blocks = config.patch_count;
    auto random_pattern = [&]() {
        std::vector<double> p(blocks * blocks);
        for (auto& v : p) v = pattern_rng.uniform();
        return p;
    };

    // Build the node table level by level.
    std::vector<ProtoNode> nodes;
    nodes.push_back({"skin condition", 0, 0, random_pattern(), ""});
    std::vector<std::size_t> frontier = {0};
    for (std::size_t level = 1; level < config.depth; ++level) {
        std::vector<std::size_t> next;
        const std::size_t fan = config.branching[level - 1];
        for (std::size_t parent : frontier) {
            for (std::size_t k = 0; k < fan; ++k) {
                ProtoNode n;
                const std::string word = level_word(level, level == 1 ? next.size() : k);
                n.name = level == 1 ? word : nodes[parent].name + " " + word;
                n.parent = parent;
                n.level = level;
                n.pattern = random_pattern();
                n.attribute = kAttributePhrases[attr_rng.below(std::size(kAttributePhrases))];
                next.push_back(nodes.size());
                nodes.push_back(std::move(n));
            }
        }
        frontier = std::move(next);
    }
    const std::vector<std::size_t> leaf_ids = frontier;

    // Ontology text from the node table.
    std::ostringstream tsv;
    tsv << nodes[0].name << '\t' << nodes[0].name << '\n';
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        tsv << nodes[i].name << '\t' << nodes[nodes[i].parent].name << '\n';
    }

    SyntheticCorpus out{ontology::OntologyTree::parse(tsv.str()), {}, {}};

    // Leaf prototypes: level-weighted blend of the patterns along the path,
    // heavier near the root so siblings stay closer than cross-family pairs.
    const std::size_t side = config.image_side;
    auto prototype_of = [&](std::size_t leaf) {
        std::vector<double> blend(blocks * blocks, 0.0);
        double total = 0.0;
        std::size_t cur = leaf;
        while (true) {
            const double w = 1.0 / static_cast<double>(1u << nodes[cur].level);
            for (std::size_t i = 0; i < blend.size(); ++i) blend[i] += w * nodes[cur].pattern[i];
            total += w;
            if (nodes[cur].level == 0) break;
            cur = nodes[cur].parent;
        }
        for (auto& v : blend) v /= total;
        ImageGrid grid{side, std::vector<double>(side * side, 0.0)};
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                const std::size_t br = r * blocks / side;
                const std::size_t bc = c * blocks / side;
                grid.at(r, c) = blend[br * blocks + bc];
            }
        }
        return grid;
    };

    auto attributes_of = [&](std::size_t leaf) {
        std::vector<std::string> attrs;
        std::size_t cur = leaf;
        while (nodes[cur].level > 0) {
            attrs.push_back(nodes[cur].attribute);
            cur = nodes[cur].parent;
        }
        std::reverse(attrs.begin(), attrs.end()); // family first, leaf last
        while (attrs.size() < 3) attrs.push_back(attrs.back());
        if (attrs.size() > 3) attrs.resize(3);
        return attrs;
    };

    std::size_t sample_index = 0;
    for (std::size_t leaf : leaf_ids) {
        const std::string& label = nodes[leaf].name;
        ImageGrid proto = prototype_of(leaf);
        out.prototypes.emplace_back(label, proto);
        const std::vector<std::string> path = out.tree.path_to_root(label);
        std::string path_str = path[0];
        for (std::size_t i = 1; i < path.size(); ++i) path_str += " > " + path[i];
        const std::vector<std::string> attrs = attributes_of(leaf);
        const std::string& family = path.size() > 1 ? path[1] : path[0];

        for (std::size_t k = 0; k < config.samples_per_leaf; ++k, ++sample_index) {
            numerics::Rng rng = master.fork(1000 + sample_index);
            Sample s;
            {
                std::ostringstream id;
                id << "syn" << std::setw(6) << std::setfill('0') << sample_index;
                s.id = id.str();
            }
            s.image.side = side;
            s.image.pixels.resize(side * side);
            for (std::size_t i = 0; i < s.image.pixels.size(); ++i) {
                const double noisy =
                    proto.pixels[i] + rng.uniform(-config.image_noise, config.image_noise);
                s.image.pixels[i] = std::clamp(noisy, 0.0, 1.0);
            }
            s.disease_label = label;
            s.ontology_caption = path_str;
            s.concept_caption = attrs[0] + ", " + attrs[1] + ", " + attrs[2];

            std::string path_sentence = "This case shows " + label + ", a condition in the " +
                                        family + " group.";
            std::string attr_sentence1 = "The lesion presents " + attrs[0] + " and " + attrs[1] + ".";
            std::string attr_sentence2 = "Examination also finds " + attrs[2] + ".";
            const bool degrade = rng.uniform() < config.caption_noise_rate;
            if (degrade) {
                if (rng.below(2) == 0) {
                    // diagnosis dropped entirely
                    s.raw_caption = attr_sentence1 + " " + attr_sentence2;
                } else {
                    // off-class attribute swapped in
                    const char* stray =
                        kAttributePhrases[rng.below(std::size(kAttributePhrases))];
                    s.raw_caption = path_sentence + " The lesion presents " + stray + " and " +
                                    attrs[1] + ". " + attr_sentence2;
                }
            } else {
                s.raw_caption = path_sentence + " " + attr_sentence1 + " " + attr_sentence2;
            }
            s.sub_captions = split_subcaptions(s.raw_caption);
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace omake::corpus
