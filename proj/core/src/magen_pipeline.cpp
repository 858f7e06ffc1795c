#include "omake/magen/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "omake/errors.hpp"
#include "omake/ontology.hpp"
#include "omake/tensor.hpp"

namespace omake::magen {

using ordered_json = nlohmann::ordered_json;

namespace {

const char* kCaptionRole =
    "You are the captioning agent for a dermatology data pipeline. Given a skin image and "
    "five candidate diagnoses, write a precise clinical description with morphological "
    "observations and a preliminary diagnostic assessment.";

const char* kSummaryRole =
    "You are the summary agent for a dermatology knowledge base. Distill the disease profile "
    "into a Disease Card with exactly four fields: NAME (standardized disease name), POS "
    "(typical clinical features), SITES (typical anatomical locations) and MINSET (minimal "
    "discriminative features). Keep the card between 60 and 120 tokens.";

const char* kVerifyRole =
    "You are the verification agent for a dermatology data pipeline. Follow four steps: "
    "(1) extract the morphological claims from the initial caption; (2) cross-reference each "
    "claim against the image and the POS, SITES and MINSET entries of the candidate Disease "
    "Cards; (3) determine the best-matching diagnosis from the candidates; (4) synthesize a "
    "refined clinical description with the verified diagnosis. If no candidate shows "
    "sufficient visual alignment, answer exactly 'No definitive diagnosis'. Reply with "
    "VERDICT:, DIAGNOSIS:, CAPTION: and CLAIMS: lines.";

std::set<std::string> word_set(const std::string& text) {
    std::set<std::string> words;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            words.insert(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.insert(cur);
    return words;
}

double overlap_fraction(const std::set<std::string>& needles, const std::set<std::string>& pool) {
    if (needles.empty()) return 0.0;
    std::size_t hit = 0;
    for (const std::string& w : needles) hit += pool.count(w);
    return static_cast<double>(hit) / static_cast<double>(needles.size());
}

std::string flatten(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ' ');
    std::replace(text.begin(), text.end(), '\r', ' ');
    return text;
}

std::string image_payload(const corpus::ImageGrid& image) {
    ordered_json j;
    j["side"] = image.side;
    j["pixels"] = image.pixels;
    return base64_encode(j.dump());
}

std::string candidates_line(std::span<const RankedDiagnosis> top5) {
    std::string out = "CANDIDATES: ";
    for (std::size_t i = 0; i < top5.size(); ++i) {
        if (i) out += "; ";
        out += top5[i].first;
    }
    return out;
}

std::vector<RankedDiagnosis> rank_pool(std::span<const std::string> pool,
                                       const std::function<double(const std::string&)>& score) {
    if (pool.size() < 5) {
        throw ConfigError("top5_diagnoses: disease pool must hold at least 5 entries, got " +
                          std::to_string(pool.size()));
    }
    std::vector<RankedDiagnosis> ranked;
    ranked.reserve(pool.size());
    for (const std::string& d : pool) ranked.emplace_back(d, score(d));
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    ranked.resize(5);
    return ranked;
}

// Retries both transport failures and unparseable structured output.
template <typename Fn>
auto with_attempts(const RetryPolicy& policy, int& retries, Fn&& fn) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const BackendError&) {
            if (attempt >= policy.retry_budget) throw;
            ++retries;
        } catch (const SchemaError&) {
            if (attempt >= policy.retry_budget) throw;
            ++retries;
        }
    }
}

} // namespace

double EncoderScorer::score(const corpus::Sample& sample) {
    const std::vector<double> visual = model_->encode_visual_eval(sample.image);
    const std::vector<double> text = model_->encode_text_eval(sample.raw_caption);
    return numerics::cosine(visual, text);
}

double LexicalScorer::score(const corpus::Sample& sample) {
    return overlap_fraction(word_set(sample.disease_label), word_set(sample.raw_caption));
}

std::vector<RankedDiagnosis> EncoderRanker::top5(const corpus::Sample& sample,
                                                 std::span<const std::string> pool) {
    const std::vector<double> visual = model_->encode_visual_eval(sample.image);
    return rank_pool(pool, [&](const std::string& d) {
        return numerics::cosine(visual, model_->encode_text_eval(d));
    });
}

std::vector<RankedDiagnosis> LexicalRanker::top5(const corpus::Sample& sample,
                                                 std::span<const std::string> pool) {
    const std::set<std::string> context =
        word_set(sample.ontology_caption + " " + sample.concept_caption);
    return rank_pool(pool, [&](const std::string& d) {
        return overlap_fraction(word_set(d), context);
    });
}

std::vector<std::pair<std::string, double>> score_pairs(const std::vector<corpus::Sample>& samples,
                                                        const encoders::EncoderModel& model) {
    EncoderScorer scorer(model);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(samples.size());
    for (const corpus::Sample& s : samples) out.emplace_back(s.id, scorer.score(s));
    return out;
}

std::vector<RankedDiagnosis> top5_diagnoses(const corpus::ImageGrid& image,
                                            std::span<const std::string> disease_pool,
                                            const encoders::EncoderModel& model) {
    const std::vector<double> visual = model.encode_visual_eval(image);
    return rank_pool(disease_pool, [&](const std::string& d) {
        return numerics::cosine(visual, model.encode_text_eval(d));
    });
}

CaptionResult caption(const corpus::ImageGrid& image, std::span<const RankedDiagnosis> top5,
                      AgentBackend& backend, const RetryPolicy& policy) {
    if (top5.size() != 5) throw ContractError("caption: expected exactly 5 candidates");
    AgentRequest req;
    req.role_prompt = kCaptionRole;
    req.user_text = candidates_line(top5) +
                    "\nDescribe the image precisely, referencing the candidates when relevant.";
    req.image_b64 = image_payload(image);

    CaptionResult out;
    out.text = with_attempts(policy, out.retries, [&]() {
        AgentResponse resp = backend.complete(req);
        if (resp.text.empty()) throw BackendError("caption: backend returned an empty caption");
        return resp.text;
    });
    return out;
}

SummaryResult summarize(const std::string& disease, const std::string& profile_text,
                        AgentBackend& backend, const RetryPolicy& policy) {
    if (profile_text.empty()) throw ParameterError("summarize: profile text must be nonempty");
    AgentRequest req;
    req.role_prompt = kSummaryRole;
    req.user_text = "DISEASE: " + disease + "\nPROFILE: " + flatten(profile_text);

    SummaryResult out;
    out.card = with_attempts(policy, out.retries, [&]() {
        AgentResponse resp = backend.complete(req);
        return parse_disease_card(resp.text);
    });
    out.card.token_count = count_tokens(out.card.render());
    if (!out.card.token_count_in_range()) {
        out.warnings.push_back("disease card for '" + disease + "' has " +
                               std::to_string(out.card.token_count) +
                               " tokens, outside the expected 60-120 range");
    }
    return out;
}

namespace {

Verdict parse_verdict(const std::string& text, std::span<const RankedDiagnosis> top5) {
    std::string lc;
    for (char c : text) lc.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

    Verdict v;
    // claims block: "- claim :: supported|unsupported"
    std::istringstream is(text);
    std::string line;
    std::string verdict_line, diagnosis_line, caption_line;
    while (std::getline(is, line)) {
        std::string upper;
        for (char c : line) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        auto value_of = [&](const char* key) -> std::string {
            if (upper.rfind(key, 0) != 0) return {};
            std::string val = line.substr(std::strlen(key));
            const std::size_t b = val.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : val.substr(b);
        };
        if (std::string s = value_of("VERDICT:"); !s.empty()) verdict_line = s;
        if (std::string s = value_of("DIAGNOSIS:"); !s.empty()) diagnosis_line = s;
        if (std::string s = value_of("CAPTION:"); !s.empty()) caption_line = s;
        const std::size_t b = line.find_first_not_of(" \t");
        if (b != std::string::npos && line[b] == '-') {
            const std::size_t sep = line.find("::", b);
            if (sep != std::string::npos) {
                std::string claim = line.substr(b + 1, sep - b - 1);
                const std::size_t cb = claim.find_first_not_of(" \t");
                const std::size_t ce = claim.find_last_not_of(" \t");
                if (cb != std::string::npos) claim = claim.substr(cb, ce - cb + 1);
                std::string status = line.substr(sep + 2);
                const bool supported = status.find("unsupported") == std::string::npos &&
                                       status.find("supported") != std::string::npos;
                v.claims_checked.emplace_back(claim, supported);
            }
        }
    }

    if (lc.find("no definitive diagnosis") != std::string::npos) {
        v.status = Verdict::Status::no_definitive_diagnosis;
        return v;
    }
    std::string verdict_lc;
    for (char c : verdict_line) verdict_lc.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (verdict_lc.find("verified") == std::string::npos) {
        throw SchemaError("verify: unparseable verdict in backend reply");
    }
    if (diagnosis_line.empty() || caption_line.empty()) {
        throw SchemaError("verify: verified reply missing DIAGNOSIS or CAPTION");
    }
    const std::string key = ontology::OntologyTree::normalize_name(diagnosis_line);
    bool known = false;
    for (const auto& [name, _] : top5) {
        if (ontology::OntologyTree::normalize_name(name) == key) {
            known = true;
            v.diagnosis = name;
        }
    }
    if (!known) {
        throw ContractError("verify: diagnosis '" + diagnosis_line +
                            "' is not among the five candidates");
    }
    v.status = Verdict::Status::verified;
    v.refined_caption = caption_line;
    return v;
}

} // namespace

VerifyResult verify(const corpus::ImageGrid& image, const std::string& initial_caption,
                    std::span<const DiseaseCard> cards, std::span<const RankedDiagnosis> top5,
                    AgentBackend& backend, const RetryPolicy& policy) {
    if (top5.size() != 5 || cards.size() != 5) {
        throw ContractError("verify: expected exactly 5 candidates with 5 matching cards");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        if (ontology::OntologyTree::normalize_name(cards[i].name) !=
            ontology::OntologyTree::normalize_name(top5[i].first)) {
            throw ContractError("verify: card " + std::to_string(i) + " ('" + cards[i].name +
                                "') does not match candidate '" + top5[i].first + "'");
        }
    }
    AgentRequest req;
    req.role_prompt = kVerifyRole;
    std::string cards_block;
    for (const DiseaseCard& c : cards) cards_block += c.render() + "\n";
    req.user_text = candidates_line(top5) + "\nINITIAL CAPTION: " + flatten(initial_caption) +
                    "\nDISEASE CARDS:\n" + cards_block;
    req.image_b64 = image_payload(image);

    VerifyResult out;
    out.verdict = with_attempts(policy, out.retries, [&]() {
        AgentResponse resp = backend.complete(req);
        return parse_verdict(resp.text, top5);
    });
    return out;
}

AugmentOutput augment(const std::vector<corpus::Sample>& dataset, const KnowledgeBase& kb,
                      PairScorer& scorer, DiagnosisRanker& ranker, AgentBackend& caption_backend,
                      AgentBackend& verify_backend, const AugmentOptions& options) {
    const std::vector<std::string> pool = kb.names();
    if (pool.size() < 5) {
        throw ConfigError("augment: knowledge base holds " + std::to_string(pool.size()) +
                          " cards; at least 5 are required for the candidate pool");
    }
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };

    AugmentOutput out;
    out.records.resize(dataset.size());
    out.augmented.resize(dataset.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= dataset.size()) return;
            const corpus::Sample& s = dataset[i];
            AugmentationRecord r;
            r.sample_id = s.id;
            r.score = scorer.score(s);
            r.routed = r.score < options.threshold;
            if (!r.routed) {
                r.final_caption = s.raw_caption;
                r.provenance = "original";
            } else {
                try {
                    const std::vector<RankedDiagnosis> top5 = ranker.top5(s, pool);
                    std::vector<DiseaseCard> cards;
                    cards.reserve(5);
                    for (const auto& [name, _] : top5) cards.push_back(kb.retrieve(name));
                    CaptionResult cap = caption(s.image, top5, caption_backend, options.retry);
                    r.initial_caption = cap.text;
                    r.retries += cap.retries;
                    VerifyResult ver =
                        verify(s.image, cap.text, cards, top5, verify_backend, options.retry);
                    r.retries += ver.retries;
                    r.verdict = ver.verdict;
                    if (ver.verdict.verified()) {
                        r.final_caption = ver.verdict.refined_caption;
                        r.provenance = "verified";
                    } else {
                        r.final_caption = r.initial_caption;
                        r.provenance = "initial_retained";
                    }
                } catch (const std::exception& e) {
                    // fail-safe retention: keep the original caption
                    r.failed = true;
                    r.error = e.what();
                    r.final_caption = s.raw_caption;
                    r.provenance = "original";
                    log("sample " + s.id + " failed: " + e.what());
                }
            }
            corpus::Sample aug = s;
            aug.raw_caption = r.final_caption;
            aug.sub_captions = corpus::split_subcaptions(aug.raw_caption);
            out.records[i] = std::move(r);
            out.augmented[i] = std::move(aug);
        }
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(options.max_inflight, dataset.size()));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return out;
}

void save_records_jsonl(const std::vector<AugmentationRecord>& records,
                        const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("augment: cannot open '" + path.string() + "' for writing");
    for (const AugmentationRecord& r : records) {
        ordered_json j;
        j["id"] = r.sample_id;
        j["score"] = r.score;
        j["routed"] = r.routed;
        j["initial_caption"] = r.initial_caption;
        if (r.verdict) {
            ordered_json v;
            v["status"] = r.verdict->verified() ? "Verified" : "NoDefinitiveDiagnosis";
            if (r.verdict->verified()) {
                v["diagnosis"] = r.verdict->diagnosis;
                v["refined_caption"] = r.verdict->refined_caption;
            }
            ordered_json claims = ordered_json::array();
            for (const auto& [claim, supported] : r.verdict->claims_checked) {
                claims.push_back(ordered_json{{"claim", claim}, {"supported", supported}});
            }
            v["claims_checked"] = claims;
            j["verdict"] = v;
        }
        j["final_caption"] = r.final_caption;
        j["provenance"] = r.provenance;
        j["failed"] = r.failed;
        if (r.failed) j["error"] = r.error;
        j["retries"] = r.retries;
        os << j.dump() << '\n';
    }
    if (!os) throw IoError("augment: write to '" + path.string() + "' failed");
}

} // namespace omake::magen
