#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "omake/corpus.hpp"
#include "omake/encoders.hpp"
#include "omake/magen/agent.hpp"
#include "omake/magen/knowledge_base.hpp"

namespace omake::magen {

// --- scoring and diagnosis ranking ----------------------------------------

// Image-text alignment score, cosine-like in [-1, 1].
class PairScorer {
public:
    virtual ~PairScorer() = default;
    virtual double score(const corpus::Sample& sample) = 0;
};

// cosine(E^v, E^r) under a trained encoder.
class EncoderScorer : public PairScorer {
public:
    explicit EncoderScorer(const encoders::EncoderModel& model) : model_(&model) {}
    double score(const corpus::Sample& sample) override;

private:
    const encoders::EncoderModel* model_;
};

// Deterministic test double: fraction of the disease label's words present
// in the raw caption.
class LexicalScorer : public PairScorer {
public:
    double score(const corpus::Sample& sample) override;
};

using RankedDiagnosis = std::pair<std::string, double>;

class DiagnosisRanker {
public:
    virtual ~DiagnosisRanker() = default;
    // Top-5 candidates, descending score, ties broken lexicographically.
    virtual std::vector<RankedDiagnosis> top5(const corpus::Sample& sample,
                                              std::span<const std::string> pool) = 0;
};

class EncoderRanker : public DiagnosisRanker {
public:
    explicit EncoderRanker(const encoders::EncoderModel& model) : model_(&model) {}
    std::vector<RankedDiagnosis> top5(const corpus::Sample& sample,
                                      std::span<const std::string> pool) override;

private:
    const encoders::EncoderModel* model_;
};

// Deterministic test double ranking by word overlap with the sample's
// ontology + concept captions (the fixture's stand-in for image content).
class LexicalRanker : public DiagnosisRanker {
public:
    std::vector<RankedDiagnosis> top5(const corpus::Sample& sample,
                                      std::span<const std::string> pool) override;
};

// Free-function forms of the spec operations.
std::vector<std::pair<std::string, double>> score_pairs(const std::vector<corpus::Sample>& samples,
                                                        const encoders::EncoderModel& model);
std::vector<RankedDiagnosis> top5_diagnoses(const corpus::ImageGrid& image,
                                            std::span<const std::string> disease_pool,
                                            const encoders::EncoderModel& model);

// --- verdicts ---------------------------------------------------------------

struct Verdict {
    enum class Status { verified, no_definitive_diagnosis };
    Status status = Status::no_definitive_diagnosis;
    std::string refined_caption; // empty iff no definitive diagnosis
    std::string diagnosis;       // empty iff no definitive diagnosis
    std::vector<std::pair<std::string, bool>> claims_checked;

    bool verified() const { return status == Status::verified; }
};

// --- agent-facing operations ------------------------------------------------

struct CaptionResult {
    std::string text;
    int retries = 0;
};

CaptionResult caption(const corpus::ImageGrid& image, std::span<const RankedDiagnosis> top5,
                      AgentBackend& backend, const RetryPolicy& policy = {});

struct SummaryResult {
    DiseaseCard card;
    int retries = 0;
    std::vector<std::string> warnings;
};

SummaryResult summarize(const std::string& disease, const std::string& profile_text,
                        AgentBackend& backend, const RetryPolicy& policy = {});

struct VerifyResult {
    Verdict verdict;
    int retries = 0;
};

// Exactly five cards matching the top-5 candidates. A Verified verdict whose
// diagnosis falls outside the candidates is a contract error.
VerifyResult verify(const corpus::ImageGrid& image, const std::string& initial_caption,
                    std::span<const DiseaseCard> cards, std::span<const RankedDiagnosis> top5,
                    AgentBackend& backend, const RetryPolicy& policy = {});

// --- augmentation -----------------------------------------------------------

struct AugmentationRecord {
    std::string sample_id;
    double score = 0.0;
    bool routed = false;
    std::string initial_caption; // empty when not routed
    std::optional<Verdict> verdict;
    std::string final_caption;
    std::string provenance; // "original" | "initial_retained" | "verified"
    bool failed = false;
    std::string error;
    int retries = 0;
};

struct AugmentOptions {
    double threshold = 0.7;
    std::size_t max_inflight = 4;
    RetryPolicy retry;
    std::function<void(const std::string&)> log; // optional diagnostics sink
};

struct AugmentOutput {
    std::vector<AugmentationRecord> records;
    std::vector<corpus::Sample> augmented; // input order, final captions applied
};

// Four-stage workflow over the dataset: pairs scoring >= threshold keep
// their captions; routed pairs run diagnose -> caption -> verify with the
// retention rule (Verified -> refined caption, otherwise the initial caption
// is kept). Any per-sample failure falls back to the original caption.
AugmentOutput augment(const std::vector<corpus::Sample>& dataset, const KnowledgeBase& kb,
                      PairScorer& scorer, DiagnosisRanker& ranker, AgentBackend& caption_backend,
                      AgentBackend& verify_backend, const AugmentOptions& options = {});

void save_records_jsonl(const std::vector<AugmentationRecord>& records,
                        const std::filesystem::path& path);

} // namespace omake::magen
