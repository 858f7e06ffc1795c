#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace omake::magen {

// Structured diagnosis summary with the four critical fields. token_count is
// the whitespace token count of the rendered card; [60,120] is the expected
// range when produced by the summary agent (a warning, never an error).
struct DiseaseCard {
    std::string name;
    std::vector<std::string> pos;    // typical clinical features
    std::vector<std::string> sites;  // anatomical locations
    std::vector<std::string> minset; // minimal discriminative features
    int token_count = 0;

    bool token_count_in_range() const { return token_count >= 60 && token_count <= 120; }
    std::string render() const;
    void validate() const; // all four fields nonempty
};

// Parses NAME:/POS:/SITES:/MINSET: blocks from agent output. Tolerant of key
// case, surrounding fences and continuation lines; list fields split on ';'.
DiseaseCard parse_disease_card(const std::string& text);

int count_tokens(const std::string& text);

// One JSON file per card under a directory, keyed by normalized disease name.
class KnowledgeBase {
public:
    explicit KnowledgeBase(std::filesystem::path dir);

    void store(const DiseaseCard& card);
    DiseaseCard retrieve(const std::string& disease) const; // LookupError w/ suggestions
    bool contains(const std::string& disease) const;
    std::vector<std::string> names() const; // sorted display names

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path card_path(const std::string& disease) const;
    std::filesystem::path dir_;
};

} // namespace omake::magen
