#include "omake/magen/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "omake/errors.hpp"
#include "omake/ontology.hpp"

namespace omake::magen {

using ordered_json = nlohmann::ordered_json;

int count_tokens(const std::string& text) {
    int n = 0;
    bool in_token = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

namespace {

std::string join(const std::vector<std::string>& items, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

} // namespace

std::string DiseaseCard::render() const {
    return "NAME: " + name + "\nPOS: " + join(pos, "; ") + "\nSITES: " + join(sites, "; ") +
           "\nMINSET: " + join(minset, "; ") + "\n";
}

void DiseaseCard::validate() const {
    if (name.empty()) throw SchemaError("disease card: missing NAME");
    if (pos.empty()) throw SchemaError("disease card: missing POS");
    if (sites.empty()) throw SchemaError("disease card: missing SITES");
    if (minset.empty()) throw SchemaError("disease card: missing MINSET");
}

DiseaseCard parse_disease_card(const std::string& text) {
    DiseaseCard card;
    std::string* active_list_target = nullptr;
    std::string name_buf, pos_buf, sites_buf, minset_buf;

    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        // tolerate fences and blank lines
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        if (line.compare(b, 3, "```") == 0) continue;
        std::string upper;
        for (char c : line) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));

        auto key_value = [&](const char* key) -> const char* {
            const std::size_t at = upper.find(key, b);
            if (at != b) return nullptr;
            const std::size_t colon = line.find(':', b + std::strlen(key) - 1);
            if (colon == std::string::npos) return nullptr;
            return line.c_str() + colon + 1;
        };

        if (const char* v = key_value("NAME:")) {
            name_buf = v;
            active_list_target = &name_buf;
        } else if (const char* v = key_value("POS:")) {
            pos_buf = v;
            active_list_target = &pos_buf;
        } else if (const char* v = key_value("SITES:")) {
            sites_buf = v;
            active_list_target = &sites_buf;
        } else if (const char* v = key_value("MINSET:")) {
            minset_buf = v;
            active_list_target = &minset_buf;
        } else if (active_list_target) {
            *active_list_target += " " + line.substr(b);
        }
    }

    auto trim = [](const std::string& s) {
        const std::size_t b2 = s.find_first_not_of(" \t");
        if (b2 == std::string::npos) return std::string();
        const std::size_t e2 = s.find_last_not_of(" \t");
        return s.substr(b2, e2 - b2 + 1);
    };
    auto phrases = [&](const std::string& s) {
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos <= s.size()) {
            std::size_t end = s.find(';', pos);
            if (end == std::string::npos) end = s.size();
            std::string item = trim(s.substr(pos, end - pos));
            if (!item.empty()) out.push_back(std::move(item));
            pos = end + 1;
        }
        return out;
    };

    card.name = trim(name_buf);
    card.pos = phrases(pos_buf);
    card.sites = phrases(sites_buf);
    card.minset = phrases(minset_buf);
    card.validate();
    card.token_count = count_tokens(card.render());
    return card;
}

KnowledgeBase::KnowledgeBase(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path KnowledgeBase::card_path(const std::string& disease) const {
    std::string key = ontology::OntologyTree::normalize_name(disease);
    std::replace(key.begin(), key.end(), ' ', '_');
    return dir_ / (key + ".json");
}

void KnowledgeBase::store(const DiseaseCard& card) {
    card.validate();
    ordered_json j;
    j["name"] = card.name;
    j["pos"] = card.pos;
    j["sites"] = card.sites;
    j["minset"] = card.minset;
    j["token_count"] = card.token_count;
    std::ofstream os(card_path(card.name), std::ios::trunc);
    if (!os) throw IoError("knowledge base: cannot write card for '" + card.name + "'");
    os << j.dump(2) << '\n';
}

bool KnowledgeBase::contains(const std::string& disease) const {
    return std::filesystem::exists(card_path(disease));
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

} // namespace

DiseaseCard KnowledgeBase::retrieve(const std::string& disease) const {
    const std::filesystem::path path = card_path(disease);
    std::ifstream is(path);
    if (!is) {
        const std::string key = ontology::OntologyTree::normalize_name(disease);
        std::vector<std::pair<std::size_t, std::string>> ranked;
        for (const std::string& n : names()) {
            ranked.emplace_back(edit_distance(key, ontology::OntologyTree::normalize_name(n)), n);
        }
        std::sort(ranked.begin(), ranked.end());
        std::string hint;
        for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) {
            hint += (i ? ", " : "") + ranked[i].second;
        }
        throw LookupError("knowledge base: no card for '" + disease + "'" +
                          (hint.empty() ? "" : " (nearest: " + hint + ")"));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("knowledge base: malformed card '" + path.string() + "': " + e.what());
    }
    DiseaseCard card;
    card.name = j.value("name", "");
    card.pos = j.value("pos", std::vector<std::string>{});
    card.sites = j.value("sites", std::vector<std::string>{});
    card.minset = j.value("minset", std::vector<std::string>{});
    card.token_count = j.value("token_count", 0);
    card.validate();
    return card;
}

std::vector<std::string> KnowledgeBase::names() const {
    std::vector<std::string> out;
    if (!std::filesystem::exists(dir_)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        std::ifstream is(entry.path());
        if (!is) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(is);
            if (j.contains("name")) out.push_back(j["name"].get<std::string>());
        } catch (const nlohmann::json::exception&) {
            // unreadable stray file; skip
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace omake::magen
