#include "omake/magen/agent.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "omake/errors.hpp"

namespace omake::magen {

using json = nlohmann::json;

AgentResponse call_with_retries(AgentBackend& backend, const AgentRequest& request,
                                const RetryPolicy& policy, int& retries) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return backend.complete(request);
        } catch (const BackendError&) {
            if (attempt >= policy.retry_budget) throw;
            ++retries;
        }
    }
}

std::string base64_encode(const std::string& bytes) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
        i += 3;
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// First line of user_text matching "KEY: value", value trimmed.
std::string extract_field(const std::string& text, const std::string& key) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        if (line.size() > key.size() && line.substr(0, key.size()) == key &&
            line[key.size()] == ':') {
            std::string v(line.substr(key.size() + 1));
            const std::size_t b = v.find_first_not_of(" \t");
            return b == std::string::npos ? std::string() : v.substr(b);
        }
        pos = end + 1;
    }
    return {};
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t end = s.find(sep, pos);
        if (end == std::string::npos) end = s.size();
        std::string item = s.substr(pos, end - pos);
        const std::size_t b = item.find_first_not_of(" \t");
        const std::size_t e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
        pos = end + 1;
    }
    return out;
}

// "... presents as X. ... sites include Y. ... minimal discriminative
// features: Z." -> (X, Y, Z); empty strings when a marker is missing.
std::string extract_after(const std::string& text_lc, const std::string& text,
                          const std::string& marker) {
    const std::size_t at = text_lc.find(marker);
    if (at == std::string::npos) return {};
    const std::size_t start = at + marker.size();
    std::size_t end = text.find('.', start);
    if (end == std::string::npos) end = text.size();
    std::string v = text.substr(start, end - start);
    const std::size_t b = v.find_first_not_of(" \t:");
    return b == std::string::npos ? std::string() : v.substr(b);
}

} // namespace

AgentResponse MockBackend::complete(const AgentRequest& request) {
    const std::string role = lower(request.role_prompt);
    std::string role_key;
    if (role.find("captioning") != std::string::npos) {
        role_key = "caption";
    } else if (role.find("summary") != std::string::npos) {
        role_key = "summary";
    } else if (role.find("verification") != std::string::npos) {
        role_key = "verify";
    } else {
        throw BackendError("mock backend: unrecognized agent role prompt");
    }

    {
        std::lock_guard<std::mutex> lock(mu_);
        history_.push_back(request);
        auto it = script_.fail_first.find(role_key);
        if (it != script_.fail_first.end()) {
            int& injected = failures_injected_[role_key];
            if (injected < it->second) {
                ++injected;
                throw BackendError("mock backend: scripted failure for role '" + role_key + "'");
            }
        }
    }

    if (role_key == "caption") {
        const std::vector<std::string> candidates =
            split_list(extract_field(request.user_text, "CANDIDATES"), ';');
        if (candidates.empty()) throw BackendError("mock backend: caption prompt lacks candidates");
        std::string text = "The lesion is a well-demarcated plaque with surface change. "
                           "Morphology is most consistent with " +
                           candidates[0] + ".";
        if (candidates.size() >= 3) {
            text += " Differential considerations include " + candidates[1] + " and " +
                    candidates[2] + ".";
        }
        return {text};
    }

    if (role_key == "summary") {
        const std::string disease = extract_field(request.user_text, "DISEASE");
        const std::string profile = extract_field(request.user_text, "PROFILE");
        if (disease.empty()) throw BackendError("mock backend: summary prompt lacks disease");
        const std::string profile_lc = lower(profile);
        std::string pos = extract_after(profile_lc, profile, "presents as");
        std::string sites = extract_after(profile_lc, profile, "sites include");
        std::string minset = extract_after(profile_lc, profile, "minimal discriminative features");
        if (pos.empty()) pos = "characteristic lesions; gradual onset";
        if (sites.empty()) sites = "variable distribution";
        if (minset.empty()) minset = "characteristic lesions";
        return {"NAME: " + disease + "\nPOS: " + pos + "\nSITES: " + sites +
                "\nMINSET: " + minset + "\n"};
    }

    // verification
    const std::vector<std::string> candidates =
        split_list(extract_field(request.user_text, "CANDIDATES"), ';');
    if (candidates.size() < 5) throw BackendError("mock backend: verify prompt lacks candidates");
    const std::string top1 = candidates[0];
    const std::string top1_lc = lower(top1);
    bool decline = false;
    if (!script_.decline_token.empty() && top1_lc.find(script_.decline_token) != std::string::npos) {
        decline = true;
    }
    if (script_.decline_diseases.count(top1_lc) > 0) decline = true;
    if (decline) {
        return {"VERDICT: No definitive diagnosis\nCLAIMS:\n- morphological claims match a "
                "candidate card :: unsupported\n"};
    }
    std::string initial = extract_field(request.user_text, "INITIAL CAPTION");
    std::size_t first_stop = initial.find('.');
    if (first_stop == std::string::npos) first_stop = initial.size() - 1;
    const std::string lead = initial.substr(0, first_stop + 1);
    return {"VERDICT: Verified\nDIAGNOSIS: " + top1 + "\nCAPTION: " + lead +
            " Verified findings are consistent with " + top1 +
            ".\nCLAIMS:\n- morphological claims match a candidate card :: supported\n"};
}

std::vector<AgentRequest> MockBackend::history() const {
    std::lock_guard<std::mutex> lock(mu_);
    return history_;
}

HttpBackend::HttpBackend(std::string endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
    if (endpoint_.find("://") == std::string::npos) {
        throw ConfigError("http backend: endpoint must be a full URL, got '" + endpoint_ + "'");
    }
}

AgentResponse HttpBackend::complete(const AgentRequest& request) {
    const std::size_t scheme_end = endpoint_.find("://") + 3;
    const std::size_t path_start = endpoint_.find('/', scheme_end);
    const std::string base =
        path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(static_cast<time_t>(timeout_seconds_),
                                  static_cast<time_t>((timeout_seconds_ - static_cast<time_t>(
                                                           timeout_seconds_)) * 1e6));
    client.set_read_timeout(static_cast<time_t>(timeout_seconds_), 0);

    json body;
    body["role_prompt"] = request.role_prompt;
    body["user_text"] = request.user_text;
    if (!request.image_b64.empty()) body["image_b64"] = request.image_b64;

    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
        throw BackendError("http backend: request to " + endpoint_ + " failed: " +
                           httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendError("http backend: " + endpoint_ + " returned status " +
                           std::to_string(res->status));
    }
    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::exception& e) {
        throw BackendError(std::string("http backend: malformed JSON reply: ") + e.what());
    }
    if (!reply.contains("text") || !reply["text"].is_string()) {
        throw BackendError("http backend: reply missing 'text' field");
    }
    return {reply["text"].get<std::string>()};
}

} // namespace omake::magen
