#pragma once

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

namespace omake::magen {

// Wire shape of one agent call: POST {"role_prompt","user_text","image_b64"}
// -> {"text"}.
struct AgentRequest {
    std::string role_prompt;
    std::string user_text;
    std::string image_b64; // optional, empty when absent
};

struct AgentResponse {
    std::string text;
};

class AgentBackend {
public:
    virtual ~AgentBackend() = default;
    virtual AgentResponse complete(const AgentRequest& request) = 0;
    virtual std::string name() const = 0;
};

struct RetryPolicy {
    std::size_t retry_budget = 2; // retries after the first attempt
    double timeout_seconds = 30.0;
};

// Runs request with retries on BackendError; adds the retry count used to
// `retries`. Throws the last BackendError once the budget is exhausted.
AgentResponse call_with_retries(AgentBackend& backend, const AgentRequest& request,
                                const RetryPolicy& policy, int& retries);

// Deterministic scripted stand-in for the captioning / summary / verification
// roles. The verification rule declines when the top candidate's normalized
// name contains `decline_token` or appears in `decline_diseases`.
struct MockScript {
    std::string decline_token = "unspecified";
    std::set<std::string> decline_diseases;        // normalized names
    std::map<std::string, int> fail_first;         // role keyword -> failures to inject
};

class MockBackend : public AgentBackend {
public:
    explicit MockBackend(MockScript script = {}) : script_(std::move(script)) {}

    AgentResponse complete(const AgentRequest& request) override;
    std::string name() const override { return "mock"; }

    // test support
    std::vector<AgentRequest> history() const;

private:
    MockScript script_;
    mutable std::mutex mu_;
    std::map<std::string, int> failures_left_init_ = {};
    std::map<std::string, int> failures_injected_;
    std::vector<AgentRequest> history_;
};

// Generic chat-completion client over HTTP. `endpoint` is a full URL,
// e.g. "http://localhost:8080/agent".
class HttpBackend : public AgentBackend {
public:
    explicit HttpBackend(std::string endpoint, double timeout_seconds = 30.0);

    AgentResponse complete(const AgentRequest& request) override;
    std::string name() const override { return "http:" + endpoint_; }

private:
    std::string endpoint_;
    double timeout_seconds_;
};

std::string base64_encode(const std::string& bytes);

} // namespace omake::magen
