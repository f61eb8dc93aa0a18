#pragma once

#include <string>

#include "ntkeval/lm.hpp"

namespace ntkeval::lm {

// Request/response protocol over HTTP, JSON bodies:
//   GET  /info     -> {"model_id": str, "tokenizer_id": str}
//   POST /generate {"prompt": str, "n": int, "temperature": float,
//                   "max_tokens": int, "seed": int, "echo_logprobs": true}
//              -> {"completions": [{"text": str, "token_logprobs": [float]}]}
//   POST /score    {"prompt": str, "completion": str, "temperature": float}
//              -> {"token_logprobs": [float]}
// The authorization token, when nonempty, is sent as a bearer header.
struct RemoteConfig {
    std::string endpoint;  // e.g. "http://127.0.0.1:8411"
    std::string auth_token;
    double timeout_seconds = 30.0;
    int max_retries = 2;  // transport-level retries per request
};

struct RemoteError : std::runtime_error {
    RemoteError(const std::string& message, bool transient)
        : std::runtime_error(message), retryable(transient) {}
    bool retryable;  // timeouts/connection failures; protocol errors are hard
};

class RemoteLm final : public LmApi {
public:
    // Fetches /info once; model and tokenizer identity are pinned for the
    // lifetime of the client.
    explicit RemoteLm(RemoteConfig cfg);

    std::vector<CompletionRecord> generate(const std::string& prompt,
                                           const GenParams& params) const override;
    double score(const std::string& prompt, const std::string& completion,
                 double temperature) const override;
    std::string model_id() const override { return model_id_; }
    std::string tokenizer_id() const override { return tokenizer_id_; }

private:
    std::string post_json(const std::string& path, const std::string& body) const;
    std::string get_json(const std::string& path) const;

    RemoteConfig cfg_;
    std::string model_id_;
    std::string tokenizer_id_;
};

}  // namespace ntkeval::lm
