#include "ntkeval/remote_lm.hpp"

#include <nlohmann/json.hpp>
#include <numeric>

#include <httplib.h>

namespace ntkeval::lm {

using nlohmann::json;

namespace {

json parse_body(const std::string& body, const std::string& what) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw RemoteError("malformed response from " + what, /*transient=*/false);
    }
    return j;
}

}  // namespace

RemoteLm::RemoteLm(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    json info = parse_body(get_json("/info"), "/info");
    if (!info.contains("model_id") || !info.contains("tokenizer_id")) {
        throw RemoteError("/info missing model_id or tokenizer_id", false);
    }
    model_id_ = info.at("model_id").get<std::string>();
    tokenizer_id_ = info.at("tokenizer_id").get<std::string>();
}

std::string RemoteLm::get_json(const std::string& path) const {
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        httplib::Client client(cfg_.endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        if (!cfg_.auth_token.empty()) client.set_bearer_token_auth(cfg_.auth_token);
        auto res = client.Get(path);
        if (res && res->status == 200) return res->body;
        last_error = res ? "HTTP " + std::to_string(res->status)
                         : "transport: " + httplib::to_string(res.error());
    }
    throw RemoteError("GET " + path + " failed: " + last_error, /*transient=*/true);
}

std::string RemoteLm::post_json(const std::string& path, const std::string& body) const {
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        httplib::Client client(cfg_.endpoint);
        client.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        client.set_read_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        if (!cfg_.auth_token.empty()) client.set_bearer_token_auth(cfg_.auth_token);
        auto res = client.Post(path, body, "application/json");
        if (res && res->status == 200) return res->body;
        if (res) {
            // The server answered; treat non-200 as a hard protocol error.
            throw RemoteError("POST " + path + " failed: HTTP " + std::to_string(res->status) +
                                  " " + res->body,
                              /*transient=*/false);
        }
        last_error = "transport: " + httplib::to_string(res.error());
    }
    throw RemoteError("POST " + path + " failed: " + last_error, /*transient=*/true);
}

std::vector<CompletionRecord> RemoteLm::generate(const std::string& prompt,
                                                 const GenParams& params) const {
    if (params.n < 1) throw std::invalid_argument("generate: n must be >= 1");
    if (!(params.temperature > 0)) throw std::invalid_argument("generate: temperature must be > 0");

    json req;
    req["prompt"] = prompt;
    req["n"] = params.n;
    req["temperature"] = params.temperature;
    req["max_tokens"] = params.max_new_tokens;
    req["seed"] = params.seed;
    req["echo_logprobs"] = true;

    json res = parse_body(post_json("/generate", req.dump()), "/generate");
    if (!res.contains("completions") || !res.at("completions").is_array()) {
        throw RemoteError("/generate response missing completions", false);
    }
    std::vector<CompletionRecord> out;
    int index = 0;
    for (const auto& c : res.at("completions")) {
        if (!c.contains("text") || !c.contains("token_logprobs")) {
            throw RemoteError("/generate completion missing text or token_logprobs", false);
        }
        CompletionRecord rec;
        rec.text = c.at("text").get<std::string>();
        const auto& lps = c.at("token_logprobs");
        rec.logp_base = std::accumulate(lps.begin(), lps.end(), 0.0,
                                        [](double acc, const json& v) {
                                            return acc + v.get<double>();
                                        });
        rec.extracted_answer = extract_answer(rec.text);
        rec.sample_index = index++;
        out.push_back(std::move(rec));
    }
    if (out.size() != static_cast<size_t>(params.n)) {
        throw RemoteError("/generate returned " + std::to_string(out.size()) +
                              " completions, expected " + std::to_string(params.n),
                          false);
    }
    return out;
}

double RemoteLm::score(const std::string& prompt, const std::string& completion,
                       double temperature) const {
    if (!(temperature > 0)) throw std::invalid_argument("score: temperature must be > 0");
    if (completion.empty()) return 0.0;  // log 1, no network round trip

    json req;
    req["prompt"] = prompt;
    req["completion"] = completion;
    req["temperature"] = temperature;

    json res = parse_body(post_json("/score", req.dump()), "/score");
    if (!res.contains("token_logprobs") || !res.at("token_logprobs").is_array()) {
        throw RemoteError("/score response missing token_logprobs", false);
    }
    double total = 0.0;
    for (const auto& v : res.at("token_logprobs")) total += v.get<double>();
    return total;
}

}  // namespace ntkeval::lm
