// WCD detection: the victim / attacker / unauthenticated request sequence,
// marker leakage, and secret-token candidates.

#pragma once

#include "wcd/http_engine.h"
#include "wcd/url.h"

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wcd {

struct Marker {
    std::string label;
    std::string value;
};

struct MarkerSet {
    std::vector<Marker> markers;

    // Throws std::invalid_argument when a value is shorter than 12 chars,
    // below 3 bits/char, or duplicated.
    void validate() const;
};

// Shannon entropy in bits per character over byte frequencies.
double shannon_entropy(std::string_view s);

// Lowercase trie over dictionary words of length >= kMinWordLength.
class Dictionary {
public:
    static constexpr std::size_t kMinWordLength = 3;

    Dictionary() = default;
    explicit Dictionary(const std::vector<std::string>& words);
    static Dictionary from_text(std::string_view newline_separated);
    // The bundled list of 10,000 common English words.
    static std::shared_ptr<const Dictionary> common_english();

    // Greedy left-to-right removal of the longest word starting at each
    // position; characters not covered by a word are kept.
    std::string strip(std::string_view value) const;
    std::size_t longest_match(std::string_view lowered, std::size_t pos) const;
    std::size_t size() const { return words_; }

private:
    struct Node {
        std::array<int, 26> next{};
        bool terminal = false;
        Node() { next.fill(-1); }
    };
    void insert(std::string_view word);

    std::vector<Node> nodes_{Node{}};
    std::size_t words_ = 0;
};

struct RandomnessConfig {
    std::shared_ptr<const Dictionary> dictionary;
    std::size_t min_residual_length = 8;
    double entropy_threshold_bits_per_char = 3.0;
    std::vector<std::string> keywords{"csrf", "xsrf", "token", "state", "client_id"};

    void validate() const;
};

RandomnessConfig default_randomness_config();

struct RandomnessScore {
    std::size_t residual_length = 0;
    double entropy_bits_per_char = 0.0;
    std::string residual;
};

RandomnessScore randomness_score(std::string_view value, const RandomnessConfig& config);

enum class SecretSource { HiddenFormField, AnchorQueryString, InlineScriptVariable, ScriptFileName };
enum class SecretTrigger { KeywordMatch, EntropyMatch };

std::string_view source_name(SecretSource s);
std::string_view trigger_name(SecretTrigger t);

struct SecretCandidate {
    std::string name;
    std::string value;
    SecretSource source = SecretSource::HiddenFormField;
    SecretTrigger trigger = SecretTrigger::KeywordMatch;
    double entropy_bits_per_char = 0.0;
    std::size_t residual_length = 0;

    bool operator==(const SecretCandidate&) const = default;
};

std::vector<std::string> extract_markers(std::string_view body, const MarkerSet& markers);
std::vector<SecretCandidate> extract_secrets(std::string_view body, const RandomnessConfig& config);

// Body with every nonce occurrence and every RFC 1123 date removed.
std::string normalize_body(std::string_view body, const std::vector<std::string>& nonces = {});
bool responses_identical(const HttpExchange& a, const HttpExchange& b, const std::vector<std::string>& nonces = {});

enum class VerdictStatus { Complete, Inconclusive };

struct ScanVerdict {
    std::string page;
    std::string domain;
    Technique technique = Technique::PathParameter;
    std::string attack_url;
    VerdictStatus status = VerdictStatus::Complete;
    std::string error;
    int victim_status = 0;
    int attacker_status = 0;
    int unauth_status = 0;
    std::vector<std::string> markers_leaked;
    std::vector<SecretCandidate> secrets;
    bool responses_identical = false;
    bool unauth_exploitable = false;
    bool vulnerable = false;
    // Recorded from the attacker response; never used for the verdict.
    std::string cache_control_shape;
    bool has_expires = false;
    bool pragma_no_cache = false;
    std::vector<std::pair<std::string, std::string>> cache_evidence;
    std::vector<std::string> cdn_vendors;
};

// Hook for the pause between the victim and attacker requests; the default
// sleeps, lab runs advance the simulated clock instead.
using DelayFn = std::function<void(const ParsedUrl& page, long long seconds)>;

void sleep_delay(const ParsedUrl& page, long long seconds);

struct DetectorConfig {
    std::string extension = "css";
    AttackOptions attack_options;
    long long attacker_delay_seconds = 0;
    DelayFn delay = sleep_delay;
    RandomnessConfig randomness = default_randomness_config();
};

ScanVerdict run_wcd_test(HttpEngine& engine, const ParsedUrl& page, Technique technique, Identity& victim,
                         Identity& attacker, const MarkerSet& markers, const DetectorConfig& config,
                         NonceGenerator& nonces);

} // namespace wcd
