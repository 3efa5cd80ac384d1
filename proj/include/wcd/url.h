// URL parsing, structural grouping and path-confusion payload construction.

#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace wcd {

class MalformedUrl : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QueryParam {
    std::string name;
    std::string value;

    bool operator==(const QueryParam&) const = default;
};

struct ParsedUrl {
    std::string scheme;                     // lowercase, "http" or "https"
    std::string host;                       // lowercase
    int port = 0;                           // explicit or scheme default
    bool explicit_port = false;
    std::vector<std::string> path_segments; // percent-decoded, split on raw '/'
    std::string raw_path;                   // exactly as received, "/" at minimum
    std::string raw_query;                  // without '?'
    bool has_query = false;
    std::vector<QueryParam> query_params;   // decoded, in order
    std::optional<std::string> fragment;

    // scheme://host[:port]
    std::string origin() const;
    // raw_path[?raw_query]
    std::string target() const;
    // full URL text, fragment included
    std::string str() const;
};

ParsedUrl parse_url(std::string_view raw);

// Resolves href against base (absolute, scheme-relative, absolute-path,
// relative-path and query-only forms). Returns nullopt for non-http(s)
// schemes such as mailto: or javascript:.
std::optional<ParsedUrl> resolve_url(const ParsedUrl& base, std::string_view href);

// Decodes %XX escapes; invalid escapes are kept verbatim. '+' is untouched.
std::string percent_decode(std::string_view s);

enum class Technique {
    PathParameter,
    EncodedNewline,
    EncodedSemicolon,
    EncodedPound,
    EncodedQuestion,
};

inline constexpr std::array<Technique, 5> kAllTechniques = {
    Technique::PathParameter, Technique::EncodedNewline, Technique::EncodedSemicolon,
    Technique::EncodedPound, Technique::EncodedQuestion,
};

std::string_view technique_name(Technique t);
std::optional<Technique> technique_from_name(std::string_view name);
// The separator placed between the page path and the nonce file name.
std::string_view technique_separator(Technique t);

struct AttackUrl {
    ParsedUrl base;
    Technique technique = Technique::PathParameter;
    std::string random_name;
    std::string extension;
    std::string rendered;
};

struct AttackOptions {
    // Inserts "name=val" after the encoded question mark, the alternative
    // form of the question-mark payload.
    bool embedded_query_param = false;
};

AttackUrl make_attack_url(const ParsedUrl& base, Technique technique, std::string random_name,
                          std::string extension = "css", AttackOptions options = {});

// Seedable generator of 16-char [a-z0-9] file stems. Never repeats a name
// within one generator's lifetime. Thread-safe.
class NonceGenerator {
public:
    static constexpr std::size_t kLength = 16;

    explicit NonceGenerator(std::uint64_t seed);
    std::string next();

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
    std::unordered_set<std::string> issued_;
};

inline constexpr std::string_view kNumericPlaceholder = "{n}";

struct UrlGroupKey {
    std::string host;
    std::string abstract_path;
    std::vector<std::string> param_names; // sorted

    bool operator==(const UrlGroupKey&) const = default;
    auto operator<=>(const UrlGroupKey&) const = default;
    std::string str() const;
};

bool is_numeric_segment(std::string_view segment);
UrlGroupKey group_key(const ParsedUrl& url);
// Replaces numeric segments by the placeholder and blanks query values.
ParsedUrl abstract_url(const ParsedUrl& url);

std::vector<ParsedUrl> select_representatives(const std::vector<ParsedUrl>& urls,
                                              std::uint64_t seed);

// Registrable domain ("site") using a compact built-in suffix table.
std::string registrable_domain(std::string_view host);

} // namespace wcd
