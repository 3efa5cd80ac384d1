// Structural group key computed from the URL text alone: every all-digit path
// segment becomes a placeholder and the query keeps only its sorted,
// de-duplicated parameter names.

#pragma once

#include <algorithm>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline std::string group_of(const std::string& url) {
    static const std::regex re(R"(^https?://([^/?#]+)([^?#]*)(\?([^#]*))?)", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(url, m, re)) return {};
    std::string host = m[1].str();
    if (auto colon = host.find(':'); colon != std::string::npos) host.erase(colon);
    for (auto& c : host) c = char(std::tolower((unsigned char)c));

    std::string path = m[2].str().empty() ? "/" : m[2].str();
    std::string abstract;
    std::size_t pos = 0;
    while (pos < path.size()) {
        auto next = path.find('/', pos + 1);
        if (next == std::string::npos) next = path.size();
        auto seg = path.substr(pos + 1, next - pos - 1);
        bool digits = !seg.empty() && std::all_of(seg.begin(), seg.end(), [](char c) { return c >= '0' && c <= '9'; });
        abstract += "/" + (digits ? std::string("{n}") : seg);
        pos = next;
    }
    if (path == "/") abstract = "/";

    std::set<std::string> names;
    if (m[3].matched) {
        std::string q = m[4].str();
        std::size_t p = 0;
        while (p <= q.size()) {
            auto amp = q.find('&', p);
            if (amp == std::string::npos) amp = q.size();
            auto pair = q.substr(p, amp - p);
            if (!pair.empty()) names.insert(pair.substr(0, pair.find('=')));
            p = amp + 1;
        }
    }
    std::string key = host + abstract;
    for (const auto& n : names) key += "|" + n;
    return key;
}

inline std::size_t count_groups(const std::vector<std::string>& urls) {
    std::set<std::string> keys;
    for (const auto& u : urls) keys.insert(group_of(u));
    return keys.size();
}

} // namespace oracle
