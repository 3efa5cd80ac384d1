#include "wcd/crawler.h"

#include "wcd/cache_policy.h"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace wcd {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        auto next = s.find(sep, pos);
        if (next == std::string_view::npos) next = s.size();
        if (next > pos) out.emplace_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

ParsedUrl seed_url(const std::string& token) {
    auto text = token.find("://") == std::string::npos ? "http://" + token : token;
    auto url = parse_url(text);
    url.fragment.reset();
    return url;
}

void journal(const CrawlOptions& options, const nlohmann::json& record) {
    if (options.journal) *options.journal << record.dump() << '\n';
}

std::string html_unescape_href(std::string s) {
    static const std::pair<std::string_view, std::string_view> entities[] = {
        {"&amp;", "&"}, {"&#38;", "&"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&lt;", "<"}, {"&gt;", ">"},
    };
    for (const auto& [ent, rep] : entities) {
        for (auto pos = s.find(ent); pos != std::string::npos; pos = s.find(ent, pos + rep.size()))
            s.replace(pos, ent.size(), rep);
    }
    return s;
}

} // namespace

SeedPool parse_seed_pool(std::string_view text) {
    SeedPool pool;
    std::set<std::string> hosts;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) continue;
        auto where = "seed line " + std::to_string(lineno) + ": ";

        SeedSite site;
        try {
            site.root = seed_url(token);
        } catch (const MalformedUrl& e) {
            throw ConfigError(where + e.what());
        }
        site.primary_domain = site.root.host;
        while (fields >> token) {
            auto eq = token.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError(where + "expected key=value, got '" + token + "'");
            auto key = token.substr(0, eq);
            auto value = token.substr(eq + 1);
            if (key == "login") site.login_ref = value;
            else if (key == "markers") site.markers_ref = value;
            else if (key == "subdomains") {
                for (auto& h : split(value, ',')) site.subdomains.push_back(lower(h));
            } else throw ConfigError(where + "unknown key '" + key + "'");
        }
        if (hosts.insert(site.primary_domain).second) pool.sites.push_back(std::move(site));
    }
    return pool;
}

SeedPool filter_live(SeedPool pool, HttpEngine& probe) {
    auto answers = [&](const ParsedUrl& url) {
        Identity anon;
        try {
            probe.fetch(anon, url.str());
            return true;
        } catch (const std::exception&) {
            return false;
        }
    };
    SeedPool live;
    for (auto& site : pool.sites) {
        if (!answers(site.root)) continue;
        std::vector<std::string> subs;
        for (const auto& sub : site.subdomains) {
            auto url = site.root;
            url.host = sub;
            if (answers(url)) subs.push_back(sub);
        }
        site.subdomains = std::move(subs);
        live.sites.push_back(std::move(site));
    }
    return live;
}

SeedPool ingest_domains(const std::string& path, HttpEngine* probe) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read seed file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto pool = parse_seed_pool(buf.str());
    return probe ? filter_live(std::move(pool), *probe) : pool;
}

std::vector<ParsedUrl> extract_links(std::string_view body_view, const ParsedUrl& base) {
    static const std::regex anchor_re(R"re(<a\b[^>]*?\bhref\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+)))re", std::regex::icase);
    const std::string body(body_view);
    std::vector<ParsedUrl> out;
    for (std::sregex_iterator it(body.begin(), body.end(), anchor_re), end; it != end; ++it) {
        const auto& m = *it;
        auto href = html_unescape_href(m[1].matched ? m[1].str() : m[2].matched ? m[2].str() : m[3].str());
        if (href.empty() || href[0] == '#') continue;
        try {
            if (auto url = resolve_url(base, href)) {
                url->fragment.reset();
                out.push_back(std::move(*url));
            }
        } catch (const MalformedUrl&) {
        }
    }
    return out;
}

AttackSurface crawl_domain(HttpEngine& engine, const ParsedUrl& start_in, Identity& victim,
                           const CrawlOptions& options) {
    AttackSurface surface;
    auto start = start_in;
    start.fragment.reset();
    surface.domain = start.host;
    const auto site = registrable_domain(start.host);
    const std::size_t budget = std::max<std::size_t>(options.budget, 1);
    const std::size_t raw_cap = budget * std::max<std::size_t>(options.raw_cap_factor, 1);

    auto in_scope = [&](const ParsedUrl& u) {
        if (u.scheme != start.scheme) return false;
        if (registrable_domain(u.host) == site) return true;
        return std::find(options.extra_hosts.begin(), options.extra_hosts.end(), u.host) != options.extra_hosts.end();
    };

    std::set<UrlGroupKey> groups;
    std::set<std::string> seen;
    std::vector<ParsedUrl> discovered;
    std::deque<ParsedUrl> queue;

    auto admit = [&](const ParsedUrl& u) {
        auto text = u.str();
        if (seen.contains(text)) return;
        if (is_logout_link(text, options.logout_patterns)) return;
        auto key = group_key(u);
        if (!groups.contains(key)) {
            if (groups.size() >= budget) {
                surface.truncated = true;
                return;
            }
            groups.insert(key);
        }
        seen.insert(text);
        discovered.push_back(u);
        queue.push_back(u);
    };

    admit(start);
    while (!queue.empty()) {
        if (surface.fetches >= raw_cap) {
            surface.truncated = true;
            journal(options, {{"event", "raw_cap"}, {"domain", surface.domain}, {"fetches", surface.fetches}});
            break;
        }
        auto url = queue.front();
        queue.pop_front();
        auto text = url.str();
        HttpExchange ex;
        try {
            ++surface.fetches;
            ex = engine.fetch(victim, text);
        } catch (const std::exception& e) {
            journal(options, {{"event", "error"}, {"url", text}, {"error", e.what()}});
            continue;
        }
        journal(options, {{"event", "fetch"}, {"url", text}, {"status", ex.status}, {"bytes", ex.body.size()}});
        if (text == start.str()) surface.root_headers = ex.response_headers;
        surface.victim_bodies[text] = ex.body;

        ParsedUrl base = url;
        if (!ex.hops.empty()) {
            try {
                base = parse_url(ex.hops.back());
            } catch (const MalformedUrl&) {
            }
        }
        if (!in_scope(base)) continue;
        for (const auto& link : extract_links(ex.body, base)) {
            if (in_scope(link)) admit(link);
        }
    }

    surface.pages_seen = discovered.size();
    surface.groups = groups.size();
    surface.pages = select_representatives(discovered, options.seed);
    for (const auto& page : surface.pages) {
        auto text = page.str();
        journal(options, {{"event", "representative"}, {"url", text}, {"group", group_key(page).str()}});
        if (surface.victim_bodies.contains(text)) continue;
        try {
            surface.victim_bodies[text] = engine.fetch(victim, text).body;
        } catch (const std::exception& e) {
            journal(options, {{"event", "error"}, {"url", text}, {"error", e.what()}});
        }
    }
    return surface;
}

AttackSurface filter_marked_pages(AttackSurface surface, const MarkerSet& markers) {
    std::vector<ParsedUrl> kept;
    for (auto& page : surface.pages) {
        auto it = surface.victim_bodies.find(page.str());
        if (it != surface.victim_bodies.end() && !extract_markers(it->second, markers).empty())
            kept.push_back(std::move(page));
    }
    surface.pages = std::move(kept);
    return surface;
}

} // namespace wcd
