#include "pcar/catalog.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "pcar/error.hpp"

namespace pcar::catalog {

namespace {

constexpr std::array<const char*, 8> kColumns = {"id",       "node",          "text",          "intervention_type",
                                                 "emotional_regulation", "therapy_group", "location",
                                                 "duration_seconds"};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

[[noreturn]] void row_error(ErrorKind kind, std::size_t row, const std::string& message) {
    throw Error(kind, "catalog row " + std::to_string(row) + ": " + message);
}

int node_number(const std::string& node) {
    constexpr std::string_view prefix = "node_id_";
    if (node.size() <= prefix.size() || node.compare(0, prefix.size(), prefix) != 0) return -1;
    int n = -1;
    const char* first = node.data() + prefix.size();
    const char* last = node.data() + node.size();
    auto [ptr, ec] = std::from_chars(first, last, n);
    if (ec != std::errc{} || ptr != last || n < 1) return -1;
    return n;
}

const char* const kAttributeColumns[] = {"emotional_regulation", "therapy_group", "location"};

std::string attribute_of(const InterventionSpec& e, std::size_t i) {
    switch (i) {
        case 0: return e.emotional_regulation;
        case 1: return e.therapy_group;
        default: return e.location;
    }
}

}  // namespace

Catalog::Catalog(agent::AttributeSchema schema, std::vector<InterventionSpec> entries)
    : schema_(std::move(schema)), entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(ErrorKind::SchemaViolation, "catalog is empty");
    if (schema_.size() != 3)
        throw Error(ErrorKind::SchemaViolation, "catalog schema must have the three attribute columns");
    for (std::size_t i = 0; i < 3; ++i)
        if (schema_[i].name != kAttributeColumns[i])
            throw Error(ErrorKind::SchemaViolation, "catalog schema attribute " + std::to_string(i) +
                                                        " must be '" + kAttributeColumns[i] + "'");
    std::set<std::string> ids;
    for (const auto& e : entries_) {
        if (!ids.insert(e.id).second) throw Error(ErrorKind::SchemaViolation, "duplicate id '" + e.id + "'");
        if (e.duration_seconds < 1 || e.duration_seconds > kMaxDurationSeconds)
            throw Error(ErrorKind::SchemaViolation, "'" + e.id + "' duration must be 1..60 seconds");
        for (std::size_t i = 0; i < 3; ++i)
            if (!schema_.find_value(i, attribute_of(e, i)))
                throw Error(ErrorKind::SchemaViolation, "'" + e.id + "' has unknown " + kAttributeColumns[i] +
                                                            " '" + attribute_of(e, i) + "'");
    }
}

const InterventionSpec* Catalog::find(const std::string& id) const {
    for (const auto& e : entries_)
        if (e.id == id) return &e;
    return nullptr;
}

Catalog parse_catalog(const std::string& text, const agent::AttributeSchema& schema) {
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    bool have_header = false;
    std::vector<InterventionSpec> entries;
    std::set<std::string> closed_ids;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto cols = split_tabs(line);
        if (!have_header) {
            if (cols.size() != kColumns.size() || !std::equal(cols.begin(), cols.end(), kColumns.begin()))
                row_error(ErrorKind::Parse, row, "unexpected header");
            have_header = true;
            continue;
        }
        if (cols.size() != kColumns.size())
            row_error(ErrorKind::Parse, row,
                      "expected " + std::to_string(kColumns.size()) + " columns, got " + std::to_string(cols.size()));

        InterventionSpec spec;
        spec.id = cols[0];
        if (spec.id.empty()) row_error(ErrorKind::Parse, row, "empty id");
        const std::string& node = cols[1];
        if (node_number(node) < 0) row_error(ErrorKind::Parse, row, "bad node id '" + node + "'");
        spec.intervention_type = cols[3];
        spec.emotional_regulation = cols[4];
        spec.therapy_group = cols[5];
        spec.location = cols[6];
        {
            const auto& d = cols[7];
            auto [ptr, ec] = std::from_chars(d.data(), d.data() + d.size(), spec.duration_seconds);
            if (ec != std::errc{} || ptr != d.data() + d.size())
                row_error(ErrorKind::Parse, row, "duration '" + d + "' is not an integer");
        }
        if (spec.duration_seconds < 1 || spec.duration_seconds > kMaxDurationSeconds)
            row_error(ErrorKind::SchemaViolation, row, "duration must be 1..60 seconds");
        for (std::size_t i = 0; i < 3; ++i)
            if (!schema.find_value(i, attribute_of(spec, i)))
                row_error(ErrorKind::SchemaViolation, row,
                          std::string("unknown ") + kAttributeColumns[i] + " '" + attribute_of(spec, i) + "'");

        if (!entries.empty() && entries.back().id == spec.id) {
            auto& cur = entries.back();
            if (cur.intervention_type != spec.intervention_type ||
                cur.emotional_regulation != spec.emotional_regulation || cur.therapy_group != spec.therapy_group ||
                cur.location != spec.location || cur.duration_seconds != spec.duration_seconds)
                row_error(ErrorKind::SchemaViolation, row, "attributes differ from earlier rows of '" + spec.id + "'");
            for (const auto& [n, _] : cur.node_texts)
                if (n == node) row_error(ErrorKind::SchemaViolation, row, "duplicate node '" + node + "'");
            cur.node_texts.emplace_back(node, cols[2]);
            continue;
        }
        if (!entries.empty()) closed_ids.insert(entries.back().id);
        if (closed_ids.count(spec.id)) row_error(ErrorKind::SchemaViolation, row, "duplicate id '" + spec.id + "'");
        spec.node_texts.emplace_back(node, cols[2]);
        entries.push_back(std::move(spec));
    }
    if (!have_header) throw Error(ErrorKind::Parse, "catalog has no header row");

    for (auto& e : entries)
        std::stable_sort(e.node_texts.begin(), e.node_texts.end(),
                         [](const auto& a, const auto& b) { return node_number(a.first) < node_number(b.first); });
    return Catalog(schema, std::move(entries));
}

Catalog load_catalog(const std::filesystem::path& path, const agent::AttributeSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open catalog '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_catalog(buf.str(), schema);
}

std::string serialize_catalog(const Catalog& catalog) {
    std::string out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) out += '\t';
        out += kColumns[i];
    }
    out += '\n';
    for (const auto& e : catalog.entries()) {
        for (const auto& [node, text] : e.node_texts) {
            out += e.id + '\t' + node + '\t' + text + '\t' + e.intervention_type + '\t' + e.emotional_regulation +
                   '\t' + e.therapy_group + '\t' + e.location + '\t' + std::to_string(e.duration_seconds) + '\n';
        }
    }
    return out;
}

nlohmann::json catalog_to_json(const Catalog& catalog) {
    using nlohmann::json;
    json entries = json::array();
    for (const auto& e : catalog.entries()) {
        json nodes = json::array();
        for (const auto& [node, text] : e.node_texts) nodes.push_back({{"node", node}, {"text", text}});
        entries.push_back({{"id", e.id},
                           {"intervention_type", e.intervention_type},
                           {"emotional_regulation", e.emotional_regulation},
                           {"therapy_group", e.therapy_group},
                           {"location", e.location},
                           {"duration_seconds", e.duration_seconds},
                           {"nodes", nodes}});
    }
    json schema = json::array();
    for (const auto& a : catalog.schema().attributes()) schema.push_back({{"name", a.name}, {"values", a.values}});
    return {{"schema_version", 1}, {"schema", schema}, {"entries", entries}};
}

MatchScore match_score(const Catalog& catalog, const InterventionSpec& entry, const agent::AttributeVector& action) {
    agent::validate(catalog.schema(), action);
    MatchScore s;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string& want = catalog.schema()[i].values[action.values[i]];
        const std::string have = attribute_of(entry, i);
        if (want == have) {
            ++s.matched;
            ++s.exact;
        } else if (i == 2 && (want == "both" || have == "both")) {
            ++s.matched;
        }
    }
    return s;
}

const InterventionSpec& resolve(const Catalog& catalog, const agent::AttributeVector& action, Engine& rng) {
    agent::validate(catalog.schema(), action);
    std::vector<std::size_t> best;
    MatchScore best_score{-1, -1};
    for (std::size_t i = 0; i < catalog.entries().size(); ++i) {
        const auto s = match_score(catalog, catalog.entries()[i], action);
        if (s > best_score) {
            best_score = s;
            best.clear();
        }
        if (s == best_score) best.push_back(i);
    }
    return catalog.entries()[best[uniform_index(rng, best.size())]];
}

}  // namespace pcar::catalog
