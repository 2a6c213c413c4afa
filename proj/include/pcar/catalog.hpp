#pragma once

// Intervention content pool.
//
// File format: UTF-8, tab-separated, one dialog line per row, with the header
//
//   id  node  text  intervention_type  emotional_regulation  therapy_group  location  duration_seconds
//
// Rows sharing an id form one intervention; they must be contiguous, carry
// identical attribute columns, and use distinct node ids (node_id_<n>).
// Blank lines and lines starting with '#' are ignored.

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcar/agent.hpp"
#include "pcar/rng.hpp"

namespace pcar::catalog {

inline constexpr int kMaxDurationSeconds = 60;

struct InterventionSpec {
    std::string id;
    /// (node id, text), ordered by node number.
    std::vector<std::pair<std::string, std::string>> node_texts;
    std::string intervention_type;
    std::string emotional_regulation;
    std::string therapy_group;
    std::string location;
    int duration_seconds = kMaxDurationSeconds;

    friend bool operator==(const InterventionSpec&, const InterventionSpec&) = default;
};

class Catalog {
public:
    Catalog(agent::AttributeSchema schema, std::vector<InterventionSpec> entries);

    const agent::AttributeSchema& schema() const noexcept { return schema_; }
    const std::vector<InterventionSpec>& entries() const noexcept { return entries_; }
    const InterventionSpec* find(const std::string& id) const;

    friend bool operator==(const Catalog&, const Catalog&) = default;

private:
    agent::AttributeSchema schema_;
    std::vector<InterventionSpec> entries_;
};

Catalog parse_catalog(const std::string& text, const agent::AttributeSchema& schema = agent::AttributeSchema::defaults());
Catalog load_catalog(const std::filesystem::path& path,
                     const agent::AttributeSchema& schema = agent::AttributeSchema::defaults());

std::string serialize_catalog(const Catalog& catalog);
nlohmann::json catalog_to_json(const Catalog& catalog);

/// Number of attributes an entry satisfies, and how many of those are exact.
/// A location of "both" on either side matches indoor and outdoor.
struct MatchScore {
    int matched = 0;
    int exact = 0;

    friend auto operator<=>(const MatchScore&, const MatchScore&) = default;
};

MatchScore match_score(const Catalog& catalog, const InterventionSpec& entry, const agent::AttributeVector& action);

/// Picks uniformly among the entries with the highest MatchScore.
const InterventionSpec& resolve(const Catalog& catalog, const agent::AttributeVector& action, Engine& rng);

}  // namespace pcar::catalog
