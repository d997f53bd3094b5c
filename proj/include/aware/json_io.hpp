#pragma once

// JSON mapping of the domain types shared by the HTTP API, the event log and
// the workflow files. Field names are part of the wire format.

#include <json.hpp>

#include "aware/dataset.hpp"
#include "aware/ledger.hpp"
#include "aware/session.hpp"
#include "aware/stats.hpp"

namespace aware::stats {
void to_json(nlohmann::json& j, const Histogram& h);
void from_json(const nlohmann::json& j, Histogram& h);
void to_json(nlohmann::json& j, const TestResult& r);
}  // namespace aware::stats

namespace aware::data {
void to_json(nlohmann::json& j, const FilterPredicate& f);
void from_json(const nlohmann::json& j, FilterPredicate& f);
}  // namespace aware::data

namespace aware::ledger {
/// {"name": "fixed", "gamma": 10}
nlohmann::json policy_to_json(const PolicyConfig& policy);
/// Accepts the object form or a "name:key=value" string.
PolicyConfig policy_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const LedgerConfig& config);
/// Missing fields take defaults: alpha 0.05, eta 1 - alpha, omega alpha,
/// policy fixed.
LedgerConfig config_from_json(const nlohmann::json& j);
}  // namespace aware::ledger

namespace aware::session {
void to_json(nlohmann::json& j, const VisualizationSpec& v);
void from_json(const nlohmann::json& j, VisualizationSpec& v);

nlohmann::json test_spec_to_json(const TestSpec& spec);
TestSpec test_spec_from_json(const nlohmann::json& j);

nlohmann::json record_to_json(const HypothesisRecord& record);
}  // namespace aware::session
