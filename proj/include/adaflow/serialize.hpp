#pragma once

#include <string>

#include "adaflow/mutation.hpp"
#include "adaflow/store.hpp"
#include "adaflow/task_graph.hpp"
#include "adaflow/workflow.hpp"

// JSON conversions live in one translation unit so the (large) JSON library
// header stays out of the hot include graph. Declarations use the library's
// forward header only.

#include <nlohmann/json_fwd.hpp>

namespace adaflow {

void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);
void to_json(nlohmann::json& j, const Stage& s);
void from_json(const nlohmann::json& j, Stage& s);
void to_json(nlohmann::json& j, const Pipeline& p);
void from_json(const nlohmann::json& j, Pipeline& p);
void to_json(nlohmann::json& j, const Workflow& w);
void from_json(const nlohmann::json& j, Workflow& w);

void to_json(nlohmann::json& j, const Mutation& m);
void from_json(const nlohmann::json& j, Mutation& m);

void to_json(nlohmann::json& j, const TaskGraph& g);

void to_json(nlohmann::json& j, const StateDelta& d);
void from_json(const nlohmann::json& j, StateDelta& d);
void to_json(nlohmann::json& j, const SyncDelta& d);
void from_json(const nlohmann::json& j, SyncDelta& d);
void to_json(nlohmann::json& j, const TaskRuntime& r);
void from_json(const nlohmann::json& j, TaskRuntime& r);

std::string workflow_to_json_string(const Workflow& w);
Workflow workflow_from_json_string(const std::string& text);

}  // namespace adaflow
