#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "adaflow/workflow.hpp"

namespace adaflow {

/// The three graph rewrites a post-execution hook may stage. All of them obey
/// the transfer rule: only entities that have not started executing may
/// change. Past and running entities are immutable.

struct AppendStage {
  Uid pipeline;
  Stage stage;
};

/// Permutes stages [first_index, end) of the pipeline: new[first_index + i] =
/// old[first_index + permutation[i]]. Every touched stage must be PENDING.
struct ReorderFutureStages {
  Uid pipeline;
  std::size_t first_index = 0;
  std::vector<std::size_t> permutation;
};

struct SetTaskCores {
  Uid pipeline;
  Uid stage;
  Uid task;
  int cores = 1;
};

using Mutation = std::variant<AppendStage, ReorderFutureStages, SetTaskCores>;

const Uid& mutation_pipeline(const Mutation& m);

/// Applies one mutation in place. Throws MutationGuardViolation when the
/// mutation touches a non-future entity, EngineError on unknown uids, invalid
/// permutations, or uid collisions for appended entities.
void apply_mutation(Workflow& wf, const Mutation& m);

}  // namespace adaflow
