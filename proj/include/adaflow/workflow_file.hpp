#pragma once

#include <optional>
#include <string>

#include "adaflow/drivers.hpp"
#include "adaflow/orchestrator.hpp"

namespace adaflow {

class ParseError : public EngineError {
 public:
  explicit ParseError(const std::string& what, int line = 0, int column = 0)
      : EngineError(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct ResourceSection {
  ResourceRequest request{1, 4, 3600.0};
  ExecutorKind executor = ExecutorKind::mock;
  RetryPolicy retry;
};

enum class DriverKind { ensemble, sampling };

/// Parsed workflow document. Either `driver` is set (the workflow gets built
/// by the named driver at materialization time) or `workflow` + `policies`
/// hold the explicit declaration.
struct WorkflowFileDoc {
  std::uint64_t seed = 1;
  ResourceSection resources;
  std::optional<DriverKind> driver;
  EnsembleParams ensemble;  // valid when driver == ensemble
  SamplingParams sampling;  // valid when driver == sampling
  Workflow workflow;
  PolicySet policies;
};

/// Parses the JSON text. Unknown keys anywhere in the document are rejected.
/// Syntax errors carry a 1-based line/column; structural errors carry the
/// offending key path in the message.
WorkflowFileDoc parse_workflow_file(const std::string& text);

WorkflowFileDoc load_workflow_file(const std::string& path);

struct MaterializedWorkflow {
  Workflow workflow;
  PolicySet policies;
};

/// Resolves the document into run_workflow inputs. Driver documents build
/// their workflow against shared_data_dir; explicit documents get it filled
/// in when the file left it unset.
MaterializedWorkflow materialize_workflow(const WorkflowFileDoc& doc,
                                          const std::string& shared_data_dir);

}  // namespace adaflow
