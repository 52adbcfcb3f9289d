#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lapmesh::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,      // solver or data failure (e.g. every correspondence rejected)
  kExitConfig = 2,       // bad flags, config or input files
  kExitNoConvergence = 3 // refinement hit its iteration cap; outputs are still written
};

/// Entry point of the `lapmesh` tool. Errors are reported as one JSON object
/// on `err`; human-readable summaries go to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lapmesh::cli
