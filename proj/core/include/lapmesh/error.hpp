#pragma once

#include <stdexcept>
#include <string>

namespace lapmesh {

enum class ErrorCode {
  NonManifold,
  DegenerateFacet,
  FacetOutOfRange,
  EmptyInlierSet,
  NotPlanar,
  DegenerateConfiguration,
  ZeroAreaFacet,
  VirtualGramSingular,
  CountOutOfRange,
  RankDeficientInterior,
  EigenFailure,
  AllBehindCamera,
  AllRejected,
  NoConvergence,
  DegenerateInput,
  ParamOutOfRange,
  SingularKKT,
  InvalidArgument,
  ParseError,
  IoError,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable code. All library failures are
/// reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lapmesh
