#include "lapmesh/error.hpp"

namespace lapmesh {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonManifold: return "NonManifold";
    case ErrorCode::DegenerateFacet: return "DegenerateFacet";
    case ErrorCode::FacetOutOfRange: return "FacetOutOfRange";
    case ErrorCode::EmptyInlierSet: return "EmptyInlierSet";
    case ErrorCode::NotPlanar: return "NotPlanar";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ZeroAreaFacet: return "ZeroAreaFacet";
    case ErrorCode::VirtualGramSingular: return "VirtualGramSingular";
    case ErrorCode::CountOutOfRange: return "CountOutOfRange";
    case ErrorCode::RankDeficientInterior: return "RankDeficientInterior";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::AllBehindCamera: return "AllBehindCamera";
    case ErrorCode::AllRejected: return "AllRejected";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::SingularKKT: return "SingularKKT";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace lapmesh
