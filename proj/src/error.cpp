#include "frsf/error.hpp"

namespace frsf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::validation: return "validation";
    case ErrorKind::schema: return "schema";
    case ErrorKind::censoring_consistency: return "censoring-consistency";
    case ErrorKind::missing_series: return "missing-series";
    case ErrorKind::domain: return "domain";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::degenerate_series: return "degenerate-series";
    case ErrorKind::truncation_domain: return "truncation-domain";
    case ErrorKind::sparse_support: return "sparse-support";
    case ErrorKind::bandwidth_selection: return "bandwidth-selection";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::degenerate_model: return "degenerate-model";
    case ErrorKind::conditioning: return "conditioning";
    case ErrorKind::contract: return "contract";
    case ErrorKind::empty_sample: return "empty-sample";
    case ErrorKind::degenerate_split: return "degenerate-split";
    case ErrorKind::unlearnable: return "unlearnable";
    case ErrorKind::input: return "input";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::name: return "name";
    case ErrorKind::undefined_concordance: return "undefined-concordance";
    case ErrorKind::evaluability: return "evaluability";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace frsf
