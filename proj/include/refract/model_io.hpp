#pragma once

#include "refract/levy_model.hpp"

#include <optional>
#include <string>

namespace refract {

/// Parsed model document: exactly one of the two problem kinds.
struct ModelDocument {
    std::optional<AuxiliaryProblem> single;
    std::optional<RegimeModel> regime;
};

/// Parses the documented JSON schema; throws SchemaError carrying the field
/// path of the first violation.
ModelDocument parse_model_document(const std::string& json_text);
ModelDocument load_model_document(const std::string& file_path);

/// Normalized JSON echo of a parsed document (feeding it back reproduces the run).
std::string document_to_json(const ModelDocument& doc);

/// key=value override applied to a parsed document (single: q, r, delta, beta,
/// gamma, sigma, c, lambda, mu; regime: beta).
void apply_override(ModelDocument& doc, const std::string& key, const std::string& value);

/// Serializes a double with 17 significant digits (bit-exact round trip).
std::string format_full(double v);

} // namespace refract
