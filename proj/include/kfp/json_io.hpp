#pragma once

#include <string>

#include <json.hpp>

#include "kfp/dense.hpp"
#include "kfp/model.hpp"

namespace kfp {

using json = nlohmann::ordered_json;

/// Parses JSON text; syntax errors become ConfigError with line and column.
json parse_json_text(const std::string& text, const std::string& source = "<input>");

json model_to_json(const ModelSpec& m);
/// Throws ConfigError on a malformed document, InvalidModel on bad contents.
ModelSpec model_from_json(const json& j, bool require_invertible = true);

json matrix_to_json(const Matrix& m);
json complex_to_json(const cplx& z);

}  // namespace kfp
