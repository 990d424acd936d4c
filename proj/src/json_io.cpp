#include "kfp/json_io.hpp"

#include <algorithm>

#include "kfp/errors.hpp"

namespace kfp {

json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": malformed JSON (" + e.what() + ")",
                      line, col);
  }
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json complex_to_json(const cplx& z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

json model_to_json(const ModelSpec& m) {
  json phi = json::array();
  for (const auto& t : m.phi.terms()) phi.push_back(json{{"exps", t.exps}, {"coef", t.coef}});
  return json{{"name", m.name}, {"dim", m.dim}, {"phi", phi}, {"A", matrix_to_json(m.a)}};
}

ModelSpec model_from_json(const json& j, bool require_invertible) {
  auto fail = [](const std::string& what) -> ConfigError { return ConfigError("model: " + what); };
  if (!j.is_object()) throw fail("expected an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "name" && key != "dim" && key != "phi" && key != "A")
      throw fail("unknown key '" + key + "'");
  }
  for (const char* key : {"name", "dim", "phi", "A"})
    if (!j.contains(key)) throw fail(std::string("missing key '") + key + "'");
  if (!j["name"].is_string()) throw fail("'name' must be a string");
  if (!j["dim"].is_number_integer() || j["dim"].get<int>() <= 0)
    throw fail("'dim' must be a positive integer");
  ModelSpec m;
  m.name = j["name"].get<std::string>();
  m.dim = j["dim"].get<int>();
  if (!j["phi"].is_array()) throw fail("'phi' must be an array");
  std::vector<Monomial> terms;
  for (const auto& t : j["phi"]) {
    if (!t.is_object() || !t.contains("exps") || !t.contains("coef") || !t["exps"].is_array() ||
        !t["coef"].is_number())
      throw fail("each phi term needs 'exps' (array) and 'coef' (number)");
    Monomial mono;
    for (const auto& e : t["exps"]) {
      if (!e.is_number_integer()) throw fail("exponents must be integers");
      mono.exps.push_back(e.get<int>());
    }
    mono.coef = t["coef"].get<double>();
    terms.push_back(std::move(mono));
  }
  m.phi = Polynomial(m.dim, std::move(terms));
  const json& a = j["A"];
  if (!a.is_array() || a.size() != static_cast<std::size_t>(m.dim))
    throw fail("'A' must be a dim x dim array");
  m.a = Matrix(m.dim, m.dim);
  for (int r = 0; r < m.dim; ++r) {
    if (!a[r].is_array() || a[r].size() != static_cast<std::size_t>(m.dim))
      throw fail("'A' must be a dim x dim array");
    for (int c = 0; c < m.dim; ++c) {
      if (!a[r][c].is_number()) throw fail("'A' entries must be numbers");
      m.a(r, c) = a[r][c].get<double>();
    }
  }
  m.validate(require_invertible);
  return m;
}

}  // namespace kfp
