#pragma once

#include <string>

#include <json.hpp>

#include "cohsync/io.hpp"

namespace cohsync::detail {

using Json = nlohmann::ordered_json;

inline Matrix matrix_from_json(const Json& node, const std::string& field) {
  if (!node.is_array() || node.empty()) {
    throw io::ConfigError(field + ": expected a nonempty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(node.size());
  if (!node[0].is_array()) throw io::ConfigError(field + ": rows must be arrays");
  const auto cols = static_cast<Eigen::Index>(node[0].size());
  Matrix out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = node[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw io::ConfigError(field + ": ragged row " + std::to_string(r));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw io::ConfigError(field + ": non-numeric entry at (" + std::to_string(r) + ", " +
                              std::to_string(c) + ")");
      }
      out(r, c) = v.get<double>();
    }
  }
  return out;
}

inline Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw io::ConfigError(what + ": " + e.what());
  }
}

}  // namespace cohsync::detail
