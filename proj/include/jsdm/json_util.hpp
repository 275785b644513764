#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

namespace jsdm {

/// 64-bit FNV-1a, 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// {"rows": r, "cols": c, "data": [row-major values]}
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace jsdm
