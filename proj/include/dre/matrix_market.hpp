#pragma once

#include <string>

#include "dre/types.hpp"

namespace dre {

/// Reads `coordinate` (real, integer or pattern; general, symmetric or
/// skew-symmetric) and `array` (real or integer, general) files.
/// Throws ParseError with the offending path.
SparseMatrix read_matrix_market(const std::string& path);
Matrix read_matrix_market_dense(const std::string& path);

void write_matrix_market(const std::string& path, const SparseMatrix& A);
void write_matrix_market(const std::string& path, const Matrix& A);

}  // namespace dre
