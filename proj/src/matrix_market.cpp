#include "dre/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "dre/errors.hpp"

namespace dre {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ParseError(path + ": " + msg);
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos || line[pos] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  std::string line;
  if (!std::getline(in, line)) fail(path, "empty file");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix") fail(path, "missing %%MatrixMarket matrix banner");
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (field != "real" && field != "integer" && field != "pattern" && field != "double")
    fail(path, "unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    fail(path, "unsupported symmetry '" + symmetry + "'");

  if (!next_data_line(in, line)) fail(path, "missing size line");
  std::istringstream size(line);

  if (format == "array") {
    if (field == "pattern") fail(path, "pattern field is invalid for array format");
    long rows = 0, cols = 0;
    if (!(size >> rows >> cols) || rows < 0 || cols < 0) fail(path, "malformed size line");
    if (symmetry != "general") fail(path, "only general array files are supported");
    std::vector<Triplet> trip;
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) {
        if (!next_data_line(in, line)) fail(path, "unexpected end of data");
        std::istringstream v(line);
        double x;
        if (!(v >> x)) fail(path, "malformed value '" + line + "'");
        if (x != 0.0) trip.emplace_back(i, j, x);
      }
    SparseMatrix A(rows, cols);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
  }
  if (format != "coordinate") fail(path, "unsupported format '" + format + "'");

  long rows = 0, cols = 0, nnz = 0;
  if (!(size >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) fail(path, "malformed size line");
  std::vector<Triplet> trip;
  trip.reserve(symmetry == "general" ? nnz : 2 * nnz);
  for (long k = 0; k < nnz; ++k) {
    if (!next_data_line(in, line)) fail(path, "expected " + std::to_string(nnz) + " entries, got " + std::to_string(k));
    std::istringstream e(line);
    long i, j;
    double x = 1.0;
    if (!(e >> i >> j)) fail(path, "malformed entry '" + line + "'");
    if (field != "pattern" && !(e >> x)) fail(path, "malformed entry '" + line + "'");
    if (i < 1 || i > rows || j < 1 || j > cols) fail(path, "index out of range in '" + line + "'");
    trip.emplace_back(i - 1, j - 1, x);
    if (i != j && symmetry == "symmetric") trip.emplace_back(j - 1, i - 1, x);
    if (i != j && symmetry == "skew-symmetric") trip.emplace_back(j - 1, i - 1, -x);
  }
  SparseMatrix A(rows, cols);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

Matrix read_matrix_market_dense(const std::string& path) { return Matrix(read_matrix_market(path)); }

void write_matrix_market(const std::string& path, const SparseMatrix& A) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot write file");
  out << "%%MatrixMarket matrix coordinate real general\n"
      << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n'
      << std::setprecision(17);
  for (Index j = 0; j < A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(A, j); it; ++it)
      out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

void write_matrix_market(const std::string& path, const Matrix& A) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot write file");
  out << "%%MatrixMarket matrix array real general\n" << A.rows() << ' ' << A.cols() << '\n' << std::setprecision(17);
  for (Index j = 0; j < A.cols(); ++j)
    for (Index i = 0; i < A.rows(); ++i) out << A(i, j) << '\n';
}

}  // namespace dre
