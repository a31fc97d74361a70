#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "jlvae/matrix.hpp"

namespace jlvae {

// Shortest decimal that round-trips a 64-bit float exactly (17 significant
// digits). All numeric file output goes through this so reruns are
// byte-identical.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

void write_matrix_csv(std::ostream& out, const Matrix& m);
Matrix read_matrix_csv(std::istream& in);

// Atomic-ish text file write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// FNV-1a 64 as a 16-hex-digit string.
std::string fnv1a_hex(const void* bytes, std::size_t len);
std::string fnv1a_hex(const std::string& text);

}  // namespace jlvae
