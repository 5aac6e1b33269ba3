#pragma once

// Plain-text matrix files: no header, one matrix row per line, comma
// separated, 17 significant digits, LF line endings.

#include <filesystem>
#include <string>

#include "simplex_uq/training.hpp"
#include "simplex_uq/types.hpp"

namespace simplex_uq {

/// Shortest text for a double that reads back exactly ("%.17g").
std::string format_double(double value);

std::string format_matrix_csv(const Matrix& m);
/// Parses CSV text; `source` names the origin in "source:line: message" errors.
/// Bad numbers throw ParameterError, ragged rows ShapeError.
Matrix parse_matrix_csv(const std::string& text, const std::string& source);

Matrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

/// A single-row or single-column file as a vector.
Vector read_vector_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes bytes exactly (binary mode), creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Loads sample-per-row compositions (N x M) and observations (N x T) and
/// returns them in column convention. Checks shapes and simplex membership.
TrainingSet read_training_set(const std::filesystem::path& compositions,
                              const std::filesystem::path& observations);

}  // namespace simplex_uq
