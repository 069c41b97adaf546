#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gossipopt/optimizer.hpp"

namespace gossipopt {

/// Shortest round-trippable text for a double ("%.17g").
std::string format_double(double value);

/// Header `iteration,disagreement,objective,kkt_residual,deviation,avg_0..avg_{d-1}`.
/// A missing deviation is written as an empty field.
std::string trace_header(std::size_t dim);
void write_trace_csv(std::ostream& out, const RunTrace& trace);
/// Throws std::runtime_error if the file cannot be written.
void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);

/// Inverse of write_trace_csv; throws std::runtime_error on malformed input.
RunTrace read_trace_csv(std::istream& in);
RunTrace read_trace_csv(const std::filesystem::path& path);

/// Writes text to a file, creating parent directories; throws on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gossipopt
