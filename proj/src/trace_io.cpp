#include "gossipopt/trace_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gossipopt {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(const std::string& field, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  // strtod flags subnormals with ERANGE, so only the parse extent is checked
  if (field.empty() || end != field.c_str() + field.size()) {
    throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string trace_header(std::size_t dim) {
  std::string h = "iteration,disagreement,objective,kkt_residual,deviation";
  for (std::size_t k = 0; k < dim; ++k) h += ",avg_" + std::to_string(k);
  return h;
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << trace_header(trace.dim) << '\n';
  for (const auto& r : trace.records) {
    out << r.iteration << ',' << format_double(r.disagreement) << ',' << format_double(r.objective) << ','
        << format_double(r.kkt_residual) << ',';
    if (r.deviation) out << format_double(*r.deviation);
    for (Eigen::Index k = 0; k < r.average.size(); ++k) out << ',' << format_double(r.average(k));
    out << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace) {
  std::ostringstream buf;
  write_trace_csv(buf, trace);
  write_text_file(path, buf.str());
}

RunTrace read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trace csv: missing header");
  const auto header = split_fields(line);
  if (header.size() < 5) throw std::runtime_error("trace csv: header too short");
  RunTrace trace;
  trace.dim = header.size() - 5;
  if (line != trace_header(trace.dim)) throw std::runtime_error("trace csv: unexpected header '" + line + "'");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw std::runtime_error("trace csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    TraceRecord r;
    r.iteration = static_cast<std::size_t>(std::stoull(f[0]));
    r.disagreement = parse_double(f[1], line_no);
    r.objective = parse_double(f[2], line_no);
    r.kkt_residual = parse_double(f[3], line_no);
    if (!f[4].empty()) r.deviation = parse_double(f[4], line_no);
    r.average.resize(static_cast<Eigen::Index>(trace.dim));
    for (std::size_t k = 0; k < trace.dim; ++k) r.average(static_cast<Eigen::Index>(k)) = parse_double(f[5 + k], line_no);
    trace.records.push_back(std::move(r));
  }
  return trace;
}

RunTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trace_csv(in);
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace gossipopt
