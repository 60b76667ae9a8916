#pragma once

// File formats.  CSV columns are fixed and documented in the README; doubles
// are printed in shortest round-trip form so a written file re-parses to the
// exact same bits, which is what makes golden-file and determinism tests
// meaningful.  All writes go through a temp-file-then-rename so readers never
// observe a half-written file.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "distillkit/analysis.hpp"
#include "distillkit/distillation.hpp"
#include "distillkit/errors.hpp"
#include "distillkit/kernels.hpp"
#include "distillkit/spectral.hpp"

namespace distillkit {

using json = nlohmann::ordered_json;

namespace detail {

inline std::string format_double(double value) {
  char buf[64];
  const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const std::from_chars_result res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end)
    throw BadConfig("line " + std::to_string(line_no) + ": not a number: '" + token + "'");
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace detail

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open for reading: " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure("read failed: " + path.string());
  return content;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open for writing: " + tmp.string());
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) throw IoFailure("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoFailure("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

// --- Kernel ----------------------------------------------------------------

inline json kernel_to_json(const KernelSpec& kernel) {
  json j;
  switch (kernel.family()) {
    case KernelSpec::Family::cubic_spline_green:
      j["type"] = "cubic_spline_green";
      break;
    case KernelSpec::Family::gaussian:
      j["type"] = "gaussian";
      j["bandwidth"] = kernel.bandwidth();
      break;
  }
  return j;
}

inline KernelSpec kernel_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
    throw BadConfig("kernel: expected an object with a string 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "cubic_spline_green") return KernelSpec::cubic_spline_green();
  if (type == "gaussian") {
    if (!j.contains("bandwidth") || !j.at("bandwidth").is_number())
      throw BadConfig("kernel: gaussian requires a numeric 'bandwidth'");
    return KernelSpec::gaussian(j.at("bandwidth").get<double>());
  }
  throw BadConfig("kernel: unknown type '" + type + "'");
}

// --- Points ----------------------------------------------------------------

// One-dimensional points serialize as plain numbers; anything else as arrays.
inline json points_to_json(std::span<const Point> points) {
  bool all_scalar = true;
  for (const Point& p : points)
    if (p.size() != 1) all_scalar = false;
  json j = json::array();
  for (const Point& p : points) {
    if (all_scalar)
      j.push_back(p[0]);
    else
      j.push_back(json(p));
  }
  return j;
}

inline std::vector<Point> points_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw BadConfig("points: expected a nonempty array");
  std::vector<Point> points;
  for (const json& entry : j) {
    if (entry.is_number()) {
      points.push_back({entry.get<double>()});
    } else if (entry.is_array() && !entry.empty()) {
      Point p;
      for (const json& coord : entry) {
        if (!coord.is_number()) throw BadConfig("points: coordinates must be numbers");
        p.push_back(coord.get<double>());
      }
      points.push_back(std::move(p));
    } else {
      throw BadConfig("points: each entry must be a number or a nonempty array");
    }
  }
  return points;
}

// --- Trace -----------------------------------------------------------------

// Row layout: t, c_t, norm_z, train_err_eps, train_err_y0, collapsed,
// b_1..b_K.  The collapsed flag is 1 on the row whose NEXT round would have
// collapsed, i.e. the final completed round of a chain that ended by
// collapse; every other row (and every row of a max_rounds-truncated chain)
// carries 0.
inline std::string trace_to_csv(const DistillationTrace& trace) {
  std::string out = "t,c_t,norm_z,train_err_eps,train_err_y0,collapsed";
  for (std::size_t k = 1; k <= trace.spectrum.dim; ++k) out += ",b_" + std::to_string(k);
  out += "\n";
  for (const DistillationState& st : trace.states) {
    const bool next_collapsed = trace.collapsed_at && st.t + 1 == *trace.collapsed_at;
    out += std::to_string(st.t);
    out += "," + detail::format_double(st.c);
    out += "," + detail::format_double(st.norm_z);
    out += "," + detail::format_double(st.train_error);
    out += "," + detail::format_double(st.train_error_vs_y0);
    out += next_collapsed ? ",1" : ",0";
    for (double b : st.b_diag) out += "," + detail::format_double(b);
    out += "\n";
  }
  return out;
}

inline json trace_to_json(const DistillationTrace& trace) {
  json j;
  j["epsilon"] = trace.epsilon;
  j["k"] = trace.spectrum.dim;
  j["collapsed_at"] = trace.collapsed_at ? json(*trace.collapsed_at) : json(nullptr);
  j["kernel"] = kernel_to_json(trace.kernel);
  j["points"] = points_to_json(trace.points);
  j["y0"] = trace.y0;
  json spec;
  spec["eigenvalues"] = trace.spectrum.eigvals;
  spec["null_dim"] = trace.spectrum.null_dim;
  spec["condition"] = std::isfinite(trace.spectrum.cond) ? json(trace.spectrum.cond) : json(nullptr);
  json vectors = json::array();
  for (std::size_t i = 0; i < trace.spectrum.dim; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < trace.spectrum.dim; ++k) row.push_back(trace.spectrum.v(i, k));
    vectors.push_back(std::move(row));
  }
  spec["eigenvectors"] = std::move(vectors);
  j["spectrum"] = std::move(spec);
  json states = json::array();
  for (const DistillationState& st : trace.states) {
    json s;
    s["t"] = st.t;
    s["c"] = st.c;
    s["norm_z"] = st.norm_z;
    s["train_error"] = st.train_error;
    s["train_error_vs_y0"] = st.train_error_vs_y0;
    s["y"] = st.y;
    s["z"] = st.z;
    s["a_diag"] = st.a_diag;
    s["b_diag"] = st.b_diag;
    states.push_back(std::move(s));
  }
  j["states"] = std::move(states);
  return j;
}

namespace detail {

inline std::vector<double> number_vector(const json& j, const std::string& where,
                                         std::size_t expected) {
  if (!j.is_array() || j.size() != expected)
    throw BadConfig(where + ": expected an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  out.reserve(expected);
  for (const json& v : j) {
    if (!v.is_number()) throw BadConfig(where + ": entries must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

// Structural validation only: sizes and types must line up, but recorded
// values are taken at face value so that consistency checks downstream
// (bound_comparisons) can catch tampered or stale numbers.
inline DistillationTrace trace_from_json(const json& j) {
  if (!j.is_object()) throw BadConfig("trace: expected a JSON object");
  for (const char* key : {"epsilon", "k", "collapsed_at", "kernel", "points", "y0", "spectrum", "states"})
    if (!j.contains(key)) throw BadConfig(std::string("trace: missing key '") + key + "'");
  DistillationTrace trace;
  if (!j.at("epsilon").is_number()) throw BadConfig("trace: epsilon must be a number");
  trace.epsilon = j.at("epsilon").get<double>();
  if (!j.at("k").is_number_unsigned()) throw BadConfig("trace: k must be a nonnegative integer");
  const std::size_t dim = j.at("k").get<std::size_t>();
  if (dim == 0) throw BadConfig("trace: k must be positive");
  if (j.at("collapsed_at").is_null()) {
    trace.collapsed_at = std::nullopt;
  } else if (j.at("collapsed_at").is_number_unsigned()) {
    trace.collapsed_at = j.at("collapsed_at").get<std::size_t>();
  } else {
    throw BadConfig("trace: collapsed_at must be null or a nonnegative integer");
  }
  trace.kernel = kernel_from_json(j.at("kernel"));
  trace.points = points_from_json(j.at("points"));
  if (trace.points.size() != dim) throw BadConfig("trace: points size does not match k");
  trace.y0 = detail::number_vector(j.at("y0"), "trace.y0", dim);

  const json& spec = j.at("spectrum");
  if (!spec.is_object()) throw BadConfig("trace.spectrum: expected an object");
  trace.spectrum.dim = dim;
  trace.spectrum.eigvals = detail::number_vector(spec.at("eigenvalues"), "trace.spectrum.eigenvalues", dim);
  if (!spec.contains("null_dim") || !spec.at("null_dim").is_number_unsigned())
    throw BadConfig("trace.spectrum: null_dim must be a nonnegative integer");
  trace.spectrum.null_dim = spec.at("null_dim").get<std::size_t>();
  if (spec.at("condition").is_null())
    trace.spectrum.cond = std::numeric_limits<double>::infinity();
  else if (spec.at("condition").is_number())
    trace.spectrum.cond = spec.at("condition").get<double>();
  else
    throw BadConfig("trace.spectrum: condition must be null or a number");
  const json& vectors = spec.at("eigenvectors");
  if (!vectors.is_array() || vectors.size() != dim)
    throw BadConfig("trace.spectrum.eigenvectors: expected " + std::to_string(dim) + " rows");
  trace.spectrum.eigvecs.assign(dim * dim, 0.0);
  for (std::size_t k = 0; k < dim; ++k) {
    const std::vector<double> row =
        detail::number_vector(vectors[k], "trace.spectrum.eigenvectors[" + std::to_string(k) + "]", dim);
    for (std::size_t i = 0; i < dim; ++i) trace.spectrum.eigvecs[k * dim + i] = row[i];
  }

  const json& states = j.at("states");
  if (!states.is_array() || states.empty()) throw BadConfig("trace.states: expected a nonempty array");
  for (const json& s : states) {
    if (!s.is_object()) throw BadConfig("trace.states: entries must be objects");
    DistillationState st;
    if (!s.contains("t") || !s.at("t").is_number_unsigned())
      throw BadConfig("trace.states: t must be a nonnegative integer");
    st.t = s.at("t").get<std::size_t>();
    for (const char* key : {"c", "norm_z", "train_error", "train_error_vs_y0"})
      if (!s.contains(key) || !s.at(key).is_number())
        throw BadConfig(std::string("trace.states: missing numeric '") + key + "'");
    st.c = s.at("c").get<double>();
    st.norm_z = s.at("norm_z").get<double>();
    st.train_error = s.at("train_error").get<double>();
    st.train_error_vs_y0 = s.at("train_error_vs_y0").get<double>();
    st.y = detail::number_vector(s.at("y"), "trace.states.y", dim);
    st.z = detail::number_vector(s.at("z"), "trace.states.z", dim);
    st.a_diag = detail::number_vector(s.at("a_diag"), "trace.states.a_diag", dim);
    st.b_diag = detail::number_vector(s.at("b_diag"), "trace.states.b_diag", dim);
    trace.states.push_back(std::move(st));
  }
  for (DistillationState& st : trace.states) st.z0 = trace.states.front().z;
  return trace;
}

// --- Report ----------------------------------------------------------------

inline json report_to_json(const TheoryReport& report) {
  json j;
  j["r0"] = report.r0;
  j["kappa"] = std::isfinite(report.kappa) ? json(report.kappa) : json(nullptr);
  j["kappa_positive"] = report.kappa_positive;
  j["guaranteed_rounds"] = report.guaranteed_rounds;
  j["guaranteed_rounds_positive"] = report.guaranteed_rounds_positive;
  j["z_lower_bounds"] = report.z_lower_bounds;
  json ratios = json::array();
  for (const RatioBoundRow& row : report.ratio_bounds) {
    json r;
    r["t"] = row.t;
    r["j"] = row.j;
    r["k"] = row.k;
    r["bound"] = row.bound;
    r["observed"] = row.observed;
    r["guaranteed"] = row.guaranteed;
    ratios.push_back(std::move(r));
  }
  j["ratio_bounds"] = std::move(ratios);
  j["sparsity_index_per_t"] = report.sparsity_index_per_t;
  j["sparsity_at_t_under"] = report.sparsity_at_t_under;
  j["sparsity_limit"] = report.sparsity_limit;
  j["degenerate_spectrum"] = report.degenerate_spectrum;
  j["equivalent_spectrum"] = report.equivalent_spectrum;
  j["trace_proxy"] = report.trace_proxy;
  j["tail_proxy"] = report.tail_proxy;
  j["trace_proxy_per_t"] = report.trace_proxy_per_t;
  json early = json::array();
  for (const EarlyStoppingRow& row : report.early_stopping) {
    json r;
    r["t"] = row.t;
    r["epsilon_prime"] = row.epsilon_prime;
    r["c_prime"] = row.c_prime;
    r["early_diag"] = row.early_diag;
    r["b_diag"] = row.b_diag;
    r["early_spread"] = row.early_spread;
    r["b_spread"] = row.b_spread;
    r["early_spread_smaller"] = row.early_spread_smaller;
    early.push_back(std::move(r));
  }
  j["early_stopping"] = std::move(early);
  return j;
}

// --- Bound rows ------------------------------------------------------------

// Columns: quantity, t, bound, observed, satisfied.  t is blank for
// whole-trace aggregates.
inline std::string bounds_to_csv(std::span<const BoundRow> rows) {
  std::string out = "quantity,t,bound,observed,satisfied\n";
  for (const BoundRow& row : rows) {
    out += row.quantity;
    out += ",";
    if (row.t) out += std::to_string(*row.t);
    out += "," + detail::format_double(row.bound);
    out += "," + detail::format_double(row.observed);
    out += row.satisfied ? ",true" : ",false";
    out += "\n";
  }
  return out;
}

// --- Sampled curves ----------------------------------------------------------

// Columns: x, then one column per provided series.
inline std::string curve_to_csv(std::span<const std::string> column_names,
                                std::span<const double> xs,
                                std::span<const std::vector<double>> columns) {
  if (column_names.size() != columns.size())
    throw PreconditionViolation("curve_to_csv: name/column count mismatch");
  for (const std::vector<double>& col : columns)
    if (col.size() != xs.size())
      throw PreconditionViolation("curve_to_csv: column length does not match sample count");
  std::string out = "x";
  for (const std::string& name : column_names) out += "," + name;
  out += "\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out += detail::format_double(xs[i]);
    for (const std::vector<double>& col : columns) out += "," + detail::format_double(col[i]);
    out += "\n";
  }
  return out;
}

// --- Dataset input ---------------------------------------------------------

// A parsed input table: scalar inputs plus one label column per output.
struct LoadedDataset {
  std::vector<Point> points;
  std::vector<std::vector<double>> label_columns;
  std::vector<std::string> label_names;
};

// Header must be `x` followed by at least one label column name; every data
// row carries the same number of numeric cells.
inline LoadedDataset load_dataset_csv(const std::string& text) {
  LoadedDataset out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (line_no == 1) {
      if (cells.size() < 2 || cells[0] != "x")
        throw BadConfig("dataset csv: header must be 'x' plus at least one label column");
      out.label_names.assign(cells.begin() + 1, cells.end());
      out.label_columns.resize(out.label_names.size());
      continue;
    }
    if (cells.size() != out.label_names.size() + 1)
      throw BadConfig("dataset csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(out.label_names.size() + 1) + " cells, got " +
                      std::to_string(cells.size()));
    out.points.push_back({detail::parse_double(cells[0], line_no)});
    for (std::size_t q = 0; q < out.label_columns.size(); ++q)
      out.label_columns[q].push_back(detail::parse_double(cells[q + 1], line_no));
  }
  if (out.points.empty()) throw BadConfig("dataset csv: no data rows");
  return out;
}

// Object form: {"points": [...], "labels": [...]} where labels is either one
// flat array (single output) or an array of per-output arrays.
inline LoadedDataset load_dataset_json(const json& j) {
  if (!j.is_object() || !j.contains("points") || !j.contains("labels"))
    throw BadConfig("dataset json: expected an object with 'points' and 'labels'");
  LoadedDataset out;
  out.points = points_from_json(j.at("points"));
  const json& labels = j.at("labels");
  if (!labels.is_array() || labels.empty())
    throw BadConfig("dataset json: labels must be a nonempty array");
  if (labels.front().is_array()) {
    for (std::size_t q = 0; q < labels.size(); ++q) {
      out.label_columns.push_back(detail::number_vector(
          labels[q], "dataset json labels[" + std::to_string(q) + "]", out.points.size()));
      out.label_names.push_back("c" + std::to_string(q));
    }
  } else {
    out.label_columns.push_back(
        detail::number_vector(labels, "dataset json labels", out.points.size()));
    out.label_names.push_back("y");
  }
  return out;
}

}  // namespace distillkit
