#pragma once

// File formats:
//   operator: {"dim": n, "entries": [[[re, im], ...], ...]}
//   state:    {"dim": n, "amplitudes": [[re, im], ...]}
//   KD tensor CSV: a_index,ap_index,f_index,a_value,ap_value,re_q,im_q
//   sweep CSV:     phi,delta_theta,p_ps,qfi_ps,qfi_ps_numeric,qfi_times_pps,qfi_times_var

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include "psmet/kdq.hpp"
#include "psmet/protocols.hpp"
#include "psmet/qcore.hpp"

namespace psmet::io {

using nlohmann::json;

/// %.17g: round-trip exact for doubles.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline Complex complex_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(ErrorKind::ParseError, where + ": expected [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Index dim_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dim") || !j["dim"].is_number_integer())
    fail(ErrorKind::ParseError, "missing integer field \"dim\"");
  const auto dim = j["dim"].get<long long>();
  if (dim < 1 || dim > kMaxDim) fail(ErrorKind::ParseError, "\"dim\" outside [1, 64]");
  return static_cast<Index>(dim);
}

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

}  // namespace detail

inline Operator operator_from_json(const json& j, OperatorKind kind = OperatorKind::general) {
  const Index dim = detail::dim_from_json(j);
  if (!j.contains("entries") || !j["entries"].is_array() || j["entries"].size() != std::size_t(dim))
    fail(ErrorKind::ParseError, "\"entries\" must be a dim x dim array");
  CMatrix m(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    const json& row = j["entries"][std::size_t(r)];
    if (!row.is_array() || row.size() != std::size_t(dim))
      fail(ErrorKind::ParseError, "row " + std::to_string(r) + " must have dim entries");
    for (Index c = 0; c < dim; ++c)
      m(r, c) = detail::complex_from_json(row[std::size_t(c)],
                                          "entries[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  }
  return Operator(std::move(m), kind);
}

inline StateVector state_from_json(const json& j) {
  const Index dim = detail::dim_from_json(j);
  if (!j.contains("amplitudes") || !j["amplitudes"].is_array() || j["amplitudes"].size() != std::size_t(dim))
    fail(ErrorKind::ParseError, "\"amplitudes\" must have dim entries");
  CVector v(dim);
  for (Index i = 0; i < dim; ++i)
    v[i] = detail::complex_from_json(j["amplitudes"][std::size_t(i)], "amplitudes[" + std::to_string(i) + "]");
  return StateVector(std::move(v));
}

inline json to_json(const Operator& op) {
  json rows = json::array();
  for (Index r = 0; r < op.dim(); ++r) {
    json row = json::array();
    for (Index c = 0; c < op.dim(); ++c) row.push_back(detail::complex_to_json(op(r, c)));
    rows.push_back(std::move(row));
  }
  return json{{"dim", op.dim()}, {"entries", std::move(rows)}};
}

inline json to_json(const StateVector& psi) {
  json amps = json::array();
  for (Index i = 0; i < psi.dim(); ++i) amps.push_back(detail::complex_to_json(psi[i]));
  return json{{"dim", psi.dim()}, {"amplitudes", std::move(amps)}};
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

inline Operator read_operator(const std::filesystem::path& path, OperatorKind kind) {
  return operator_from_json(read_json_file(path), kind);
}

inline StateVector read_state(const std::filesystem::path& path) {
  return state_from_json(read_json_file(path));
}

inline double parse_number(std::string_view text) {
  const std::string s(text);
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::ParseError, "not a number: '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(x)) fail(ErrorKind::ParseError, "not a finite number: '" + s + "'");
  return x;
}

/// "x,y,z"
inline std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    out.push_back(parse_number(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

/// "a:b:n" -> n evenly spaced points from a to b inclusive.
inline std::vector<double> parse_grid(std::string_view text) {
  const std::size_t c1 = text.find(':');
  const std::size_t c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
  if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos)
    fail(ErrorKind::ParseError, "grid must look like a:b:n, got '" + std::string(text) + "'");
  const double a = parse_number(text.substr(0, c1));
  const double b = parse_number(text.substr(c1 + 1, c2 - c1 - 1));
  const double n_real = parse_number(text.substr(c2 + 1));
  if (n_real < 1 || n_real != std::floor(n_real) || n_real > 1e7)
    fail(ErrorKind::ParseError, "grid point count must be a positive integer");
  const auto n = static_cast<std::size_t>(n_real);
  if (n == 1) {
    if (a != b) fail(ErrorKind::ParseError, "a single-point grid needs a == b");
    return {a};
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = b;
  return out;
}

namespace detail {

template <class J>
void dump_json(std::ostream& os, const J& j, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent >= 0) os << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case J::value_t::number_float: {
      const double x = j.template get<double>();
      if (!std::isfinite(x)) {
        os << "null";
        break;
      }
      std::string s = format_double(x);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      os << s;
      break;
    }
    case J::value_t::object: {
      if (j.empty()) {
        os << "{}";
        break;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        newline(depth + 1);
        os << J(it.key()).dump() << (indent >= 0 ? ": " : ":");
        dump_json(os, it.value(), indent, depth + 1);
      }
      newline(depth);
      os << '}';
      break;
    }
    case J::value_t::array: {
      if (j.empty()) {
        os << "[]";
        break;
      }
      os << '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ',';
        newline(depth + 1);
        dump_json(os, j[i], indent, depth + 1);
      }
      newline(depth);
      os << ']';
      break;
    }
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Like json::dump, but floating-point values are printed with %.17g.
template <class J>
std::string dump(const J& j, int indent = 2) {
  std::ostringstream os;
  detail::dump_json(os, j, indent, 0);
  return os.str();
}

inline constexpr std::string_view kSweepHeader =
    "phi,delta_theta,p_ps,qfi_ps,qfi_ps_numeric,qfi_times_pps,qfi_times_var";
inline constexpr std::string_view kKdHeader = "a_index,ap_index,f_index,a_value,ap_value,re_q,im_q";

/// Missing values print as "divergent" (vanishing postselection) or "error".
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    const bool divergent = r.status == "ok" || r.status == "divergent";
    const auto cell = [&](const std::optional<double>& v) {
      return v ? format_double(*v) : std::string(divergent ? "divergent" : "error");
    };
    os << format_double(r.phi) << ',' << format_double(r.delta_theta) << ',' << cell(r.p_ps) << ','
       << cell(r.qfi_ps) << ',' << cell(r.qfi_ps_numeric) << ',' << cell(r.qfi_times_pps) << ','
       << cell(r.qfi_times_var) << '\n';
  }
}

inline void write_kd_csv(std::ostream& os, const KDTensor& kd) {
  os << kKdHeader << '\n';
  for (Index a = 0; a < kd.dim; ++a)
    for (Index ap = 0; ap < kd.dim; ++ap)
      for (Index f = 0; f < kd.dim; ++f) {
        const Complex q = kd.at(a, ap, f);
        os << a << ',' << ap << ',' << f << ',' << format_double(kd.eigs_a[a]) << ','
           << format_double(kd.eigs_a[ap]) << ',' << format_double(q.real()) << ','
           << format_double(q.imag()) << '\n';
      }
}

}  // namespace psmet::io
