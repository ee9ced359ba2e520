#pragma once

#include "koopgauss/gaussian_rkhs.hpp"
#include "koopgauss/koopman.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace koopgauss {

// Default nlohmann object keeps keys sorted, which the deterministic
// serializer below relies on.
using Json = nlohmann::json;

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("JSON parse error in " + path + ": " + e.what());
  }
}

inline double number_from_json(const Json& j, const char* who) {
  if (!j.is_number()) throw std::invalid_argument(std::string(who) + ": expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite number");
  return v;
}

inline Vector vector_from_json(const Json& j, const char* who) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(std::string(who) + ": expected a nonempty array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = number_from_json(j[i], who);
  return v;
}

inline Matrix matrix_from_json(const Json& j, const char* who) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(std::string(who) + ": expected a nonempty array of rows");
  if (!j[0].is_array() || j[0].empty())
    throw std::invalid_argument(std::string(who) + ": rows must be nonempty arrays");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw std::invalid_argument(std::string(who) + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = number_from_json(j[r][c], who);
  }
  return m;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json matrix_to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

struct SystemSpec {
  Matrix A;
  Matrix B;
  std::string name;
};

inline SystemSpec parse_system_spec(const Json& j) {
  if (!j.is_object() || !j.contains("A") || !j.contains("B"))
    throw std::invalid_argument("system spec: expected an object with \"A\" and \"B\"");
  SystemSpec spec;
  spec.A = matrix_from_json(j.at("A"), "system spec A");
  spec.B = matrix_from_json(j.at("B"), "system spec B");
  if (j.contains("name")) {
    if (!j.at("name").is_string())
      throw std::invalid_argument("system spec: \"name\" must be a string");
    spec.name = j.at("name").get<std::string>();
  }
  return spec;
}

inline Covariance parse_covariance(const Json& j) {
  if (!j.is_object() || !j.contains("C"))
    throw std::invalid_argument("covariance spec: expected an object with \"C\"");
  return Covariance(matrix_from_json(j.at("C"), "covariance C"));
}

inline std::vector<Vector> centers_from_json(const Json& j, const char* who) {
  if (!j.is_array() || j.empty())
    throw std::invalid_argument(std::string(who) + ": expected a nonempty array of centers");
  std::vector<Vector> centers;
  centers.reserve(j.size());
  for (const Json& row : j) centers.push_back(vector_from_json(row, who));
  return centers;
}

inline SpanElement parse_observable(const Json& j) {
  if (!j.is_object() || !j.contains("covariance") || !j.contains("centers") ||
      !j.contains("coeffs"))
    throw std::invalid_argument(
        "observable: expected an object with \"covariance\", \"centers\", \"coeffs\"");
  Covariance cov(matrix_from_json(j.at("covariance"), "observable covariance"));
  std::vector<Vector> centers = centers_from_json(j.at("centers"), "observable centers");
  Vector coeffs = vector_from_json(j.at("coeffs"), "observable coeffs");
  return SpanElement(std::move(cov), std::move(centers), std::move(coeffs));
}

inline KoopmanImage parse_image(const Json& j) {
  if (!j.is_object() || !j.contains("tau") || !j.contains("covariance_t") ||
      !j.contains("centers") || !j.contains("coeffs") || !j.contains("t"))
    throw std::invalid_argument(
        "image: expected an object with \"tau\", \"covariance_t\", \"centers\", \"coeffs\", "
        "\"t\"");
  return KoopmanImage{number_from_json(j.at("tau"), "image tau"),
                      Covariance(matrix_from_json(j.at("covariance_t"), "image covariance_t")),
                      centers_from_json(j.at("centers"), "image centers"),
                      vector_from_json(j.at("coeffs"), "image coeffs"),
                      number_from_json(j.at("t"), "image t")};
}

inline Json image_to_json(const KoopmanImage& img) {
  Json out;
  out["tau"] = img.tau;
  out["covariance_t"] = matrix_to_json(img.cov_t.matrix());
  Json centers = Json::array();
  for (const Vector& c : img.centers) centers.push_back(vector_to_json(c));
  out["centers"] = centers;
  out["coeffs"] = vector_to_json(img.coeffs);
  out["t"] = img.horizon;
  return out;
}

inline Json observable_to_json(const SpanElement& f) {
  Json out;
  out["covariance"] = matrix_to_json(f.cov.matrix());
  Json centers = Json::array();
  for (const Vector& c : f.centers) centers.push_back(vector_to_json(c));
  out["centers"] = centers;
  out["coeffs"] = vector_to_json(f.coeffs);
  return out;
}

namespace detail {

inline void append_json_string(const std::string& s, std::string& out) {
  out += '"';
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned char>(ch));
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
}

inline void append_json_double(double v, std::string& out) {
  if (!std::isfinite(v))
    throw std::invalid_argument("serialize: non-finite number in report");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
  if (std::strcspn(buf, ".eE") == std::strlen(buf)) out += ".0";
}

inline void append_json(const Json& j, int indent, int depth, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * (depth + 1), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent) * depth, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad;
        append_json_string(it.key(), out);
        out += ": ";
        append_json(it.value(), indent, depth + 1, out);
        if (i + 1 < j.size()) out += ',';
        out += '\n';
      }
      out += close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad;
        append_json(j[i], indent, depth + 1, out);
        if (i + 1 < j.size()) out += ',';
        out += '\n';
      }
      out += close_pad + "]";
      return;
    }
    case Json::value_t::string:
      append_json_string(j.get<std::string>(), out);
      return;
    case Json::value_t::boolean:
      out += j.get<bool>() ? "true" : "false";
      return;
    case Json::value_t::number_integer:
      out += std::to_string(j.get<std::int64_t>());
      return;
    case Json::value_t::number_unsigned:
      out += std::to_string(j.get<std::uint64_t>());
      return;
    case Json::value_t::number_float:
      append_json_double(j.get<double>(), out);
      return;
    case Json::value_t::null:
      out += "null";
      return;
    default:
      throw std::invalid_argument("serialize: unsupported JSON value type");
  }
}

}  // namespace detail

// Sorted keys (map-backed object) plus fixed 17-significant-digit floats give
// byte-identical output for identical inputs.
inline std::string dump_deterministic(const Json& j, int indent = 2) {
  std::string out;
  detail::append_json(j, indent, 0, out);
  out += '\n';
  return out;
}

}  // namespace koopgauss
