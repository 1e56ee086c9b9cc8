#include "femimpute/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "femimpute/errors.hpp"

namespace femimpute {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_nan_literal(const std::string& s) {
  if (s.size() != 3) return false;
  return std::tolower(static_cast<unsigned char>(s[0])) == 'n' &&
         std::tolower(static_cast<unsigned char>(s[1])) == 'a' &&
         std::tolower(static_cast<unsigned char>(s[2])) == 'n';
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Raw rows plus an optional detected header.  A first row with at least
// one field that is neither numeric nor empty nor NaN is a header.
struct RawCsv {
  std::vector<std::string> names;
  std::vector<std::vector<std::string>> rows;
};

RawCsv read_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  RawCsv raw;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    auto fields = split_fields(line);
    if (first) {
      first = false;
      bool header = false;
      for (const auto& f : fields) {
        double v;
        if (!f.empty() && !is_nan_literal(f) && !parse_double(f, v)) {
          header = true;
          break;
        }
      }
      if (header) {
        raw.names = fields;
        continue;
      }
    }
    raw.rows.push_back(std::move(fields));
  }
  if (raw.rows.empty()) throw IoError(path + " has no data rows");
  const std::size_t m = raw.rows.front().size();
  if (!raw.names.empty() && raw.names.size() != m)
    throw DimensionMismatch(path + ": header has " + std::to_string(raw.names.size()) +
                            " fields, data rows have " + std::to_string(m));
  for (std::size_t i = 0; i < raw.rows.size(); ++i)
    if (raw.rows[i].size() != m)
      throw DimensionMismatch(path + ": row " + std::to_string(i) + " has " +
                              std::to_string(raw.rows[i].size()) + " fields, expected " +
                              std::to_string(m));
  return raw;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

MaskedDataset read_masked_csv(const std::string& path) {
  RawCsv raw = read_raw(path);
  const auto n = static_cast<Eigen::Index>(raw.rows.size());
  const auto m = static_cast<Eigen::Index>(raw.rows.front().size());
  Eigen::MatrixXd values(n, m);
  BoolArray observed(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = raw.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      const std::string& f = row[static_cast<std::size_t>(j)];
      if (f.empty() || is_nan_literal(f)) {
        observed(i, j) = false;
        values(i, j) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double v;
      if (!parse_double(f, v))
        throw IoError(path + ": row " + std::to_string(i) + ", column " +
                      std::to_string(j) + ": cannot parse '" + f + "'");
      observed(i, j) = true;
      values(i, j) = v;
    }
  }
  return MaskedDataset(std::move(values), std::move(observed), std::move(raw.names));
}

Eigen::MatrixXd read_complete_csv(const std::string& path,
                                  std::vector<std::string>* names) {
  MaskedDataset data = read_masked_csv(path);
  if (data.any_missing()) {
    for (Eigen::Index i = 0; i < data.n(); ++i)
      if (!data.row_complete(i))
        throw IoError(path + ": row " + std::to_string(i) +
                      " has missing cells; a complete matrix is required here");
  }
  if (names) *names = data.feature_names();
  return data.values();
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void write_header(std::ofstream& out, const std::vector<std::string>& names) {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out << ',';
    out << names[j];
  }
  out << '\n';
}

}  // namespace

void write_csv(const std::string& path, const Eigen::MatrixXd& values,
               const std::vector<std::string>& names) {
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != values.cols())
    throw DimensionMismatch("header has " + std::to_string(names.size()) +
                            " names, matrix has " + std::to_string(values.cols()) +
                            " columns");
  auto out = open_out(path);
  if (!names.empty()) write_header(out, names);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

void write_masked_csv(const std::string& path, const MaskedDataset& data) {
  auto out = open_out(path);
  if (!data.feature_names().empty()) write_header(out, data.feature_names());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index j = 0; j < data.m(); ++j) {
      if (j) out << ',';
      if (data.observed()(i, j)) out << format_double(data.values()(i, j));
    }
    out << '\n';
  }
}

void write_int_csv(const std::string& path, const std::string& name,
                   const std::vector<int>& values) {
  auto out = open_out(path);
  out << name << '\n';
  for (int v : values) out << v << '\n';
}

void write_mask_csv(const std::string& path, const BoolArray& observed) {
  auto out = open_out(path);
  for (Eigen::Index i = 0; i < observed.rows(); ++i) {
    for (Eigen::Index j = 0; j < observed.cols(); ++j) {
      if (j) out << ',';
      out << (observed(i, j) ? '0' : '1');
    }
    out << '\n';
  }
}

}  // namespace femimpute
