#include "otprop/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace otprop {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = field.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? std::string() : field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw InputError(where + ": cannot parse '" + s + "' as a number");
  return v;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw InputError(where + ": cannot parse '" + s + "' as an integer label");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  Table t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                       " fields, got " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw InputError(path + ": missing header");
  if (t.rows.empty()) throw InputError(path + ": no data rows");
  return t;
}

void check_coordinate_header(const std::vector<std::string>& header, std::size_t d, const std::string& path) {
  for (std::size_t c = 0; c < d; ++c) {
    if (header[c] != "x" + std::to_string(c + 1)) {
      throw InputError(path + ": header column " + std::to_string(c + 1) + " should be x" + std::to_string(c + 1) +
                       ", found '" + header[c] + "'");
    }
  }
}

RowMatrix parse_points(const Table& t, std::size_t d, const std::string& path) {
  RowMatrix pts(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    for (std::size_t c = 0; c < d; ++c) pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(t.rows[r][c], where);
  }
  return pts;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

void write_points_row(std::ostream& out, const RowMatrix& pts, Eigen::Index r) {
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    if (c) out << ',';
    out << format_double(pts(r, c));
  }
}

void write_coordinate_header(std::ostream& out, Eigen::Index d) {
  for (Eigen::Index c = 0; c < d; ++c) out << (c ? ",x" : "x") << c + 1;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

LabeledSample read_source_csv(const std::string& path) {
  const Table t = read_table(path);
  if (t.header.size() < 2 || t.header.back() != "label") {
    throw InputError(path + ": source header must be x1,...,xd,label");
  }
  const std::size_t d = t.header.size() - 1;
  check_coordinate_header(t.header, d, path);
  LabeledSample s;
  s.points = parse_points(t, d, path);
  s.labels.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int label = parse_int(t.rows[r][d], path + ":" + std::to_string(t.line_numbers[r]));
    if (label < 1) throw InputError(path + ":" + std::to_string(t.line_numbers[r]) + ": labels are 1-based");
    s.labels.push_back(label);
  }
  return s;
}

DiscreteMeasure read_target_csv(const std::string& path) {
  const Table t = read_table(path);
  check_coordinate_header(t.header, t.header.size(), path);
  return DiscreteMeasure::uniform(parse_points(t, t.header.size(), path));
}

std::vector<int> read_labels_csv(const std::string& path) {
  const Table t = read_table(path);
  if (t.header.size() != 1 || t.header[0] != "label") throw InputError(path + ": header must be 'label'");
  std::vector<int> labels;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    labels.push_back(parse_int(t.rows[r][0], path + ":" + std::to_string(t.line_numbers[r])));
  }
  return labels;
}

void write_source_csv(const std::string& path, const LabeledSample& sample) {
  auto out = open_out(path);
  write_coordinate_header(out, sample.points.cols());
  out << ",label\n";
  for (Eigen::Index r = 0; r < sample.points.rows(); ++r) {
    write_points_row(out, sample.points, r);
    out << ',' << sample.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

void write_target_csv(const std::string& path, const RowMatrix& points) {
  auto out = open_out(path);
  write_coordinate_header(out, points.cols());
  out << '\n';
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    write_points_row(out, points, r);
    out << '\n';
  }
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  auto out = open_out(path);
  out << "label\n";
  for (int l : labels) out << l << '\n';
}

}  // namespace otprop
