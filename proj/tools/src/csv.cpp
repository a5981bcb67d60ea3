#include "tiltwise/cli.hpp"

#include "tiltwise/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace tiltwise::cli {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// RFC 4180-ish split: double quotes group, "" escapes a quote.
std::vector<std::string> split_record(const std::string& line)
{
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing(const std::string& cell)
{
  static const std::set<std::string> tokens{"", "NA", "na", "N/A", "NaN", "nan", "null", "NULL"};
  return tokens.count(cell) > 0;
}

bool parse_number(const std::string& cell, double& value)
{
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

std::string format_number(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

Ingested ingest_csv(const std::string& path, const RunConfig& config)
{
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::EmptyAfterFiltering, "'" + path + "' has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  const auto header = split_record(line);

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column(config.outcome);
  const std::size_t a_col = column(config.treatment);
  std::vector<std::string> names = config.covariates;
  if (names.empty())
    for (const auto& h : header)
      if (h != config.outcome && h != config.treatment)
        names.push_back(h);
  std::vector<std::size_t> x_cols;
  for (const auto& name : names)
    x_cols.push_back(column(name));

  std::vector<double> ys, as, xs;
  std::vector<std::size_t> dropped;
  std::size_t line_no = 1;
  std::vector<double> row_x(x_cols.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto cells = split_record(line);
    bool missing = false;
    auto read = [&](std::size_t col, double& v) {
      const std::string cell = col < cells.size() ? cells[col] : std::string{};
      if (is_missing(cell)) {
        missing = true;
        return;
      }
      if (!parse_number(cell, v))
        throw Error(ErrorCode::NonNumericCell, "non-numeric value '" + cell + "' at line " +
                                                 std::to_string(line_no) + ", column '" +
                                                 header[col] + "'");
    };
    double y = 0.0, a = 0.0;
    read(y_col, y);
    read(a_col, a);
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      read(x_cols[j], row_x[j]);
    if (missing) {
      dropped.push_back(line_no);
      continue;
    }
    ys.push_back(y);
    as.push_back(a);
    xs.insert(xs.end(), row_x.begin(), row_x.end());
  }
  if (ys.empty())
    throw Error(ErrorCode::EmptyAfterFiltering, "no complete rows in '" + path + "'");

  const auto n = static_cast<Eigen::Index>(ys.size());
  const auto d = static_cast<Eigen::Index>(x_cols.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = xs[static_cast<std::size_t>(i * d + j)];
  return {Dataset::create(std::move(x), Eigen::Map<Eigen::VectorXd>(as.data(), n),
                          Eigen::Map<Eigen::VectorXd>(ys.data(), n), config.rescale, names),
          names, std::move(dropped)};
}

void write_dataset_csv(const std::string& path, const Dataset& data)
{
  std::ostringstream os;
  os << "y,a";
  const auto& names = data.covariate_names();
  for (std::size_t j = 0; j < data.dim(); ++j)
    os << ',' << (j < names.size() ? names[j] : "x" + std::to_string(j + 1));
  os << '\n';
  const auto& rec = data.rescale_record();
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.size()); ++i) {
    os << format_number(data.outcome()(i)) << ','
       << format_number(rec.to_source(data.treatment()(i)));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(data.dim()); ++j)
      os << ',' << format_number(data.covariates()(i, j));
    os << '\n';
  }
  write_atomic(path, os.str());
}

void write_atomic(const std::string& path, const std::string& content)
{
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path())
    fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f)
      throw Error(ErrorCode::IoFailure, "cannot write '" + tmp.string() + "'");
    f << content;
    f.flush();
    if (!f)
      throw Error(ErrorCode::IoFailure, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec)
    throw Error(ErrorCode::IoFailure, "cannot move '" + tmp.string() + "' into place: " +
                                        ec.message());
}

} // namespace tiltwise::cli
