#include "latcap/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "latcap/error.hpp"

namespace latcap {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

std::string cell_location(int row, int column) {
  return "row " + std::to_string(row) + ", column " + std::to_string(column);
}

void check_lists(int lists) {
  if (lists < 1 || lists > kMaxLists) {
    throw DomainError("number of lists must be in [1, " +
                      std::to_string(kMaxLists) + "], got " +
                      std::to_string(lists));
  }
}

}  // namespace

Eigen::VectorXd Dataset::counts() const {
  Eigen::VectorXd c(size());
  for (int i = 0; i < size(); ++i) c[i] = strata[i].n;
  return c;
}

int encode_history(std::span<const int> bits, int lists) {
  check_lists(lists);
  if (static_cast<int>(bits.size()) != lists) {
    throw DimensionError("capture history has length " +
                         std::to_string(bits.size()) + ", expected " +
                         std::to_string(lists));
  }
  int index = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw DomainError("capture history entries must be 0 or 1");
    index = (index << 1) | b;
  }
  return index;
}

std::vector<int> decode_history(int index, int lists) {
  check_lists(lists);
  if (index < 0 || index >= (1 << lists)) {
    throw DomainError("history index " + std::to_string(index) + " out of range");
  }
  std::vector<int> bits(lists);
  for (int j = 0; j < lists; ++j) bits[j] = (index >> (lists - 1 - j)) & 1;
  return bits;
}

Dataset stratify(std::span<const CaptureRecord> records, int lists,
                 std::vector<std::string> covariate_names) {
  check_lists(lists);
  if (records.empty()) throw Error("no observable units: empty record list");
  const std::size_t p = records.front().covariates.size();
  if (covariate_names.empty()) {
    for (std::size_t m = 0; m < p; ++m) covariate_names.push_back("x" + std::to_string(m + 1));
  }
  if (covariate_names.size() != p) {
    throw DimensionError("covariate names do not match covariate dimension");
  }

  Dataset data;
  data.lists = lists;
  data.covariate_names = std::move(covariate_names);
  const int k = 1 << lists;
  std::map<std::vector<double>, int> index_of;
  for (std::size_t u = 0; u < records.size(); ++u) {
    const auto& rec = records[u];
    if (rec.covariates.size() != p) {
      throw DimensionError("record " + std::to_string(u + 1) +
                           " has a different covariate dimension");
    }
    const int h = encode_history(rec.history, lists);
    if (h == 0) {
      throw DomainError("record " + std::to_string(u + 1) +
                        " has an all-zero capture history (unobservable unit)");
    }
    auto [it, inserted] = index_of.try_emplace(rec.covariates, data.size());
    if (inserted) {
      data.strata.push_back(Stratum{rec.covariates, 0, std::vector<int>(k - 1, 0)});
    }
    Stratum& st = data.strata[it->second];
    st.n += 1;
    st.y[h - 1] += 1;
    data.total += 1;
  }
  return data;
}

CaptureTable parse_capture_csv(std::istream& in, int lists) {
  check_lists(lists);
  CaptureTable table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty capture file: missing header", 0);
  const auto header = split_csv_line(line);
  if (static_cast<int>(header.size()) < lists) {
    throw ParseError("header has " + std::to_string(header.size()) +
                         " columns, fewer than the " + std::to_string(lists) +
                         " capture columns",
                     0);
  }
  table.covariate_names.assign(header.begin() + lists, header.end());

  int row = 0;
  int line_no = 1;  // file line; the header is line 1
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no);
    }
    CaptureRecord rec;
    rec.history.reserve(lists);
    for (int j = 0; j < lists; ++j) {
      const auto& c = cells[j];
      if (c == "0") {
        rec.history.push_back(0);
      } else if (c == "1") {
        rec.history.push_back(1);
      } else {
        throw ParseError(cell_location(row, j + 1) + ": capture cell '" + c +
                             "' is not 0 or 1",
                         line_no, j + 1);
      }
    }
    for (std::size_t m = lists; m < cells.size(); ++m) {
      const auto& c = cells[m];
      double value = 0.0;
      const auto* end = c.data() + c.size();
      const auto [ptr, ec] = std::from_chars(c.data(), end, value);
      if (c.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError(cell_location(row, static_cast<int>(m) + 1) +
                             ": covariate '" + c + "' is missing or not numeric",
                         line_no, static_cast<int>(m) + 1);
      }
      rec.covariates.push_back(value);
    }
    table.records.push_back(std::move(rec));
  }
  return table;
}

CaptureTable parse_capture_csv(const std::string& path, int lists) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open capture file '" + path + "'");
  try {
    return parse_capture_csv(in, lists);
  } catch (const ParseError& err) {
    throw ParseError(path + ": " + err.what(), err.line(), err.column());
  }
}

void write_capture_csv(std::ostream& out, const Dataset& data) {
  for (int j = 0; j < data.lists; ++j) out << (j ? "," : "") << "h" << (j + 1);
  for (const auto& name : data.covariate_names) out << "," << name;
  out << "\n";
  std::ostringstream cov;
  cov.precision(17);
  for (const auto& st : data.strata) {
    cov.str({});
    for (double v : st.x) cov << "," << v;
    for (int r = 1; r < data.configs(); ++r) {
      const auto bits = decode_history(r, data.lists);
      for (int c = 0; c < st.y[r - 1]; ++c) {
        for (int j = 0; j < data.lists; ++j) out << (j ? "," : "") << bits[j];
        out << cov.str() << "\n";
      }
    }
  }
}

}  // namespace latcap
