#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "l1c/error.hpp"
#include "l1c/lp.hpp"

namespace l1c {
namespace {

constexpr const char* kObjectiveRow = "COST";

std::string row_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "R%07d", i + 1);
  return buf;
}

std::string col_name(int j) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%07d", j + 1);
  return buf;
}

// Fixed MPS gives numbers a 12-character field.
std::string format_number(double v) {
  char buf[32];
  for (int precision = 12; precision >= 1; --precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::string(buf).size() <= 12) break;
  }
  return buf;
}

// Field layout: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61 (1-based columns).
void write_entry(std::ostream& os, const std::string& f2, const std::string& f3, double v3) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "    %-8s  %-8s  %12s", f2.c_str(), f3.c_str(), format_number(v3).c_str());
  os << buf << '\n';
}

}  // namespace

void write_mps(const LPProblem& p, std::ostream& os, const std::string& name) {
  p.validate();
  if (p.rows() > 9'999'999 || p.cols() > 9'999'999) {
    throw Error(ErrorCode::InvalidArgument, "write_mps: problem too large for 8-character names");
  }
  os << "NAME          " << name << '\n';
  os << "ROWS\n";
  os << " N  " << kObjectiveRow << '\n';
  for (int i = 0; i < p.rows(); ++i) os << " E  " << row_name(i) << '\n';

  os << "COLUMNS\n";
  const SparseMatrix at = p.a_eq.transpose();
  for (int j = 0; j < p.cols(); ++j) {
    const std::string cname = col_name(j);
    // Every column is listed at least once so that it is declared.
    if (p.c[j] != 0.0 || at.row_cols(j).empty()) write_entry(os, cname, kObjectiveRow, p.c[j]);
    const auto rows = at.row_cols(j);
    const auto vals = at.row_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) write_entry(os, cname, row_name(rows[k]), vals[k]);
  }

  os << "RHS\n";
  for (int i = 0; i < p.rows(); ++i) {
    if (p.b_eq[i] != 0.0) write_entry(os, "RHS", row_name(i), p.b_eq[i]);
  }
  os << "ENDATA\n";
}

LPProblem read_mps(std::istream& is) {
  enum class Section { none, rows, columns, rhs, bounds, done };
  Section section = Section::none;
  std::string objective;
  std::unordered_map<std::string, int> row_index;
  std::unordered_map<std::string, int> col_index;
  std::vector<Triplet> entries;
  std::map<int, double> cost;
  std::map<int, double> rhs;

  auto parse_value = [](const std::string& tok) {
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::IOFailure, "read_mps: bad number '" + tok + "'");
    }
  };

  std::string line;
  while (section != Section::done && std::getline(is, line)) {
    if (line.empty() || line[0] == '*') continue;
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    if (line[0] != ' ' && line[0] != '\t') {
      const std::string& head = tok[0];
      if (head == "NAME") continue;
      if (head == "ROWS") section = Section::rows;
      else if (head == "COLUMNS") section = Section::columns;
      else if (head == "RHS") section = Section::rhs;
      else if (head == "BOUNDS") section = Section::bounds;
      else if (head == "ENDATA") section = Section::done;
      else throw Error(ErrorCode::UnsupportedFormat, "read_mps: unsupported section " + head);
      continue;
    }

    switch (section) {
      case Section::rows:
        if (tok.size() != 2) throw Error(ErrorCode::IOFailure, "read_mps: bad ROWS line");
        if (tok[0] == "N") {
          if (objective.empty()) objective = tok[1];
        } else if (tok[0] == "E") {
          const int idx = static_cast<int>(row_index.size());
          row_index.emplace(tok[1], idx);
        } else {
          throw Error(ErrorCode::UnsupportedFormat, "read_mps: only equality rows are supported");
        }
        break;
      case Section::columns: {
        if (tok.size() != 3 && tok.size() != 5) throw Error(ErrorCode::IOFailure, "read_mps: bad COLUMNS line");
        if (tok[1] == "'MARKER'") throw Error(ErrorCode::UnsupportedFormat, "read_mps: integer markers");
        auto [cit, inserted] = col_index.emplace(tok[0], static_cast<int>(col_index.size()));
        const int j = cit->second;
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          const double v = parse_value(tok[k + 1]);
          if (tok[k] == objective) {
            cost[j] += v;
          } else if (auto rit = row_index.find(tok[k]); rit != row_index.end()) {
            entries.push_back({rit->second, j, v});
          } else {
            throw Error(ErrorCode::IOFailure, "read_mps: unknown row " + tok[k]);
          }
        }
        break;
      }
      case Section::rhs: {
        if (tok.size() != 3 && tok.size() != 5) throw Error(ErrorCode::IOFailure, "read_mps: bad RHS line");
        for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
          auto rit = row_index.find(tok[k]);
          if (rit == row_index.end()) throw Error(ErrorCode::IOFailure, "read_mps: unknown row " + tok[k]);
          rhs[rit->second] = parse_value(tok[k + 1]);
        }
        break;
      }
      case Section::bounds:
        // Only the default [0, inf) bounds are representable.
        if (!(tok[0] == "PL" || (tok[0] == "LO" && tok.size() == 4 && parse_value(tok[3]) == 0.0))) {
          throw Error(ErrorCode::UnsupportedFormat, "read_mps: only nonnegative variables are supported");
        }
        break;
      default:
        throw Error(ErrorCode::IOFailure, "read_mps: data outside a section");
    }
  }
  if (section != Section::done) throw Error(ErrorCode::IOFailure, "read_mps: missing ENDATA");

  LPProblem p;
  const int m = static_cast<int>(row_index.size());
  const int n = static_cast<int>(col_index.size());
  p.a_eq = SparseMatrix::from_triplets(m, n, std::move(entries));
  p.b_eq.assign(static_cast<std::size_t>(m), 0.0);
  p.c.assign(static_cast<std::size_t>(n), 0.0);
  for (auto [i, v] : rhs) p.b_eq[i] = v;
  for (auto [j, v] : cost) p.c[j] = v;
  return p;
}

}  // namespace l1c
