#pragma once

// Reader and writer for the subset of the EPANET INP format this project
// models: JUNCTIONS, RESERVOIRS, TANKS, PIPES, VALVES (PRV only), DEMANDS,
// PATTERNS and OPTIONS (Units). Other sections are kept in the document but
// not interpreted, except PUMPS which is refused.
//
// Internal units are SI: metres, L/s. Diameters in the file are millimetres.

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hydronet/graph.hpp"

namespace hydronet::inp {

// Nominal geometry given to PRVs, which the INP format describes without length or roughness.
inline constexpr double kPrvLength = 1.0;
inline constexpr double kPrvRoughness = 140.0;

struct Row {
  std::size_t line = 0;
  std::vector<std::string> tokens;
};

struct InpDocument {
  // Section names in file order, upper-cased without brackets.
  std::vector<std::pair<std::string, std::vector<Row>>> sections;

  const std::vector<Row>* find(std::string_view name) const {
    for (const auto& [n, rows] : sections)
      if (n == name) return &rows;
    return nullptr;
  }
};

struct DemandModel {
  std::vector<double> base_demand;                // per node, L/s; zero for fixed-head nodes
  std::vector<std::optional<std::string>> pattern;  // per node
  std::map<std::string, std::vector<double>> patterns;

  friend bool operator==(const DemandModel&, const DemandModel&) = default;
};

namespace detail {

inline std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

inline double number(const Row& row, std::size_t col, const char* what) {
  if (col >= row.tokens.size())
    throw Error(ErrorCode::SyntaxError, std::string("missing ") + what, row.line);
  const auto& tok = row.tokens[col];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw Error(ErrorCode::NonNumericField, std::string(what) + " '" + tok + "'", row.line);
  return v;
}

inline const std::string& token(const Row& row, std::size_t col, const char* what) {
  if (col >= row.tokens.size())
    throw Error(ErrorCode::SyntaxError, std::string("missing ") + what, row.line);
  return row.tokens[col];
}

inline std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Rewrites a decimal token as the same digits times 10^shift, so unit
// conversions by powers of ten happen in decimal and round exactly once.
inline std::string shift_decimal(const std::string& tok, int shift) {
  auto e = tok.find_first_of("eE");
  if (e == std::string::npos) return tok + "e" + std::to_string(shift);
  int exponent = 0;
  auto rest = std::string_view(tok).substr(e + 1);
  if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), exponent);
  if (ec != std::errc() || ptr != rest.data() + rest.size()) return tok;  // let number() report it
  return tok.substr(0, e) + "e" + std::to_string(exponent + shift);
}

// Diameter column: millimetres in the file, metres in memory.
inline double millimetres(const Row& row, std::size_t col, const char* what) {
  Row shifted{row.line, {}};
  shifted.tokens.push_back(shift_decimal(token(row, col, what), -3));
  try {
    return number(shifted, 0, what);
  } catch (const Error&) {
    return number(row, col, what);  // reports the original token
  }
}

inline std::string format_millimetres(double metres) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), metres, std::chars_format::scientific);
  return shift_decimal(std::string(buf, ptr), 3);
}

}  // namespace detail

/// Splits the text into sections of whitespace-separated rows. `;` starts a
/// comment; blank lines are dropped.
inline InpDocument tokenize(std::string_view text) {
  InpDocument doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto semi = line.find(';'); semi != std::string_view::npos) line = line.substr(0, semi);

    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      if (j > i) tokens.emplace_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (tokens[0].front() == '[') {
      if (tokens.size() != 1 || tokens[0].back() != ']' || tokens[0].size() < 3)
        throw Error(ErrorCode::SyntaxError, "malformed section header", line_no);
      doc.sections.emplace_back(detail::upper(tokens[0].substr(1, tokens[0].size() - 2)), std::vector<Row>{});
      continue;
    }
    if (doc.sections.empty()) throw Error(ErrorCode::SyntaxError, "data before the first section header", line_no);
    doc.sections.back().second.push_back(Row{line_no, std::move(tokens)});
    if (end == text.size()) break;
  }
  return doc;
}

struct ParsedInp {
  WaterNetwork network;
  DemandModel demands;
};

inline ParsedInp parse_inp(std::string_view text) {
  const auto doc = tokenize(text);
  const auto* junctions = doc.find("JUNCTIONS");
  if (!junctions) throw Error(ErrorCode::MissingSection, "JUNCTIONS");
  const auto* pipes = doc.find("PIPES");
  if (!pipes) throw Error(ErrorCode::MissingSection, "PIPES");
  if (const auto* pumps = doc.find("PUMPS"); pumps && !pumps->empty())
    throw Error(ErrorCode::UnsupportedElement, "pump '" + pumps->front().tokens[0] + "'", pumps->front().line);
  if (const auto* options = doc.find("OPTIONS")) {
    for (const auto& row : *options) {
      if (detail::upper(row.tokens[0]) == "UNITS" && row.tokens.size() >= 2 && detail::upper(row.tokens[1]) != "LPS")
        throw Error(ErrorCode::UnsupportedElement, "flow units '" + row.tokens[1] + "' (only LPS)", row.line);
    }
  }

  std::vector<NodeRecord> nodes;
  std::vector<double> base;
  std::vector<std::optional<std::string>> pattern;
  std::map<std::string, std::size_t> node_line;
  auto add_node = [&](NodeRecord rec, std::size_t line, double demand, std::optional<std::string> pat) {
    if (node_line.count(rec.id)) throw Error(ErrorCode::DuplicateId, "node '" + rec.id + "'", line);
    node_line[rec.id] = line;
    nodes.push_back(std::move(rec));
    base.push_back(demand);
    pattern.push_back(std::move(pat));
  };

  for (const auto& row : *junctions) {
    NodeRecord rec{detail::token(row, 0, "junction id"), detail::number(row, 1, "elevation"), NodeKind::Junction, 0.0};
    double demand = row.tokens.size() > 2 ? detail::number(row, 2, "demand") : 0.0;
    std::optional<std::string> pat;
    if (row.tokens.size() > 3) pat = row.tokens[3];
    add_node(std::move(rec), row.line, demand, std::move(pat));
  }
  if (const auto* reservoirs = doc.find("RESERVOIRS")) {
    for (const auto& row : *reservoirs) {
      const double head = detail::number(row, 1, "head");
      add_node({detail::token(row, 0, "reservoir id"), head, NodeKind::FixedHead, 0.0}, row.line, 0.0, std::nullopt);
    }
  }
  if (const auto* tanks = doc.find("TANKS")) {
    for (const auto& row : *tanks) {
      add_node({detail::token(row, 0, "tank id"), detail::number(row, 1, "elevation"), NodeKind::FixedHead,
                detail::number(row, 2, "initial level")},
               row.line, 0.0, std::nullopt);
    }
  }

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  auto require_node = [&](const Row& row, std::size_t col) -> const std::string& {
    const auto& id = detail::token(row, col, "node id");
    if (!index.count(id)) throw Error(ErrorCode::UnknownNodeRef, "node '" + id + "'", row.line);
    return id;
  };

  std::vector<EdgeRecord> edges;
  for (const auto& row : *pipes) {
    EdgeRecord e;
    e.id = detail::token(row, 0, "pipe id");
    e.from = require_node(row, 1);
    e.to = require_node(row, 2);
    e.length = detail::number(row, 3, "length");
    e.diameter = detail::millimetres(row, 4, "diameter");
    e.roughness = detail::number(row, 5, "roughness");
    if (row.tokens.size() > 7 && detail::upper(row.tokens[7]) == "CV")
      throw Error(ErrorCode::UnsupportedElement, "check valve on pipe '" + e.id + "'", row.line);
    if (e.from == e.to) throw Error(ErrorCode::SelfLoop, "pipe '" + e.id + "'", row.line);
    edges.push_back(std::move(e));
  }
  if (const auto* valves = doc.find("VALVES")) {
    for (const auto& row : *valves) {
      const auto& id = detail::token(row, 0, "valve id");
      const auto type = detail::upper(detail::token(row, 4, "valve type"));
      if (type != "PRV") throw Error(ErrorCode::UnsupportedElement, type + " valve '" + id + "'", row.line);
      EdgeRecord e;
      e.id = id;
      e.from = require_node(row, 1);
      e.to = require_node(row, 2);
      e.diameter = detail::millimetres(row, 3, "diameter");
      e.length = kPrvLength;
      e.roughness = kPrvRoughness;
      e.is_prv = true;
      e.prv_setting = detail::number(row, 5, "setting");
      if (e.from == e.to) throw Error(ErrorCode::SelfLoop, "valve '" + e.id + "'", row.line);
      edges.push_back(std::move(e));
    }
  }

  DemandModel demands;
  if (const auto* pats = doc.find("PATTERNS")) {
    for (const auto& row : *pats) {
      auto& mult = demands.patterns[detail::token(row, 0, "pattern id")];
      for (std::size_t c = 1; c < row.tokens.size(); ++c) {
        const double v = detail::number(row, c, "multiplier");
        if (v < 0.0) throw Error(ErrorCode::NonNumericField, "negative multiplier", row.line);
        mult.push_back(v);
      }
    }
  }
  if (const auto* dem = doc.find("DEMANDS")) {
    std::vector<bool> replaced(nodes.size(), false);
    for (const auto& row : *dem) {
      const auto i = index.at(require_node(row, 0));
      if (nodes[i].is_fixed_head())
        throw Error(ErrorCode::UnsupportedElement, "demand on fixed-head node '" + nodes[i].id + "'", row.line);
      const double d = detail::number(row, 1, "demand");
      std::optional<std::string> pat;
      if (row.tokens.size() > 2) pat = row.tokens[2];
      if (!replaced[i]) {
        base[i] = d;
        pattern[i] = pat;
        replaced[i] = true;
      } else if (pattern[i] == pat) {
        base[i] += d;
      } else {
        throw Error(ErrorCode::UnsupportedElement, "multiple demand categories on '" + nodes[i].id + "'", row.line);
      }
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (pattern[i] && !demands.patterns.count(*pattern[i]))
      throw Error(ErrorCode::UnknownNodeRef, "pattern '" + *pattern[i] + "' of node '" + nodes[i].id + "'",
                  node_line[nodes[i].id]);
  }
  demands.base_demand = std::move(base);
  demands.pattern = std::move(pattern);

  return {WaterNetwork::build(std::move(nodes), std::move(edges)), std::move(demands)};
}

inline std::string write_inp(const WaterNetwork& net, const DemandModel& demands) {
  using detail::format_number;
  std::ostringstream out;
  out << "[TITLE]\nhydronet network\n\n[OPTIONS]\nUnits LPS\nHeadloss H-W\n\n";

  out << "[JUNCTIONS]\n;ID Elev Demand Pattern\n";
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    const auto& n = net.node(i);
    if (n.is_fixed_head()) continue;
    out << n.id << ' ' << format_number(n.elevation) << ' '
        << format_number(i < demands.base_demand.size() ? demands.base_demand[i] : 0.0);
    if (i < demands.pattern.size() && demands.pattern[i]) out << ' ' << *demands.pattern[i];
    out << '\n';
  }
  out << "\n[RESERVOIRS]\n;ID Head\n";
  for (const auto& n : net.nodes())
    if (n.is_fixed_head() && n.level == 0.0) out << n.id << ' ' << format_number(n.elevation) << '\n';
  out << "\n[TANKS]\n;ID Elevation InitLevel MinLevel MaxLevel Diameter MinVol\n";
  for (const auto& n : net.nodes())
    if (n.is_fixed_head() && n.level != 0.0)
      out << n.id << ' ' << format_number(n.elevation) << ' ' << format_number(n.level) << " 0 "
          << format_number(n.level) << " 1 0\n";

  out << "\n[PIPES]\n;ID Node1 Node2 Length Diameter Roughness MinorLoss Status\n";
  for (const auto& e : net.edges())
    if (!e.is_prv)
      out << e.id << ' ' << e.from << ' ' << e.to << ' ' << format_number(e.length) << ' '
          << detail::format_millimetres(e.diameter) << ' ' << format_number(e.roughness) << " 0 Open\n";
  out << "\n[VALVES]\n;ID Node1 Node2 Diameter Type Setting MinorLoss\n";
  for (const auto& e : net.edges())
    if (e.is_prv)
      out << e.id << ' ' << e.from << ' ' << e.to << ' ' << detail::format_millimetres(e.diameter) << " PRV "
          << format_number(e.prv_setting) << " 0\n";

  out << "\n[PATTERNS]\n";
  for (const auto& [id, mult] : demands.patterns) {
    // EPANET convention: at most six multipliers per line.
    for (std::size_t k = 0; k < mult.size(); k += 6) {
      out << id;
      for (std::size_t c = k; c < std::min(mult.size(), k + 6); ++c) out << ' ' << format_number(mult[c]);
      out << '\n';
    }
  }
  out << "\n[END]\n";
  return out.str();
}

}  // namespace hydronet::inp
