#pragma once

// Snapshot datasets as CSV: header `timestep,node_id,pressure,demand`, one row
// per node per timestep, grouped by timestep. Numbers are written in shortest
// round-trip form, so reading back reproduces the stored doubles exactly.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "hydronet/graph.hpp"
#include "hydronet/hydraulics.hpp"

namespace hydronet::csv {

using hydraulics::Snapshot;

inline constexpr const char* kSnapshotHeader = "timestep,node_id,pressure,demand";

struct SnapshotTable {
  std::vector<std::string> node_ids;  // column order of every snapshot
  std::vector<Snapshot> snapshots;    // pressures/demands in node_ids order, flows empty
};

inline std::string to_text(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void write_snapshots(std::ostream& out, const std::vector<std::string>& node_ids,
                            const std::vector<Snapshot>& snaps) {
  out << kSnapshotHeader << '\n';
  for (const auto& s : snaps) {
    if (s.pressures.size() != node_ids.size() || s.demands.size() != node_ids.size())
      throw Error(ErrorCode::SchemaMismatch, "snapshot " + std::to_string(s.timestep) + " has " +
                                                 std::to_string(s.pressures.size()) + " nodes, expected " +
                                                 std::to_string(node_ids.size()));
    for (std::size_t i = 0; i < node_ids.size(); ++i)
      out << s.timestep << ',' << node_ids[i] << ',' << to_text(s.pressures[i]) << ',' << to_text(s.demands[i])
          << '\n';
  }
}

inline void write_snapshots_csv(const std::filesystem::path& path, const std::vector<std::string>& node_ids,
                                const std::vector<Snapshot>& snaps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_snapshots(out, node_ids, snaps);
}

/// Writes snapshots indexed like `net`'s nodes.
inline void write_snapshots_csv(const std::filesystem::path& path, const WaterNetwork& net,
                                const std::vector<Snapshot>& snaps) {
  std::vector<std::string> ids;
  for (const auto& n : net.nodes()) ids.push_back(n.id);
  write_snapshots_csv(path, ids, snaps);
}

inline SnapshotTable read_snapshots(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, "missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSnapshotHeader) throw Error(ErrorCode::SchemaMismatch, "header '" + line + "'", 1);

  SnapshotTable table;
  std::size_t line_no = 1;
  bool first_group_done = false;
  std::size_t col = 0;  // position within the current timestep group
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) throw Error(ErrorCode::SchemaMismatch, "expected 4 fields", line_no);

    auto parse_num = [&](const std::string& tok, auto& value) {
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error(ErrorCode::NonNumericField, "'" + tok + "'", line_no);
    };
    std::size_t t = 0;
    double p = 0.0, d = 0.0;
    parse_num(fields[0], t);
    parse_num(fields[2], p);
    parse_num(fields[3], d);

    if (table.snapshots.empty() || table.snapshots.back().timestep != t) {
      if (!table.snapshots.empty()) {
        if (!first_group_done) first_group_done = true;
        if (col != table.node_ids.size())
          throw Error(ErrorCode::SchemaMismatch, "timestep " + std::to_string(table.snapshots.back().timestep) +
                                                     " lists " + std::to_string(col) + " nodes", line_no);
        if (t < table.snapshots.back().timestep)
          throw Error(ErrorCode::SchemaMismatch, "timesteps out of order", line_no);
      }
      table.snapshots.push_back(Snapshot{t, {}, {}, {}});
      col = 0;
    }
    auto& snap = table.snapshots.back();
    if (!first_group_done) {
      table.node_ids.push_back(fields[1]);
    } else if (col >= table.node_ids.size() || table.node_ids[col] != fields[1]) {
      throw Error(ErrorCode::SchemaMismatch, "node '" + fields[1] + "' out of the first timestep's order", line_no);
    }
    snap.pressures.push_back(p);
    snap.demands.push_back(d);
    ++col;
  }
  if (!table.snapshots.empty() && col != table.node_ids.size())
    throw Error(ErrorCode::SchemaMismatch, "last timestep lists " + std::to_string(col) + " nodes", line_no);
  return table;
}

inline SnapshotTable read_snapshots_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return read_snapshots(in);
}

/// Re-indexes a table to `net`'s node order; every network node must appear.
inline std::vector<Snapshot> align_to_network(const SnapshotTable& table, const WaterNetwork& net) {
  std::vector<std::size_t> column(net.node_count(), table.node_ids.size());
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < table.node_ids.size(); ++c) pos[table.node_ids[c]] = c;
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    auto it = pos.find(net.node(i).id);
    if (it == pos.end()) throw Error(ErrorCode::SchemaMismatch, "snapshot file lacks node '" + net.node(i).id + "'");
    column[i] = it->second;
  }
  if (table.node_ids.size() != net.node_count())
    throw Error(ErrorCode::SchemaMismatch, "snapshot file has " + std::to_string(table.node_ids.size()) +
                                               " nodes, network has " + std::to_string(net.node_count()));
  std::vector<Snapshot> out;
  for (const auto& s : table.snapshots) {
    Snapshot a{s.timestep, std::vector<double>(net.node_count()), {}, std::vector<double>(net.node_count())};
    for (std::size_t i = 0; i < net.node_count(); ++i) {
      a.pressures[i] = s.pressures[column[i]];
      a.demands[i] = s.demands[column[i]];
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace hydronet::csv
