#pragma once

// Plain-text checkpoint. Layout:
//
//   hydronet-checkpoint 1
//   config <layers> <hops> <latent_dim> <mlp_layers> <node_in_dim> <edge_in_dim>
//   norm <min> <max>
//   sensors <count> <node id>...
//   param <name> <rows> <cols>
//   <row values>            (one line per row)
//   ...
//   end
//
// Doubles use the shortest round-trip form so save -> load -> save is
// byte-stable.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hydronet/mgcn.hpp"
#include "hydronet/train.hpp"

namespace hydronet::checkpoint {

inline constexpr int kVersion = 1;

struct Checkpoint {
  mgcn::MGCNConfig config;
  train::NormStats norm;
  std::vector<std::string> sensor_ids;
  mgcn::MGCNParams params;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::vector<std::string> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      std::istringstream ss(line);
      std::vector<std::string> tok;
      for (std::string t; ss >> t;) tok.push_back(t);
      if (!tok.empty()) return tok;
    }
    fail("unexpected end of file");
  }

  template <class T>
  T parse(const std::string& tok) {
    T v{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw Error(ErrorCode::NonNumericField, "'" + tok + "'", line_);
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::SchemaMismatch, what, line_); }
  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline void write(std::ostream& out, const Checkpoint& ck) {
  mgcn::check_params(ck.params, ck.config);
  const auto& c = ck.config;
  out << "hydronet-checkpoint " << kVersion << '\n';
  out << "config " << c.layers << ' ' << c.hops << ' ' << c.latent_dim << ' ' << c.mlp_layers << ' ' << c.node_in_dim
      << ' ' << c.edge_in_dim << '\n';
  out << "norm " << detail::num(ck.norm.min) << ' ' << detail::num(ck.norm.max) << '\n';
  out << "sensors " << ck.sensor_ids.size();
  for (const auto& id : ck.sensor_ids) out << ' ' << id;
  out << '\n';
  mgcn::for_each_param(ck.params, [&](const std::string& name, const diff::Tensor& t) {
    out << "param " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t col = 0; col < t.cols(); ++col) out << (col ? " " : "") << detail::num(t(r, col));
      out << '\n';
    }
  });
  out << "end\n";
}

inline Checkpoint read(std::istream& in) {
  detail::Reader rd(in);
  Checkpoint ck;

  auto head = rd.next();
  if (head.size() != 2 || head[0] != "hydronet-checkpoint") rd.fail("not a hydronet checkpoint");
  if (rd.parse<int>(head[1]) != kVersion) rd.fail("unsupported checkpoint version " + head[1]);

  auto cfg = rd.next();
  if (cfg.size() != 7 || cfg[0] != "config") rd.fail("expected 'config' with 6 fields");
  ck.config.layers = rd.parse<std::size_t>(cfg[1]);
  ck.config.hops = rd.parse<std::size_t>(cfg[2]);
  ck.config.latent_dim = rd.parse<std::size_t>(cfg[3]);
  ck.config.mlp_layers = rd.parse<std::size_t>(cfg[4]);
  ck.config.node_in_dim = rd.parse<std::size_t>(cfg[5]);
  ck.config.edge_in_dim = rd.parse<std::size_t>(cfg[6]);
  try {
    ck.config.validate();
  } catch (const Error& e) {
    rd.fail(e.detail());
  }

  auto norm = rd.next();
  if (norm.size() != 3 || norm[0] != "norm") rd.fail("expected 'norm <min> <max>'");
  ck.norm.min = rd.parse<double>(norm[1]);
  ck.norm.max = rd.parse<double>(norm[2]);

  auto sens = rd.next();
  if (sens.size() < 2 || sens[0] != "sensors") rd.fail("expected 'sensors <count> ...'");
  const auto count = rd.parse<std::size_t>(sens[1]);
  if (sens.size() != count + 2) rd.fail("sensor count does not match the listed ids");
  ck.sensor_ids.assign(sens.begin() + 2, sens.end());

  // The expected names and shapes come from the config itself.
  ck.params = mgcn::zero_params(ck.config);
  mgcn::for_each_param(ck.params, [&](const std::string& name, diff::Tensor& t) {
    auto hdr = rd.next();
    if (hdr.size() != 4 || hdr[0] != "param") rd.fail("expected 'param " + name + " <rows> <cols>'");
    if (hdr[1] != name) rd.fail("expected parameter " + name + ", found " + hdr[1]);
    if (rd.parse<std::size_t>(hdr[2]) != t.rows() || rd.parse<std::size_t>(hdr[3]) != t.cols())
      rd.fail(name + " has shape " + hdr[2] + "x" + hdr[3] + ", config implies " + t.shape_string());
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto vals = rd.next();
      if (vals.size() != t.cols()) rd.fail(name + " row " + std::to_string(r) + " has " + std::to_string(vals.size()) + " values");
      for (std::size_t c = 0; c < t.cols(); ++c) {
        t(r, c) = rd.parse<double>(vals[c]);
        if (!std::isfinite(t(r, c))) rd.fail(name + " holds a non-finite value");
      }
    }
  });
  auto tail = rd.next();
  if (tail.size() != 1 || tail[0] != "end") rd.fail("trailing data after the last parameter");
  return ck;
}

inline std::string to_string(const Checkpoint& ck) {
  std::ostringstream out;
  write(out, ck);
  return out.str();
}

inline void save(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write(out, ck);
}

inline Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return read(in);
}

}  // namespace hydronet::checkpoint
