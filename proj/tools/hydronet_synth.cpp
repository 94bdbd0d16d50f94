// Writes a synthetic grid network as an INP file.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "hydronet/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a desk-scale grid network"};
  hydronet::synthetic::GridOptions opt;
  std::string out_path;
  app.add_option("--rows", opt.rows)->check(CLI::Range(1, 100));
  app.add_option("--cols", opt.cols)->check(CLI::Range(2, 100));
  app.add_option("--keep", opt.keep_fraction, "fraction of loop-closing grid edges kept")->check(CLI::Range(0.0, 1.0));
  app.add_option("--min-pressure", opt.min_pressure);
  app.add_option("--seed", opt.seed);
  app.add_option("--out", out_path)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    auto net = hydronet::synthetic::grid_network(opt);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw hydronet::Error(hydronet::ErrorCode::IoError, "cannot write " + out_path);
    out << hydronet::inp::write_inp(net.network, net.demands);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
