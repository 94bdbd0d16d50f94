#include <malloc.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hydronet/pipeline.hpp"

namespace {

using hydronet::Error;
using hydronet::ErrorCode;

constexpr int kFailure = 1;
constexpr int kSolverFailure = 2;
constexpr int kNonFiniteLoss = 3;
constexpr int kSchemaMismatch = 4;

int exit_code(const std::string& command, const Error& e) {
  if (command == "generate" && (e.code() == ErrorCode::NoConvergence || e.code() == ErrorCode::SingularSystem))
    return kSolverFailure;
  if (command == "train" && e.code() == ErrorCode::NonFiniteLoss) return kNonFiniteLoss;
  if (command == "evaluate" && e.code() == ErrorCode::SchemaMismatch) return kSchemaMismatch;
  return kFailure;
}

void tune_allocator() {
  // Tape buffers are large and short-lived; keep them on the heap instead of
  // round-tripping through mmap on every op.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pressure estimation in water networks from sparse sensors"};
  app.require_subcommand(1);
  std::string config_path, checkpoint_path, kind = "harmonic";
  bool quiet = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key=value run configuration")->required();
  };
  auto* gen = app.add_subcommand("generate", "simulate snapshot datasets");
  auto* trn = app.add_subcommand("train", "train an m-GCN on the generated data");
  auto* evl = app.add_subcommand("evaluate", "score a checkpoint on the test or eval split");
  auto* bas = app.add_subcommand("baseline", "score a non-learned baseline");
  auto* sts = app.add_subcommand("stats", "print graph statistics as JSON");
  for (auto* s : {gen, trn, evl, bas, sts}) add_common(s);
  for (auto* s : {trn, evl}) s->add_option("--checkpoint", checkpoint_path, "checkpoint file");
  trn->add_flag("--quiet", quiet, "no per-epoch progress on stderr");
  bas->add_option("--kind", kind, "mean or harmonic")->check(CLI::IsMember({"mean", "harmonic"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "UsageError: " << e.what() << '\n';
    return kFailure;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  tune_allocator();
  try {
    auto cfg = hydronet::config::load(config_path);
    const std::filesystem::path ckpt =
        checkpoint_path.empty() ? hydronet::pipeline::default_checkpoint(cfg) : std::filesystem::path(checkpoint_path);

    if (command == "generate") {
      hydronet::pipeline::generate(cfg);
    } else if (command == "train") {
      const auto every = std::max<std::size_t>(1, cfg.train.epochs / 20);
      auto result = hydronet::pipeline::train(cfg, ckpt, [&](const hydronet::train::EpochRecord& r) {
        if (!quiet && (r.epoch % every == 0 || r.epoch == 1))
          std::cerr << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << '\n';
      });
      std::cout << "best epoch " << result.best_epoch << " of " << result.history.size()
                << (result.early_stopped ? " (early stop)" : "") << '\n';
    } else if (command == "evaluate") {
      auto rep = hydronet::pipeline::evaluate(cfg, ckpt);
      std::cout << hydronet::pipeline::metrics_json(rep).dump(2) << '\n';
    } else if (command == "baseline") {
      auto k = kind == "mean" ? hydronet::baselines::BaselineKind::MeanImputation
                              : hydronet::baselines::BaselineKind::HarmonicInterpolation;
      auto rep = hydronet::pipeline::baseline(cfg, k);
      std::cout << hydronet::pipeline::metrics_json(rep).dump(2) << '\n';
    } else {
      std::cout << hydronet::pipeline::stats_json(hydronet::pipeline::stats(cfg)).dump(2) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code(command, e);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "InternalError: " << msg << '\n';
    return kFailure;
  }
  return 0;
}
