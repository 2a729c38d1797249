// reconpatch: train / build-bank / score / eval / fuse over precomputed patch features.
//
// Every command reads one JSON config (--config). Any config field can be
// overridden from the command line with a dotted flag, e.g. --train.lr 1e-4
// or --similarity.k=8.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "reconpatch/pipeline.hpp"

namespace rp = reconpatch;
namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kInternalError = 4 };

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Turns leftover "--a.b v" / "--a.b=v" tokens into overrides.
Overrides parse_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.find('.') == std::string::npos)
      throw rp::Error(rp::ErrorCode::ConfigError, "unrecognised argument '" + tok + "'");
    const std::string body = tok.substr(2);
    if (auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw rp::Error(rp::ErrorCode::ConfigError, "override '" + tok + "' needs a value");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

struct CommonOptions {
  std::string config;
  int workers = 0;
  long long seed = -1;
};

rp::PipelineConfig resolve_config(const CommonOptions& common, const std::vector<std::string>& extras) {
  auto overrides = parse_overrides(extras);
  if (common.workers > 0) overrides.emplace_back("workers", std::to_string(common.workers));
  if (common.seed >= 0) {
    overrides.emplace_back("train.seed", std::to_string(common.seed));
    overrides.emplace_back("bank.seed", std::to_string(common.seed));
  }
  return rp::load_config(common.config, overrides);
}

void add_common(CLI::App* cmd, CommonOptions& common) {
  cmd->add_option("--config", common.config, "Pipeline config (JSON)")->required();
  cmd->add_option("--workers", common.workers, "Worker threads (1 = deterministic single worker)")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", common.seed, "Seed for training and coreset selection")->check(CLI::NonNegativeNumber);
  cmd->allow_extras();
}

int exit_code_for(rp::ErrorCode code) {
  switch (code) {
    case rp::ErrorCode::ConfigError: return kConfigError;
    default: return kDataError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReConPatch anomaly detection over precomputed patch features"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string checkpoint, bank, out, scores, split = "test";
  std::vector<std::string> fuse_inputs;

  auto* train = app.add_subcommand("train", "Train the representation layers on the train split");
  add_common(train, common);
  train->add_option("--out", out, "Checkpoint path (default: <workdir>/model.rcpm)");

  auto* build = app.add_subcommand("build-bank", "Select the coreset memory bank from the train split");
  add_common(build, common);
  build->add_option("--checkpoint", checkpoint, "Model checkpoint (default: <workdir>/model.rcpm)");
  build->add_option("--out", out, "Bank path (default: <workdir>/bank.rcpb)");

  auto* score = app.add_subcommand("score", "Score a split against the memory bank");
  add_common(score, common);
  score->add_option("--checkpoint", checkpoint, "Model checkpoint (default: <workdir>/model.rcpm)");
  score->add_option("--bank", bank, "Memory bank (default: <workdir>/bank.rcpb)");
  score->add_option("--split", split, "Split to score")->check(CLI::IsMember({"train", "test"}));
  score->add_option("--out", out, "Scores JSONL (default: <workdir>/scores_<split>.jsonl)");

  auto* eval = app.add_subcommand("eval", "Evaluate scores against the manifest labels and masks");
  add_common(eval, common);
  eval->add_option("--scores", scores, "Scores JSONL (default: <workdir>/scores_test.jsonl)");
  eval->add_option("--out", out, "Report path (default: <workdir>/report.json)");

  auto* fuse = app.add_subcommand("fuse", "Fuse normalised scores of several models");
  fuse->add_option("inputs", fuse_inputs, "Score JSONL files")->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", out, "Fused scores JSONL")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (fuse->parsed()) {
      std::vector<fs::path> paths(fuse_inputs.begin(), fuse_inputs.end());
      rp::run_fuse(paths, out, std::cerr);
      return kOk;
    }

    CLI::App* cmd = app.get_subcommands().front();
    const auto cfg = resolve_config(common, cmd->remaining());
    if (train->parsed()) {
      const auto paths = rp::default_paths(cfg);
      rp::run_train(cfg, out.empty() ? paths.checkpoint : fs::path(out), std::cerr);
    } else if (build->parsed()) {
      const auto paths = rp::default_paths(cfg);
      rp::run_build_bank(cfg, checkpoint.empty() ? paths.checkpoint : fs::path(checkpoint),
                         out.empty() ? paths.bank : fs::path(out), std::cerr);
    } else if (score->parsed()) {
      const rp::Split s = split == "train" ? rp::Split::Train : rp::Split::Test;
      const auto paths = rp::default_paths(cfg, s);
      rp::run_score(cfg, checkpoint.empty() ? paths.checkpoint : fs::path(checkpoint),
                    bank.empty() ? paths.bank : fs::path(bank), s, out.empty() ? paths.scores : fs::path(out), std::cerr);
    } else if (eval->parsed()) {
      const auto paths = rp::default_paths(cfg);
      rp::run_eval(cfg, scores.empty() ? paths.scores : fs::path(scores), out.empty() ? paths.report : fs::path(out),
                   std::cerr);
    }
  } catch (const rp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kOk;
}
