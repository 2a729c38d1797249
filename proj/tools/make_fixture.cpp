// Writes a small synthetic dataset (features, masks, manifest) and a matching
// pipeline config, for trying the CLI without a feature extractor.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "reconpatch/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic two-cluster patch-feature dataset"};
  std::string out_dir;
  reconpatch::synthetic::FixtureParams p;
  app.add_option("out", out_dir, "Output directory")->required();
  app.add_option("--seed", p.seed, "Generator seed");
  app.add_option("--train", p.n_train, "Number of train samples");
  app.add_option("--test-normal", p.n_test_normal, "Number of normal test samples");
  app.add_option("--test-abnormal", p.n_test_abnormal, "Number of abnormal test samples");
  app.add_option("--grid", p.grid, "Patch grid side length");
  app.add_option("--dim", p.dim, "Feature dimension of level 2");
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir(out_dir);
  const auto manifest = reconpatch::synthetic::write_fixture(dir, reconpatch::synthetic::make_fixture(p));

  const auto config = reconpatch::synthetic::fixture_config_json();
  std::ofstream(dir / "config.json") << config.dump(2) << "\n";
  std::cout << "wrote " << manifest.string() << " and " << (dir / "config.json").string() << "\n";
  return 0;
}
