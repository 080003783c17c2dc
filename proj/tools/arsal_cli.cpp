// Command-line front end. Parses flags with CLI11 and forwards them to the
// C interface; exit codes: 0 success, 1 invalid input, 2 I/O failure.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arsal/arsal.h"

namespace {

struct FlagSpec {
  const char* name;
  const char* help;
  bool required = false;
};

struct CommandSpec {
  const char* name;     // CLI name (possibly nested under "analyze")
  const char* command;  // pipeline command it runs
  const char* help;
  std::vector<FlagSpec> flags;
};

const std::vector<FlagSpec> kCommon = {
    {"config", "JSON config (viewport, fixation, loss, regressor, models, vq, schedule, seed)"},
    {"seed", "root random seed"},
    {"jobs", "worker threads (default: logical cores)"},
};

const std::vector<CommandSpec> kCommands = {
    {"composite", "composite", "Blend AR content onto a background viewport",
     {{"ar", "AR content image"},
      {"bg", "equirectangular background"},
      {"alpha", "mixing value in (0,1]"},
      {"out", "output image"},
      {"spec", "viewport spec JSON"},
      {"offset-x", "horizontal AR offset in pixels"},
      {"offset-y", "vertical AR offset in pixels"},
      {"manifest", "scenario manifest CSV (batch mode)"},
      {"out-dir", "output directory (batch mode)"}}},
    {"gaze-process", "gaze-process", "Detect fixations in head-gaze logs",
     {{"in", "gaze log CSV", true},
      {"out-fixations", "fixation CSV to write", true},
      {"params", "fixation parameter JSON"},
      {"out-density", "directory for ground-truth maps"},
      {"spec", "viewport spec JSON"},
      {"sigma-deg", "Gaussian sigma in degrees"}}},
    {"gt-maps", "gt-maps", "Build ground-truth saliency maps from fixations",
     {{"fixations", "fixation CSV", true},
      {"out", "output directory", true},
      {"spec", "viewport spec JSON"},
      {"sigma-deg", "Gaussian sigma in degrees"}}},
    {"predict", "predict", "Run a classical saliency model",
     {{"model", "IT, SR or PFT", true},
      {"in", "image or directory of images", true},
      {"out", "output directory", true},
      {"png", "also write PNG previews (true/false)"}}},
    {"fuse", "fuse", "Build Type I/II/III AR saliency predictions",
     {{"type", "1, 2 or 3", true},
      {"model", "base model id", true},
      {"scenario-manifest", "scenario manifest CSV", true},
      {"out", "output directory", true},
      {"regressor", "Type III regressor JSON"},
      {"gt-dir", "ground truth for training a Type III regressor"},
      {"save-regressor", "where to write the trained regressor"},
      {"ridge", "use the ridge solver (true/false)"},
      {"spec", "viewport spec JSON"}}},
    {"evaluate", "evaluate", "Score predictions with the seven metrics",
     {{"manifest", "scenario manifest CSV", true},
      {"pred-dir", "prediction directory", true},
      {"gt-dir", "ground-truth directory", true},
      {"out", "result CSV", true},
      {"model", "model label"},
      {"type", "fusion type label"},
      {"spec", "viewport spec JSON"}}},
    {"train-vq", "train-vq", "Train the VQ backbone on image reconstruction",
     {{"out", "checkpoint to write", true},
      {"manifest", "scenario manifest CSV"},
      {"images", "directory of training images"},
      {"spec", "viewport spec JSON"},
      {"steps", "optimisation steps"},
      {"lr", "learning rate"},
      {"batch", "batch size"},
      {"size", "working resolution (multiple of 4)"},
      {"beta", "commitment weight"},
      {"adversarial", "add the patch-discriminator term (true/false)"}}},
    {"train-sal", "train-sal", "Train the saliency decoder",
     {{"vq", "reconstruction checkpoint", true},
      {"manifest", "scenario manifest CSV", true},
      {"gt-dir", "ground-truth directory", true},
      {"out", "checkpoint to write", true},
      {"freeze", "freeze encoder and codebook (default true)"},
      {"rec-target", "saliency-map or image"},
      {"lambda", "weight of the CC and KL terms"},
      {"spec", "viewport spec JSON"},
      {"steps", "optimisation steps"},
      {"lr", "learning rate"},
      {"batch", "batch size"},
      {"size", "working resolution (multiple of 4)"}}},
    {"train-ar", "train-ar", "Train the three-branch AR fusion network",
     {{"sal", "saliency checkpoint", true},
      {"manifest", "scenario manifest CSV", true},
      {"gt-dir", "ground-truth directory", true},
      {"out", "checkpoint to write", true},
      {"spec", "viewport spec JSON"},
      {"steps", "optimisation steps"},
      {"lr", "learning rate"},
      {"batch", "batch size"},
      {"size", "working resolution (multiple of 4)"}}},
    {"infer-ar", "infer-ar", "Predict AR saliency with a trained fusion network",
     {{"model", "AR fusion checkpoint", true},
      {"manifest", "scenario manifest CSV", true},
      {"out", "output directory", true},
      {"spec", "viewport spec JSON"},
      {"size", "working resolution (multiple of 4)"}}},
    {"cv-split", "cv-split", "Pair-preserving k-fold split with leakage audit",
     {{"manifest", "scenario manifest CSV", true}, {"out", "fold CSV", true}, {"k", "number of folds (default 5)"}}},
};

const std::vector<CommandSpec> kAnalyze = {
    {"consistency", "analyze-consistency", "Subject-count consistency curve",
     {{"fixations", "fixation CSV", true},
      {"out", "result JSON", true},
      {"spec", "viewport spec JSON"},
      {"groups", "comma-separated group sizes"},
      {"trials", "draws per group size (default 100)"},
      {"sigma-deg", "Gaussian sigma in degrees"}}},
    {"cross-mixing", "analyze-cross-mixing", "Agreement between mixing levels of each pair",
     {{"manifest", "scenario manifest CSV", true},
      {"gt-dir", "ground-truth directory", true},
      {"out", "result JSON", true}}},
    {"cv-split", "analyze-cv-split", "Pair-preserving k-fold split with leakage audit",
     {{"manifest", "scenario manifest CSV", true}, {"out", "fold CSV", true}, {"k", "number of folds (default 5)"}}},
    {"benchmark", "analyze-benchmark", "k-fold benchmark of models and fusion types",
     {{"manifest", "scenario manifest CSV", true},
      {"gt-dir", "ground-truth directory", true},
      {"out-dir", "output directory", true},
      {"models", "comma-separated model ids (default IT,SR,PFT)"},
      {"types", "comma-separated fusion types (default 1,2,3)"},
      {"folds", "number of folds (default 5)"},
      {"vq", "include the VQ networks (true/false)"},
      {"spec", "viewport spec JSON"},
      {"steps", "VQ optimisation steps"},
      {"size", "VQ working resolution"}}},
};

struct Bound {
  CLI::App* app;
  const CommandSpec* spec;
  std::map<std::string, std::string> values;
};

void bind(CLI::App* sub, const CommandSpec& spec, Bound& b) {
  b.app = sub;
  b.spec = &spec;
  auto add = [&](const FlagSpec& f) {
    auto* opt = sub->add_option("--" + std::string(f.name), b.values[f.name], f.help);
    if (f.required) opt->required();
  };
  for (const auto& f : spec.flags) add(f);
  for (const auto& f : kCommon) add(f);
}

int run(const Bound& b) {
  arsal_args* args = nullptr;
  if (arsal_args_create(&args) != ARSAL_OK) {
    std::fprintf(stderr, "error: %s\n", arsal_last_error());
    return 1;
  }
  for (const auto& [name, value] : b.values) {
    if (!value.empty()) arsal_args_set(args, name.c_str(), value.c_str());
  }
  const arsal_status st = arsal_command_run(b.spec->command, args);
  int code = 0;
  if (st == ARSAL_OK) {
    std::printf("%s\n", arsal_args_output(args));
  } else {
    std::fprintf(stderr, "error: %s\n", arsal_last_error());
    code = st == ARSAL_ERR_IO ? 2 : 1;
  }
  arsal_args_free(args);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AR saliency toolkit"};
  app.set_version_flag("--version", std::string(arsal_version()));
  app.require_subcommand(1);

  std::vector<Bound> bound(kCommands.size() + kAnalyze.size());
  std::size_t n = 0;
  for (const auto& c : kCommands) bind(app.add_subcommand(c.name, c.help), c, bound[n++]);
  CLI::App* analyze = app.add_subcommand("analyze", "Dataset analyses");
  analyze->require_subcommand(1);
  for (const auto& c : kAnalyze) bind(analyze->add_subcommand(c.name, c.help), c, bound[n++]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  for (const auto& b : bound) {
    if (b.app->parsed()) return run(b);
  }
  return 1;
}
