// Command line front end: one subcommand per pipeline stage, a `defaults`
// dump, and --seed/--out overrides on top of an optional config file.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sonarssl/config.hpp"
#include "sonarssl/error.hpp"
#include "sonarssl/pipeline.hpp"
#include "sonarssl/ssl.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

sonarssl::RunConfig resolve_config(const CommonArgs& args) {
  sonarssl::RunConfig config;
  if (!args.config_path.empty()) config = sonarssl::load_run_config(args.config_path);
  if (args.seed) config.seed = *args.seed;
  if (args.out_dir) config.out_dir = *args.out_dir;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-band sonar snippet SSL pipeline: synthesize scenes, chip detections,\n"
               "pretrain MoCo/BYOL encoders, probe and report"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string model_name;
  double fraction = 1.0;

  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "run configuration file (key=value)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "override the run seed");
    sub->add_option("--out", common.out_dir, "override the output directory");
  };
  auto add_model = [&model_name](CLI::App* sub) {
    sub->add_option("--model", model_name, "model kind")
        ->required()
        ->check(CLI::IsMember({"moco", "byol"}));
  };
  auto add_fraction = [&fraction](CLI::App* sub) {
    sub->add_option("--fraction", fraction, "label fraction in (0,1]")->required();
  };

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic scene corpus");
  add_common(synth);
  CLI::App* build = app.add_subcommand("build-data", "detect, chip and split the corpus");
  add_common(build);
  CLI::App* pretrain = app.add_subcommand("pretrain", "self-supervised pretraining");
  add_common(pretrain);
  add_model(pretrain);
  CLI::App* probe = app.add_subcommand("probe", "linear probe on a frozen checkpoint");
  add_common(probe);
  add_model(probe);
  add_fraction(probe);
  CLI::App* supervised =
      app.add_subcommand("supervised", "end-to-end supervised baseline at a label fraction");
  add_common(supervised);
  add_fraction(supervised);
  CLI::App* report =
      app.add_subcommand("report", "aggregate every evaluated cell into charts and a summary");
  add_common(report);
  CLI::App* embed = app.add_subcommand("embed", "2-D feature embeddings of the test split");
  add_common(embed);
  CLI::App* defaults = app.add_subcommand("defaults", "print the default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (defaults->parsed()) {
      std::cout << sonarssl::dump_run_config(sonarssl::RunConfig{});
      return 0;
    }
    const sonarssl::RunConfig config = resolve_config(common);
    std::string message;
    if (synth->parsed())
      message = sonarssl::cmd_synth(config);
    else if (build->parsed())
      message = sonarssl::cmd_build_data(config);
    else if (pretrain->parsed())
      message = sonarssl::cmd_pretrain(config, sonarssl::parse_model_kind(model_name));
    else if (probe->parsed())
      message = sonarssl::cmd_probe(config, sonarssl::parse_model_kind(model_name), fraction);
    else if (supervised->parsed())
      message = sonarssl::cmd_supervised(config, fraction);
    else if (report->parsed())
      message = sonarssl::cmd_report(config);
    else if (embed->parsed())
      message = sonarssl::cmd_embed(config);
    std::cout << message << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
