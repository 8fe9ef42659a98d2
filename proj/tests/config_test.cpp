#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "sonarssl/config.hpp"

using namespace sonarssl;
namespace fs = std::filesystem;

TEST_CASE("defaults dump carries the reference hyperparameters") {
  const std::string text = dump_run_config(RunConfig{});
  CHECK(text.find("ssl.moco.lr=0.003\n") != std::string::npos);
  CHECK(text.find("ssl.moco.weight_decay=0.001\n") != std::string::npos);
  CHECK(text.find("ssl.moco.epochs=100\n") != std::string::npos);
  CHECK(text.find("ssl.moco.batch_size=768\n") != std::string::npos);
  CHECK(text.find("ssl.moco.queue_size=1024\n") != std::string::npos);
  CHECK(text.find("ssl.moco.temperature=0.2\n") != std::string::npos);
  CHECK(text.find("ssl.moco.momentum=0.999\n") != std::string::npos);
  CHECK(text.find("ssl.byol.batch_size=512\n") != std::string::npos);
  CHECK(text.find("ssl.byol.ema_rate=0.99\n") != std::string::npos);
  CHECK(text.find("probe.fractions=0.01,0.05,1\n") != std::string::npos);
  CHECK(text.find("matrix.models=moco,byol\n") != std::string::npos);
  CHECK(text.find("data.snippet_size=64\n") != std::string::npos);
  CHECK(text.find("tsne.perplexity=30\n") != std::string::npos);
}

TEST_CASE("dump/parse round trip reproduces every field") {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.out_dir = "runs/exp7";
  cfg.n_scenes = 12;
  cfg.scene.width = 256;
  cfg.scene.band_decorrelation = 0.25;
  cfg.rx.score_threshold = 11.5;
  cfg.snippet_size = 32;
  cfg.encoder.input_size = 32;
  cfg.encoder.stage_widths = {4, 8};
  cfg.encoder.blocks_per_stage = {1, 2};
  cfg.encoder.feature_dim = 8;
  cfg.moco.queue_size = 64;
  cfg.byol.ema_rate = 0.97;
  cfg.fractions = {0.05, 1.0};
  cfg.models = {ModelKind::byol};
  cfg.tsne.perplexity = 12.5;
  cfg.augment.speckle_lo = 0.8;

  const RunConfig back = parse_run_config(dump_run_config(cfg));
  CHECK(back.seed == 99);
  CHECK(back.out_dir == "runs/exp7");
  CHECK(back.n_scenes == 12);
  CHECK(back.scene.width == 256);
  CHECK(back.scene.band_decorrelation == 0.25);
  CHECK(back.rx.score_threshold == 11.5);
  CHECK(back.snippet_size == 32);
  CHECK(back.encoder.stage_widths == cfg.encoder.stage_widths);
  CHECK(back.encoder.blocks_per_stage == cfg.encoder.blocks_per_stage);
  CHECK(back.moco.queue_size == 64);
  CHECK(back.byol.ema_rate == 0.97);
  CHECK(back.fractions == cfg.fractions);
  CHECK(back.models == cfg.models);
  CHECK(back.tsne.perplexity == 12.5);
  // The shared augmentation block is mirrored into both hyper structs.
  CHECK(back.augment.speckle_lo == 0.8);
  CHECK(back.moco.augment.speckle_lo == 0.8);
  CHECK(back.byol.augment.speckle_lo == 0.8);

  // Round trip is a fixed point of dump.
  CHECK(dump_run_config(back) == dump_run_config(cfg));
}

TEST_CASE("parser skips comments, trims whitespace, and overrides in order") {
  const RunConfig cfg = parse_run_config(
      "# leading comment\n"
      "\n"
      "  seed = 5  \n"
      "synth.n_scenes=4\n"
      "synth.n_scenes=9\n"
      "\t# indented comment\n");
  CHECK(cfg.seed == 5);
  CHECK(cfg.n_scenes == 9);
}

TEST_CASE("parser rejects malformed input with the offending line number") {
  SUBCASE("unknown key") {
    try {
      parse_run_config("seed=1\nssl.moco.learning_rate=0.1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("line 2") != std::string::npos);
      CHECK(msg.find("ssl.moco.learning_rate") != std::string::npos);
    }
  }

  SUBCASE("missing equals sign") {
    try {
      parse_run_config("seed=1\nsynth.width 512\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("unparseable values") {
    CHECK_THROWS_AS(parse_run_config("seed=banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("synth.object_contrast=2.0x\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("augment.enable_crop=maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("model.stage_widths=16,,64\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("matrix.models=moco,simclr\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("seed=-3\n"), ConfigError);
  }
}

TEST_CASE("matrix model list parses into kinds") {
  CHECK(parse_run_config("matrix.models=moco\n").models ==
        std::vector<ModelKind>{ModelKind::moco});
  CHECK(parse_run_config("matrix.models=byol,moco\n").models ==
        std::vector<ModelKind>{ModelKind::byol, ModelKind::moco});
}

TEST_CASE("cross-field validation") {
  RunConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("encoder input must equal the snippet size") {
    cfg.snippet_size = 32;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  SUBCASE("scenes must be large enough to chip") {
    cfg.scene.width = 32;  // < snippet_size 64
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  SUBCASE("fraction and model lists must be nonempty") {
    cfg.fractions.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.models.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  SUBCASE("member validation is reached") {
    cfg.tsne.perplexity = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.probe.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.out_dir.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.pretrain_scene_fraction = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = RunConfig{};
    cfg.source_extent = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("load_run_config reads files and flags missing ones") {
  const fs::path dir =
      fs::temp_directory_path() / ("sonarssl_cfg_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path file = dir / "run.cfg";
  std::ofstream(file) << "seed=21\nsynth.n_scenes=3\n";

  const RunConfig cfg = load_run_config(file.string());
  CHECK(cfg.seed == 21);
  CHECK(cfg.n_scenes == 3);

  CHECK_THROWS_AS(load_run_config((dir / "absent.cfg").string()), InputError);
  fs::remove_all(dir);
}
