#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "lfi/experiment.hpp"

using namespace lfi;

TEST_CASE("every preset round-trips canonically") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const ExperimentConfig c = preset(name);
    const std::string once = c.emit();
    const std::string twice = ExperimentConfig::parse(once).emit();
    CHECK(once == twice);
    CHECK(IniDocument::parse(once).emit() == once);
  }
  CHECK(preset_names().size() == 12);
  CHECK_THROWS_AS(preset("nope"), ConfigError);
}

TEST_CASE("paper presets follow the published protocol") {
  const ExperimentConfig p = preset("ricker-paper");
  CHECK(p.train_n == 125000);
  CHECK(p.validation_fraction == 0.25);
  CHECK(p.grid_l == 100);
  CHECK(p.train.hidden == std::vector<Index>{32, 32});
  const ExperimentConfig t = preset("ricker-table1-desk");
  CHECK(t.grid_l == 20);
  REQUIRE(t.grid_points.size() == 3);
  CHECK(t.grid_points[0] == Vector{{2.5, 0.2, 1.5}});
  CHECK(preset("fn-grid-desk").fn_stride == 5);
  CHECK(preset("fn-grid-paper").fn_stride == 1);
}

TEST_CASE("parsing is lenient on layout but canonical on output") {
  const std::string text =
      "schema=1\n# comment\n[model]\n  name =  fn \nfn_noise_sd = 0.1\n\n[estimators]\nlist = rmdr , mle\n";
  const ExperimentConfig c = ExperimentConfig::parse(text);
  CHECK(c.model == "fn");
  CHECK(c.fn_noise_sd == 0.1);
  CHECK(c.estimators == std::vector<std::string>{"rmdr", "mle"});
  const std::string canon = c.emit();
  CHECK(canon.find("fn_noise_sd = 0.1\n") != std::string::npos);
  CHECK(canon.find("ricker_m =") == std::string::npos);
  CHECK(ExperimentConfig::parse(canon).emit() == canon);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(ExperimentConfig::parse("[model]\nname = ricker\n"), ConfigError);  // no schema
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 2\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[train]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[nosuch]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[model]\nname = ricker\nmg1_n = 5\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[train]\nn = 10\nn = 20\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[train]\nn = ten\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\nnot a pair\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[estimators]\nlist = rm,magic\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[estimators]\nlist = mle\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("schema = 1\n[pipeline]\nid = none\n[estimators]\nlist = rmdr\n"),
                  ConfigError);
  try {
    ExperimentConfig::parse("schema = 1\n[train]\n\nn 5\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("model and grid construction from config") {
  ExperimentConfig c = preset("mg1-desk");
  c.mg1_n = 50;
  const auto model = make_model(c);
  CHECK(model->name() == "mg1");
  CHECK(model->output_length() == 50);
  const TestGrid g = make_grid(c, *model);
  CHECK(g.size() == 30);
  CHECK(g.replicates == 10);
  CHECK(make_grid(preset("fn-grid-desk"), *make_model(preset("fn-grid-desk"))).size() == 81);
  c.estimators.clear();
  CHECK_THROWS_AS(build_estimators(c, *model, 1), ConfigError);
}

TEST_CASE("dataset csv round trip and line-numbered errors") {
  RngStream rng(1, 2);
  LvModel lv;
  const Dataset d = lv.simulate(Vector{{0.5, 0.008, 0.3}}, rng);
  const std::string path = "test_config_data.csv";
  write_dataset_csv(d, path);
  const Dataset back = read_dataset_csv(path);
  CHECK(back.names == d.names);
  CHECK(back.values == d.values);
  CHECK(back.time == d.time);

  RickerModel ricker(20);
  write_dataset_csv(ricker.simulate(Vector{{3.0, 0.2, 2.0}}, rng), path);
  CHECK(read_dataset_csv(path).time.size() == 0);
  {
    std::ofstream out(path, std::ios::app);
    out << "21,abc\n";
  }
  try {
    read_dataset_csv(path);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":22:") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_dataset_csv("no_such_file.csv"), FormatError);
}
