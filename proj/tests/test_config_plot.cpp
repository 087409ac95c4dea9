#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "avsync/config.hpp"
#include "avsync/plot.hpp"

using namespace avsync;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream os(p, std::ios::trunc);
  os << content;
  return p;
}

}  // namespace

TEST_CASE("config: sections, typed getters, lists") {
  const auto p = write_temp("avsync_cfg.txt",
                            "# comment\n[synth]\nnum_videos = 50\nduration = 4.5\n\n[train]\n"
                            "schedule = curriculum\nlr_grid = 0.1,0.01\nsingle = true\n");
  auto cfg = RunConfig::load(p.string());
  CHECK(cfg.get_int("synth", "num_videos", 0) == 50);
  CHECK(cfg.get_double("synth", "duration", 0) == doctest::Approx(4.5));
  CHECK(cfg.get("train", "schedule", "") == "curriculum");
  CHECK(cfg.get_bool("train", "single", false));
  auto grid = cfg.get_list("train", "lr_grid", {});
  REQUIRE(grid.size() == 2);
  CHECK(grid[1] == doctest::Approx(0.01));
  CHECK(cfg.get_int("train", "missing", 7) == 7);
  fs::remove(p);
}

TEST_CASE("config: unknown keys are rejected by name") {
  const auto p = write_temp("avsync_cfg_bad.txt", "[train]\nlr = 0.1\nlearning_rte = 0.1\n");
  auto cfg = RunConfig::load(p.string());
  std::map<std::string, std::set<std::string>> registry{{"train", {"lr"}}};
  CHECK_THROWS_WITH_AS(cfg.validate_known(registry), doctest::Contains("learning_rte"),
                       std::runtime_error);
  std::map<std::string, std::set<std::string>> no_section;
  CHECK_THROWS_WITH_AS(cfg.validate_known(no_section), doctest::Contains("[train]"),
                       std::runtime_error);
  fs::remove(p);
}

TEST_CASE("config: malformed lines and duplicates error with line numbers") {
  const auto p1 = write_temp("avsync_cfg_m1.txt", "[a]\nkey_without_value\n");
  CHECK_THROWS_WITH_AS(RunConfig::load(p1.string()), doctest::Contains(":2:"),
                       std::runtime_error);
  const auto p2 = write_temp("avsync_cfg_m2.txt", "[a]\nk = 1\nk = 2\n");
  CHECK_THROWS_WITH_AS(RunConfig::load(p2.string()), doctest::Contains("duplicate"),
                       std::runtime_error);
  const auto p3 = write_temp("avsync_cfg_m3.txt", "k = 1\n");
  CHECK_THROWS_WITH_AS(RunConfig::load(p3.string()), doctest::Contains("before any"),
                       std::runtime_error);
  fs::remove(p1);
  fs::remove(p2);
  fs::remove(p3);
}

TEST_CASE("config: echo preserves the file verbatim and appends overrides") {
  const std::string body = "# keep me\n[train]\nlr = 0.1\n";
  const auto p = write_temp("avsync_cfg_echo.txt", body);
  auto cfg = RunConfig::load(p.string());
  cfg.override_value("train", "seed", "42");
  const std::string echo = cfg.echo();
  CHECK(echo.find(body) != std::string::npos);
  CHECK(echo.find("train.seed = 42") != std::string::npos);
  CHECK(cfg.get_int("train", "seed", 0) == 42);
  fs::remove(p);
}

TEST_CASE("plot: one SVG per metric column with axis labels from the header") {
  const auto csv = write_temp("avsync_plot.csv",
                              "epoch,loss,val_acc\n1,0.9,0.5\n2,0.7,0.6\n3,0.5,0.8\n");
  const auto dir = fs::temp_directory_path() / "avsync_plots";
  fs::remove_all(dir);
  auto files = plot_csv(csv.string(), dir.string());
  REQUIRE(files.size() == 2);
  for (const auto& f : files) {
    std::ifstream is(f);
    std::stringstream ss;
    ss << is.rdbuf();
    const std::string svg = ss.str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("epoch") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
  }
  CHECK(fs::exists(dir / "loss.svg"));
  CHECK(fs::exists(dir / "val_acc.svg"));
  fs::remove(csv);
  fs::remove_all(dir);
}

TEST_CASE("plot: malformed csv rejected") {
  const auto bad = write_temp("avsync_plot_bad.csv", "epoch,loss\n1,abc\n");
  CHECK_THROWS_WITH_AS(plot_csv(bad.string(), (fs::temp_directory_path() / "x").string()),
                       doctest::Contains("non-numeric"), std::runtime_error);
  fs::remove(bad);
}
