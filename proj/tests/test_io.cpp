// Copyright 2026 The specmap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "specmap/io.hpp"
#include "specmap/synthgen.hpp"

namespace specmap::io {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "specmap_io_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Format, ShortestRoundTrip) {
  for (double v : {0.0, -42.4, 1e-300, 3.141592653589793, -1.0 / 3.0, 1e22}) EXPECT_EQ(parse_double(fmt(v)), v);
  EXPECT_EQ(fmt(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_TRUE(std::isnan(parse_double("nan")));
  EXPECT_TRUE(std::isnan(parse_double("")));
  EXPECT_THROW(parse_double("12x"), ConfigError);
}

TEST(Scene, JsonRoundTrip) {
  Scene s = table1_scene(4);
  s.frequency_mhz = 433.0;
  const auto path = scratch("scene.json").string();
  save_scene(s, path);
  const Scene back = load_scene(path);
  EXPECT_EQ(back.grid, s.grid);
  EXPECT_EQ(back.sources, s.sources);
  EXPECT_EQ(back.frequency_mhz, 433.0);
}

TEST(Scene, RejectsMalformed) {
  EXPECT_THROW(scene_from_json(json::parse(R"({"sources": []})")), ConfigError);
  EXPECT_THROW(scene_from_json(json::parse(
                   R"({"grid": {"origin": [0,0,0], "extent": [1,1,1], "counts": [1,1]}, "sources": []})")),
               ConfigError);
  EXPECT_THROW(scene_from_json(json::parse(
                   R"({"grid": {"origin": [0,0,0], "extent": [1,1,1], "counts": [1,1,1]},
                       "sources": [{"position": [0,0,0], "power_watts": -1}]})")),
               ConfigError);
  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{\n  \"grid\": {\n    \"origin\": [0, 0,, 0]\n  }\n}\n";
  try {
    load_scene(bad.string());
    FAIL() << "expected a parse error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
  }
}

SpectrumGrid sample_grid() {
  Scene s = table1_scene(2);
  s.grid = GridSpec({0, -450, 0}, {500, 500, 100}, {7, 5, 3});
  auto g = generate_truth_grid(s, {}, 4);
  g.mask()[3] = 0;
  return g;
}

TEST(Grid, BinaryRoundTrip) {
  const auto g = sample_grid();
  const auto path = scratch("grid.bin").string();
  save_grid_binary(g, path);
  const auto back = load_grid_binary(path);
  EXPECT_EQ(back.spec(), g.spec());
  EXPECT_TRUE(std::equal(g.values().begin(), g.values().end(), back.values().begin()));
  EXPECT_TRUE(std::equal(g.mask().begin(), g.mask().end(), back.mask().begin()));
  EXPECT_EQ(fs::file_size(path), 8 + 12 + 48 + g.size() * 9);
}

TEST(Grid, BinaryRejectsForeignAndTruncatedFiles) {
  const auto path = scratch("junk.bin");
  std::ofstream(path) << "NOTAGRID and some bytes";
  EXPECT_THROW(load_grid_binary(path.string()), ConfigError);
  const auto g = sample_grid();
  const auto cut = scratch("cut.bin");
  save_grid_binary(g, cut.string());
  fs::resize_file(cut, fs::file_size(cut) - 5);
  EXPECT_THROW(load_grid_binary(cut.string()), ConfigError);
}

TEST(Grid, CsvRoundTrip) {
  auto g = sample_grid();
  g.mask()[3] = 1;
  const auto path = scratch("grid.csv").string();
  save_grid_csv(g, path);
  const auto back = load_grid_csv(path, g.spec());
  EXPECT_TRUE(back.fully_observed());
  EXPECT_TRUE(std::equal(g.values().begin(), g.values().end(), back.values().begin()));
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "i,j,k,x,y,z,rss_dbm");
}

TEST(Samples, CsvRoundTrip) {
  const std::vector<Sample> s{{{2.5, -447.5, 5}, -38.123456789}, {{0.1, 0.2, 0.3}, 7.0}};
  std::stringstream ss;
  write_samples_csv(s, ss);
  EXPECT_EQ(read_samples_csv(ss), s);
}

TEST(Samples, CsvErrorsCarryLine) {
  std::stringstream ss("x,y,z,rss_dbm\n1,2,3,-40\n1,2,-40\n");
  try {
    read_samples_csv(ss, "s.csv");
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("s.csv:3"), std::string::npos);
  }
  std::stringstream nohdr("1,2,3,4\n");
  EXPECT_THROW(read_samples_csv(nohdr), ConfigError);
  std::stringstream nan_rss("x,y,z,rss_dbm\n1,2,3,nan\n");
  EXPECT_THROW(read_samples_csv(nan_rss), ConfigError);
}

TEST(Transmitters, JsonRoundTrip) {
  const auto s = table1_scene(3).sources;
  EXPECT_EQ(transmitters_from_json(to_json(s)), s);
  EXPECT_EQ(transmitters_from_json(json{{"sources", to_json(s)}}), s);
  EXPECT_THROW(transmitters_from_json(json::parse(R"([{"position": [1, 2]}])")), ConfigError);
}

TEST(Metrics, NanBecomesNull) {
  metrics::MetricsReport m;
  m.rmse = 0.25;
  const auto j = to_json(m);
  EXPECT_TRUE(j.at("loc_e").is_null());
  EXPECT_EQ(j.at("rmse").get<double>(), 0.25);
}

TEST(PathLoss, JsonRoundTrip) {
  plfit::FitResult r;
  r.params = {2.4, -0.07, 3.9, 100.0};
  const auto p = pl_params_from_json(to_json(r));
  EXPECT_EQ(p.A, 2.4);
  EXPECT_EQ(p.B, -0.07);
  EXPECT_EQ(p.sigma_db, 3.9);
  EXPECT_THROW(pl_params_from_json(json::parse(R"({"A": 2})")), ConfigError);
}

}  // namespace
}  // namespace specmap::io
