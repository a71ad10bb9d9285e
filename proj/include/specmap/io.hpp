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

/**
 * \file io.hpp
 *
 * File formats.
 *
 * Scene (JSON):
 *   {"grid": {"origin": [x,y,z], "extent": [x,y,z], "counts": [n1,n2,n3]},
 *    "sources": [{"position": [x,y,z], "power_watts": p}, ...],
 *    "frequency_mhz": f}
 *
 * Grid CSV: header `i,j,k,x,y,z,rss_dbm`, one row per cell in row-major
 * order (k fastest). Numbers use the shortest round-trip representation.
 *
 * Grid binary (little-endian):
 *   offset  0  char[8]   magic "SPECMAP1"
 *   offset  8  int32[3]  N1, N2, N3
 *   offset 20  float64[3] origin
 *   offset 44  float64[3] extent
 *   offset 68  float64[N1*N2*N3] rss_dbm, row-major (k fastest)
 *   then       uint8[N1*N2*N3]   observed mask
 *
 * Sample CSV: header `x,y,z,rss_dbm`.
 */

#ifndef SPECMAP_IO_HPP
#define SPECMAP_IO_HPP

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "specmap/error.hpp"
#include "specmap/metrics.hpp"
#include "specmap/plfit.hpp"
#include "specmap/scene.hpp"
#include "specmap/sfla.hpp"

static_assert(std::endian::native == std::endian::little, "binary grid format assumes a little-endian host");

namespace specmap::io {

using json = nlohmann::json;

/// Shortest representation that parses back to the same double.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("cannot parse number '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

// --- JSON helpers --------------------------------------------------------------

inline Vec3 vec3_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(what + ": expected an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline json to_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

inline json to_json(const GridSpec& g) {
  return {{"origin", to_json(g.origin())}, {"extent", to_json(g.extent())},
          {"counts", {g.counts()[0], g.counts()[1], g.counts()[2]}}};
}

inline GridSpec grid_from_json(const json& j) {
  try {
    const auto& c = j.at("counts");
    if (!c.is_array() || c.size() != 3) throw ConfigError("grid.counts: expected an array of 3 integers");
    return GridSpec(vec3_from(j.at("origin"), "grid.origin"), vec3_from(j.at("extent"), "grid.extent"),
                    {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

inline json to_json(const Scene& s) {
  json src = json::array();
  for (const auto& t : s.sources) src.push_back({{"position", to_json(t.position)}, {"power_watts", t.power_watts}});
  return {{"grid", to_json(s.grid)}, {"sources", src}, {"frequency_mhz", s.frequency_mhz}};
}

inline Scene scene_from_json(const json& j) {
  Scene s;
  try {
    s.grid = grid_from_json(j.at("grid"));
    for (const auto& t : j.at("sources")) {
      const double p = t.at("power_watts").get<double>();
      if (!(p >= 0.0)) throw ConfigError("sources[].power_watts must be >= 0");
      s.sources.push_back({vec3_from(t.at("position"), "sources[].position"), p});
    }
    s.frequency_mhz = j.value("frequency_mhz", 100.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  }
  if (!(s.frequency_mhz > 0.0)) throw ConfigError("scene: frequency_mhz must be > 0");
  return s;
}

inline json parse_json_file(const std::string& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    // e.byte is the offset of the failure; turn it into a line number.
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

inline Scene load_scene(const std::string& path) { return scene_from_json(parse_json_file(path)); }

inline void save_scene(const Scene& s, const std::string& path) { open_out(path) << to_json(s).dump(2) << '\n'; }

// --- grids -----------------------------------------------------------------------

inline void write_grid_csv(const SpectrumGrid& g, std::ostream& out) {
  out << "i,j,k,x,y,z,rss_dbm\n";
  const auto v = g.values();
  for (std::size_t lin = 0; lin < g.size(); ++lin) {
    const auto idx = g.spec().unravel(lin);
    const Vec3 c = g.spec().cell_center(idx);
    out << idx[0] << ',' << idx[1] << ',' << idx[2] << ',' << fmt(c.x) << ',' << fmt(c.y) << ',' << fmt(c.z) << ','
        << fmt(v[lin]) << '\n';
  }
}

inline void save_grid_csv(const SpectrumGrid& g, const std::string& path) {
  auto out = open_out(path);
  write_grid_csv(g, out);
}

/// Reads a grid CSV onto `spec`; cells listed in the file are marked observed.
inline SpectrumGrid load_grid_csv(const std::string& path, const GridSpec& spec) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("i,j,k,x,y,z,rss_dbm", 0) != 0) throw ConfigError(path + ": unexpected grid CSV header");
  SpectrumGrid g(spec, 0.0, false);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw ConfigError(path + ":" + std::to_string(row) + ": expected 7 fields");
    const CellIndex idx{static_cast<int>(parse_double(f[0])), static_cast<int>(parse_double(f[1])),
                        static_cast<int>(parse_double(f[2]))};
    if (!spec.valid_index(idx)) throw ConfigError(path + ":" + std::to_string(row) + ": cell index outside grid");
    g.set(spec.linear(idx), parse_double(f[6]), true);
  }
  return g;
}

inline constexpr char kGridMagic[8] = {'S', 'P', 'E', 'C', 'M', 'A', 'P', '1'};

inline void save_grid_binary(const SpectrumGrid& g, const std::string& path) {
  auto out = open_out(path, std::ios::binary);
  out.write(kGridMagic, 8);
  for (int c : g.spec().counts()) {
    const auto v = static_cast<std::int32_t>(c);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    const double o = g.spec().origin()[a];
    out.write(reinterpret_cast<const char*>(&o), sizeof o);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    const double e = g.spec().extent()[a];
    out.write(reinterpret_cast<const char*>(&e), sizeof e);
  }
  out.write(reinterpret_cast<const char*>(g.values().data()), static_cast<std::streamsize>(g.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(g.mask().data()), static_cast<std::streamsize>(g.size()));
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

inline SpectrumGrid load_grid_binary(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kGridMagic, 8) != 0) throw ConfigError(path + ": not a specmap grid file");
  std::array<std::int32_t, 3> n{};
  in.read(reinterpret_cast<char*>(n.data()), sizeof n);
  Vec3 origin, extent;
  for (std::size_t a = 0; a < 3; ++a) in.read(reinterpret_cast<char*>(&origin[a]), sizeof(double));
  for (std::size_t a = 0; a < 3; ++a) in.read(reinterpret_cast<char*>(&extent[a]), sizeof(double));
  if (!in) throw ConfigError(path + ": truncated header");
  GridSpec spec;
  try {
    spec = GridSpec(origin, extent, {n[0], n[1], n[2]});
  } catch (const InvalidArgument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  std::vector<double> values(spec.cell_count());
  std::vector<std::uint8_t> mask(spec.cell_count());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
  if (!in) throw ConfigError(path + ": truncated payload");
  return SpectrumGrid(spec, std::move(values), std::move(mask));
}

// --- samples -----------------------------------------------------------------------

inline void write_samples_csv(const std::vector<Sample>& samples, std::ostream& out) {
  out << "x,y,z,rss_dbm\n";
  for (const auto& s : samples)
    out << fmt(s.position.x) << ',' << fmt(s.position.y) << ',' << fmt(s.position.z) << ',' << fmt(s.rss_dbm) << '\n';
}

inline void save_samples_csv(const std::vector<Sample>& samples, const std::string& path) {
  auto out = open_out(path);
  write_samples_csv(samples, out);
}

inline std::vector<Sample> read_samples_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  std::getline(in, line);
  if (line.rfind("x,y,z,rss_dbm", 0) != 0) throw ConfigError(name + ": expected header x,y,z,rss_dbm");
  std::vector<Sample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw ConfigError(name + ":" + std::to_string(row) + ": expected 4 fields");
    try {
      out.push_back({{parse_double(f[0]), parse_double(f[1]), parse_double(f[2])}, parse_double(f[3])});
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(row) + ": " + e.what());
    }
    if (!std::isfinite(out.back().rss_dbm)) throw ConfigError(name + ":" + std::to_string(row) + ": non-finite RSS");
  }
  return out;
}

inline std::vector<Sample> load_samples_csv(const std::string& path) {
  auto in = open_in(path);
  return read_samples_csv(in, path);
}

// --- transmitters, fits, metrics -----------------------------------------------------

inline json to_json(const std::vector<Transmitter>& s) {
  json arr = json::array();
  for (const auto& t : s) arr.push_back({{"position", to_json(t.position)}, {"power_watts", t.power_watts}});
  return arr;
}

inline std::vector<Transmitter> transmitters_from_json(const json& j) {
  std::vector<Transmitter> out;
  try {
    const json& arr = j.is_object() ? j.at("sources") : j;
    for (const auto& t : arr) out.push_back({vec3_from(t.at("position"), "position"), t.at("power_watts").get<double>()});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sources: ") + e.what());
  }
  return out;
}

inline json to_json(const sfla::Genome& g) {
  json arr = json::array();
  for (const auto& s : g)
    arr.push_back({{"eta", s.eta}, {"position", to_json(s.position)}, {"power_watts", s.power_watts}});
  return arr;
}

inline json to_json(const plfit::FitResult& r) {
  return {{"A", r.params.A},
          {"B", r.params.B},
          {"sigma_db", r.params.sigma_db},
          {"residual_norm", r.residual_norm},
          {"frequency_mhz", r.params.frequency_mhz},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

inline UrbanPlParams pl_params_from_json(const json& j) {
  UrbanPlParams p;
  try {
    p.A = j.at("A").get<double>();
    p.B = j.at("B").get<double>();
    p.sigma_db = j.value("sigma_db", 0.0);
    p.frequency_mhz = j.value("frequency_mhz", 100.0);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("path-loss parameters: ") + e.what());
  }
  return p;
}

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const metrics::MetricsReport& m) {
  return {{"rmse", m.rmse},
          {"rms_db", m.rms_db},
          {"cdzr", m.cdzr},
          {"fazr", m.fazr},
          {"zones_skipped", m.zones_skipped},
          {"loc_e", nullable(m.loc_e)},
          {"ss_e", nullable(m.ss_e)},
          {"detect_success", m.detect_success},
          {"k_true", m.k_true},
          {"k_est", m.k_est}};
}

}  // namespace specmap::io

#endif  // SPECMAP_IO_HPP
