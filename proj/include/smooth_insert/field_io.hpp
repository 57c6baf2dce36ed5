#pragma once

// Field file formats.
//
// JSON: {"domain": {"kind": "box", "lower": [...], "upper": [...]}
//                | {"kind": "ball", "center": [...], "radius": R},
//        "shape": [...], "values": [...], "mask": [...]?}
// Values are row-major; invalid samples are written as null.
//
// CSV (n = 1 or 2): header "y,f" or "x,y,f", one row per valid sample in row-major order.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "field.hpp"
#include "json.hpp"

namespace smooth_insert {

using json = nlohmann::json;

/// Writes `content` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw InputError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Shortest round-trip representation, matching the JSON writer.
inline std::string format_double(double v) {
  return json(v).dump();
}

inline json point_to_json(const Point& p, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(p[i]);
  return a;
}

inline json index_to_json(const GridIndex& g, int dim) {
  json a = json::array();
  for (int i = 0; i < dim; ++i) a.push_back(g[i]);
  return a;
}

inline json domain_to_json(const Domain& d) {
  json j;
  if (d.kind() == DomainKind::box) {
    j["kind"] = "box";
    j["lower"] = point_to_json(d.lower(), d.dim());
    j["upper"] = point_to_json(d.upper(), d.dim());
  } else {
    j["kind"] = "ball";
    j["center"] = point_to_json(d.center(), d.dim());
    j["radius"] = d.radius();
  }
  return j;
}

inline Domain domain_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "box")
      return Domain::box(j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>());
    if (kind == "ball") return Domain::ball(j.at("center").get<std::vector<double>>(), j.at("radius").get<double>());
    throw InputError("unknown domain kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed domain: ") + e.what());
  } catch (const ConstructionError& e) {
    throw InputError(std::string("invalid domain: ") + e.what());
  }
}

inline json mask_to_json(const Mask& m) {
  json a = json::array();
  for (auto b : m) a.push_back(b != 0);
  return a;
}

inline json field_to_json(const ScalarField& f) {
  json j;
  j["domain"] = domain_to_json(f.domain());
  j["shape"] = f.shape_vector();
  json values = json::array();
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f.valid(k))
      values.push_back(f[k]);
    else
      values.push_back(nullptr);
  }
  j["values"] = std::move(values);
  if (f.has_mask()) j["mask"] = mask_to_json(f.mask());
  return j;
}

inline ScalarField field_from_json(const json& j) {
  try {
    Domain domain = domain_from_json(j.at("domain"));
    const auto shape = j.at("shape").get<std::vector<int>>();
    const json& jv = j.at("values");
    if (!jv.is_array()) throw InputError("'values' must be an array");
    std::vector<double> values(jv.size(), 0.0);
    Mask mask(jv.size(), 1);
    bool any_invalid = false;
    for (std::size_t k = 0; k < jv.size(); ++k) {
      if (jv[k].is_null()) {
        mask[k] = 0;
        any_invalid = true;
      } else {
        values[k] = jv[k].get<double>();
      }
    }
    if (j.contains("mask")) {
      const json& jm = j.at("mask");
      if (!jm.is_array() || jm.size() != jv.size()) throw InputError("'mask' must match 'values' in length");
      for (std::size_t k = 0; k < jm.size(); ++k) {
        const bool on = jm[k].is_boolean() ? jm[k].get<bool>() : jm[k].get<int>() != 0;
        if (!on) {
          mask[k] = 0;
          any_invalid = true;
        }
      }
    }
    return ScalarField(std::move(domain), shape, std::move(values), any_invalid ? mask : Mask{});
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed field file: ") + e.what());
  } catch (const ConstructionError& e) {
    throw InputError(std::string("invalid field: ") + e.what());
  }
}

inline ScalarField read_field(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return field_from_json(j);
}

inline void write_field(const std::filesystem::path& path, const ScalarField& f) {
  write_file_atomic(path, field_to_json(f).dump(1) + "\n");
}

inline std::string field_to_csv(const ScalarField& f) {
  if (f.dim() > 2) throw InputError("CSV export supports dimension 1 and 2 only");
  std::ostringstream os;
  os << (f.dim() == 1 ? "y,f\n" : "x,y,f\n");
  for_each_valid(f, [&](std::size_t k) {
    const Point p = f.point(k);
    for (int i = 0; i < f.dim(); ++i) os << format_double(p[i]) << ',';
    os << format_double(f[k]) << '\n';
  });
  return os.str();
}

/// Rebuilds a box-domain field from CSV rows. Coordinates must form a tensor grid;
/// grid vertices without a row become invalid samples.
inline ScalarField field_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty CSV");
  int dim = 0;
  if (line.rfind("y,f", 0) == 0)
    dim = 1;
  else if (line.rfind("x,y,f", 0) == 0)
    dim = 2;
  else
    throw InputError("CSV header must be 'y,f' or 'x,y,f'");

  std::vector<std::array<double, 3>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::array<double, 3> r{};
    std::istringstream ls(line);
    std::string cell;
    for (int c = 0; c <= dim; ++c) {
      if (!std::getline(ls, cell, ',')) throw InputError("short CSV row: " + line);
      try {
        r[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw InputError("bad number in CSV row: " + line);
      }
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw InputError("CSV has no data rows");

  std::array<std::vector<double>, 2> coords;
  for (int a = 0; a < dim; ++a) {
    for (const auto& r : rows) coords[a].push_back(r[a]);
    std::sort(coords[a].begin(), coords[a].end());
    coords[a].erase(std::unique(coords[a].begin(), coords[a].end()), coords[a].end());
    if (coords[a].size() < 2) throw InputError("CSV grid needs at least 2 distinct coordinates per axis");
  }
  std::vector<double> lower, upper;
  std::vector<int> shape;
  for (int a = 0; a < dim; ++a) {
    lower.push_back(coords[a].front());
    upper.push_back(coords[a].back());
    shape.push_back(static_cast<int>(coords[a].size()));
    const double step = (upper[a] - lower[a]) / (shape[a] - 1);
    for (std::size_t i = 0; i < coords[a].size(); ++i)
      if (std::abs(coords[a][i] - (lower[a] + i * step)) > 1e-9 * (upper[a] - lower[a]))
        throw InputError("CSV coordinates are not uniformly spaced");
  }
  std::size_t total = 1;
  for (int s : shape) total *= s;
  std::vector<double> values(total, 0.0);
  Mask mask(total, 0);
  for (const auto& r : rows) {
    std::size_t k = 0;
    for (int a = 0; a < dim; ++a) {
      const auto it = std::lower_bound(coords[a].begin(), coords[a].end(), r[a]);
      k = k * shape[a] + static_cast<std::size_t>(it - coords[a].begin());
    }
    values[k] = r[dim];
    mask[k] = 1;
  }
  const bool full = std::all_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m; });
  return ScalarField(Domain::box(lower, upper), shape, std::move(values), full ? Mask{} : mask);
}

}  // namespace smooth_insert
