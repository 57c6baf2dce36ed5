#pragma once

// Mask files: ASCII PGM rasters (P2, nonzero = marked) and JSON index lists.
//
// A PGM raster has height = shape[0] rows and width = shape[1] columns (1D masks are one
// row). It carries no domain, so the reader takes one. The JSON form is
//   {"domain": {...}, "shape": [...], "indices": [[i, j], ...]}.

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "distance.hpp"
#include "field_io.hpp"

namespace smooth_insert {

inline std::string mask_to_pgm(const ClosedMask& m) {
  const ScalarField& g = m.grid();
  if (g.dim() > 2) throw InputError("PGM masks are limited to 1D and 2D grids");
  const int rows = g.dim() == 2 ? g.shape()[0] : 1;
  const int cols = g.dim() == 2 ? g.shape()[1] : g.shape()[0];
  std::ostringstream os;
  os << "P2\n" << cols << ' ' << rows << "\n1\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) os << (c ? " " : "") << (m[static_cast<std::size_t>(r) * cols + c] ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

/// Reads a P2 raster onto a grid of `domain` whose shape is the raster's (rows, cols), or
/// (cols) for a 1D domain with a single row.
inline ClosedMask mask_from_pgm(const std::string& text, const Domain& domain) {
  std::istringstream in;
  {
    // Strip comments.
    std::string cleaned, line;
    std::istringstream raw(text);
    while (std::getline(raw, line)) cleaned += line.substr(0, line.find('#')) + "\n";
    in.str(cleaned);
  }
  std::string magic;
  int cols = 0, rows = 0, maxval = 0;
  if (!(in >> magic >> cols >> rows >> maxval) || magic != "P2" || cols < 1 || rows < 1 || maxval < 1)
    throw InputError("malformed PGM header (expected P2 width height maxval)");
  std::vector<int> shape;
  if (domain.dim() == 1) {
    if (rows != 1) throw InputError("a 1D mask raster must have one row");
    shape = {cols};
  } else if (domain.dim() == 2) {
    shape = {rows, cols};
  } else {
    throw InputError("PGM masks are limited to 1D and 2D grids");
  }
  const ScalarField grid(domain, shape, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
  Mask bits(grid.size(), 0);
  for (std::size_t k = 0; k < bits.size(); ++k) {
    int v = 0;
    if (!(in >> v)) throw InputError("PGM raster ends early at pixel " + std::to_string(k));
    if (v < 0 || v > maxval) throw InputError("PGM value out of range at pixel " + std::to_string(k));
    bits[k] = (v != 0 && grid.valid(k)) ? 1 : 0;
  }
  return ClosedMask(grid, std::move(bits));
}

inline json closed_mask_to_json(const ClosedMask& m) {
  const ScalarField& g = m.grid();
  json idx = json::array();
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m[k]) idx.push_back(index_to_json(g.index(k), g.dim()));
  return {{"domain", domain_to_json(g.domain())}, {"shape", g.shape_vector()}, {"indices", idx}};
}

inline ClosedMask closed_mask_from_json(const json& j) {
  try {
    const Domain domain = domain_from_json(j.at("domain"));
    const auto shape = j.at("shape").get<std::vector<int>>();
    std::size_t total = 1;
    for (int s : shape) total *= static_cast<std::size_t>(std::max(s, 0));
    const ScalarField grid(domain, shape, std::vector<double>(total, 0.0));
    Mask bits(total, 0);
    for (const auto& e : j.at("indices")) {
      const auto v = e.get<std::vector<int>>();
      if (static_cast<int>(v.size()) != grid.dim()) throw InputError("mask index has the wrong length");
      GridIndex g{};
      for (int i = 0; i < grid.dim(); ++i) g[i] = v[i];
      if (!grid.in_grid(g)) throw InputError("mask index " + format_index(g, grid.dim()) + " is outside the grid");
      bits[grid.flat(g)] = 1;
    }
    return ClosedMask(grid, std::move(bits));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed mask JSON: ") + e.what());
  }
}

/// Reads a mask by extension: .pgm (needs `domain`) or .json.
inline ClosedMask read_mask(const std::filesystem::path& path, const Domain& domain) {
  const std::string text = read_file(path);
  if (path.extension() == ".pgm") return mask_from_pgm(text, domain);
  try {
    return closed_mask_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw InputError("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace smooth_insert
