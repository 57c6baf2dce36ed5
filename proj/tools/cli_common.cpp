#include "cli_common.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace si_cli {

json RunConfig::to_json() const {
  json j = {{"subcommand", subcommand}, {"tol_ins", tol_ins},   {"tol_env", tol_env},
            {"seed", seed},             {"metric", metric},     {"modulus", modulus},
            {"emit_plot_data", emit_plot_data}};
  if (!input.empty()) j["input"] = input;
  if (!input_b.empty()) j["input_b"] = input_b;
  if (!set_a.empty()) j["set_a"] = set_a;
  if (!set_b.empty()) j["set_b"] = set_b;
  if (!domain.empty()) j["domain"] = domain;
  if (!grid.empty()) j["grid"] = grid;
  if (radius) j["radius"] = *radius;
  if (rho) j["rho"] = *rho;
  if (subcommand == "insert") {
    j["barrier_pad"] = barrier_pad;
    j["strict"] = strict;
  }
  if (!demo.empty()) j["demo"] = demo;
  return j;
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("SMOOTH_INSERT_LOG");
  if (!v || std::string(v).empty() || std::string(v) == "info") return LogLevel::info;
  if (std::string(v) == "quiet") return LogLevel::quiet;
  if (std::string(v) == "debug") return LogLevel::debug;
  throw si::InputError(std::string("SMOOTH_INSERT_LOG must be quiet, info or debug (got '") + v + "')");
}

void log_info(const std::string& msg) {
  if (log_level_from_env() != LogLevel::quiet) std::cerr << "[info] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level_from_env() == LogLevel::debug) std::cerr << "[debug] " << msg << '\n';
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw si::InvariantError("SHA-256 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void Outputs::write(const std::string& name, const std::string& content) {
  si::write_file_atomic(dir_ / name, content);
  digests_.emplace_back(name, sha256_hex(content));
  log_debug("wrote " + (dir_ / name).string());
}

void Outputs::write_checksums() {
  std::string s;
  for (const auto& [name, digest] : digests_) s += digest + "  " + name + "\n";
  si::write_file_atomic(dir_ / "checksums.sha256", s);
}

si::ScalarField read_field_any(const std::string& path) {
  if (fs::path(path).extension() == ".csv") return si::field_from_csv(si::read_file(path));
  return si::read_field(path);
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(part, &used);
      if (used != part.size() || v < 2) throw std::invalid_argument("bad");
      shape.push_back(v);
    } catch (const std::exception&) {
      throw si::InputError("--grid expects NxM with integers >= 2 (got '" + text + "')");
    }
  }
  if (shape.empty() || shape.size() > 3) throw si::InputError("--grid expects 1 to 3 sizes (got '" + text + "')");
  return shape;
}

si::Domain parse_domain(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw si::InputError("--domain expects box:... or ball:... (got '" + text + "')");
  const std::string kind = text.substr(0, colon);
  std::vector<double> v;
  std::stringstream ss(text.substr(colon + 1));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw si::InputError("bad number '" + part + "' in --domain");
    }
  }
  try {
    if (kind == "box") {
      if (v.empty() || v.size() % 2 != 0 || v.size() > 6) throw si::InputError("box domain needs lo,hi pairs");
      std::vector<double> lo, hi;
      for (std::size_t i = 0; i < v.size(); i += 2) {
        lo.push_back(v[i]);
        hi.push_back(v[i + 1]);
      }
      return si::Domain::box(lo, hi);
    }
    if (kind == "ball") {
      if (v.size() < 2 || v.size() > 4) throw si::InputError("ball domain needs centre coordinates then radius");
      return si::Domain::ball(std::vector<double>(v.begin(), v.end() - 1), v.back());
    }
  } catch (const si::ConstructionError& e) {
    throw si::InputError(std::string("invalid --domain: ") + e.what());
  }
  throw si::InputError("unknown domain kind '" + kind + "'");
}

std::string fields_to_csv(const std::vector<std::string>& names, const std::vector<const si::ScalarField*>& fields) {
  const si::ScalarField& base = *fields.front();
  const int n = base.dim();
  std::string s;
  for (int i = 0; i < n; ++i) s += "y" + std::to_string(i) + ",";
  for (std::size_t c = 0; c < names.size(); ++c) s += names[c] + (c + 1 < names.size() ? "," : "\n");
  si::for_each_valid(base, [&](std::size_t k) {
    const si::Point p = base.point(k);
    for (int i = 0; i < n; ++i) s += si::format_double(p[i]) + ",";
    for (std::size_t c = 0; c < fields.size(); ++c) {
      s += fields[c]->valid(k) ? si::format_double((*fields[c])[k]) : "";
      s += c + 1 < fields.size() ? "," : "\n";
    }
  });
  return s;
}

}  // namespace si_cli
