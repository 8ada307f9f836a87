#include "geomopt/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

namespace geomopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct StemPaths {
  fs::path header;
  fs::path payload;
};

StemPaths stem_paths(fs::path stem) {
  if (stem.extension() == ".json" || stem.extension() == ".bin") stem.replace_extension();
  fs::path header = stem;
  fs::path payload = stem;
  header += ".json";
  payload += ".bin";
  return {header, payload};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_payload(const fs::path& path, const Grid& values) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(values.size()) * 4);
  std::size_t o = 0;
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values(i, j)));
      for (int b = 0; b < 4; ++b) bytes[o++] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
    }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

struct RawGrid {
  json header;
  Grid values;
};

RawGrid read_grid(const fs::path& stem) {
  const StemPaths paths = stem_paths(stem);
  json header;
  try {
    header = json::parse(read_text(paths.header));
  } catch (const json::parse_error& e) {
    throw MalformedHeaderError(paths.header.string() + ": " + e.what());
  }

  long rows = 0;
  long cols = 0;
  try {
    if (header.at("dtype").get<std::string>() != "f32le")
      throw MalformedHeaderError(paths.header.string() + ": unsupported dtype");
    const auto& shape = header.at("shape");
    if (!shape.is_array() || shape.size() != 2) throw MalformedHeaderError(paths.header.string() + ": bad shape");
    rows = shape[0].get<long>();
    cols = shape[1].get<long>();
    header.at("kind").get<std::string>();
    if (!header.at("spacing_mm").is_array()) throw MalformedHeaderError(paths.header.string() + ": bad spacing_mm");
  } catch (const json::exception& e) {
    throw MalformedHeaderError(paths.header.string() + ": " + e.what());
  }
  if (rows < 1 || cols < 1) throw MalformedHeaderError(paths.header.string() + ": non-positive shape");

  const std::string bytes = read_text(paths.payload);
  const auto expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4;
  if (bytes.size() != expected)
    throw ByteCountMismatchError(paths.payload.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                                 std::to_string(bytes.size()));

  Grid values(rows, cols);
  std::size_t o = 0;
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[o++])) << (8 * b);
      values(i, j) = static_cast<double>(std::bit_cast<float>(bits));
    }
  return {std::move(header), std::move(values)};
}

void warn_kind(const json& header, const std::string& wanted, const fs::path& stem) {
  const auto kind = header.at("kind").get<std::string>();
  if (kind != wanted)
    std::cerr << "warning: " << stem.string() << " has kind '" << kind << "', loading as " << wanted << "\n";
}

}  // namespace

void save_image(const fs::path& stem, const Image& image) {
  const StemPaths paths = stem_paths(stem);
  json header = {{"dtype", "f32le"},
                 {"shape", {image.rows(), image.cols()}},
                 {"spacing_mm", {image.pixel_spacing, image.pixel_spacing}},
                 {"origin_mm", {image.origin.x(), image.origin.y()}},
                 {"kind", "image"}};
  write_text(paths.header, header.dump(2) + "\n");
  write_payload(paths.payload, image.values);
}

void save_sinogram(const fs::path& stem, const Sinogram& sino) {
  sino.validate();
  const StemPaths paths = stem_paths(stem);
  json header = {{"dtype", "f32le"},
                 {"shape", {sino.values.rows(), sino.values.cols()}},
                 {"spacing_mm", {sino.geometry.detector_spacing}},
                 {"kind", "sinogram"},
                 {"geometry", geometry_to_json(sino.geometry)}};
  write_text(paths.header, header.dump(2) + "\n");
  write_payload(paths.payload, sino.values);
}

Image load_image(const fs::path& stem) {
  RawGrid raw = read_grid(stem);
  warn_kind(raw.header, "image", stem);
  Image image;
  image.values = std::move(raw.values);
  const auto& spacing = raw.header["spacing_mm"];
  image.pixel_spacing = spacing.empty() ? 1.0 : spacing.back().get<double>();
  if (raw.header.contains("origin_mm")) {
    const auto& o = raw.header["origin_mm"];
    image.origin = Eigen::Vector2d(o.at(0).get<double>(), o.at(1).get<double>());
  }
  return image;
}

Sinogram load_sinogram(const fs::path& stem) {
  RawGrid raw = read_grid(stem);
  warn_kind(raw.header, "sinogram", stem);
  if (!raw.header.contains("geometry"))
    throw MalformedHeaderError(stem.string() + ": sinogram header lacks geometry metadata");
  Sinogram sino;
  try {
    sino.geometry = geometry_from_json(raw.header["geometry"]);
  } catch (const ConfigError& e) {
    throw MalformedHeaderError(stem.string() + ": " + e.what());
  }
  sino.values = std::move(raw.values);
  try {
    sino.validate();
  } catch (const ShapeError& e) {
    throw MalformedHeaderError(stem.string() + ": " + e.what());
  }
  return sino;
}

void export_pgm(const Image& image, const fs::path& path, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("PGM window needs lo < hi");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols() << " " << image.rows() << "\n65535\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(image.values.size()) * 2);
  std::size_t o = 0;
  for (Eigen::Index i = 0; i < image.rows(); ++i)
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double t = (image.values(i, j) - lo) / (hi - lo) * 65535.0;
      const double clamped = std::clamp(std::isnan(t) ? 0.0 : t, 0.0, 65535.0);
      const auto v = static_cast<std::uint16_t>(std::floor(clamped));
      bytes[o++] = static_cast<unsigned char>(v >> 8);
      bytes[o++] = static_cast<unsigned char>(v & 0xffu);
    }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::pair<double, double> auto_window(const Image& image) {
  const double lo = image.values.minCoeff();
  const double hi = image.values.maxCoeff();
  return hi > lo ? std::pair{lo, hi} : std::pair{lo, lo + 1.0};
}

json geometry_to_json(const ScanGeometry& g) {
  return {{"source_isocenter_distance", g.source_isocenter_distance},
          {"source_detector_distance", g.source_detector_distance},
          {"num_projections", g.num_projections},
          {"num_detector_pixels", g.num_detector_pixels},
          {"detector_spacing", g.detector_spacing},
          {"angular_range", g.angular_range},
          {"start_angle", g.start_angle}};
}

ScanGeometry geometry_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("geometry must be a JSON object");
  static const std::set<std::string> known = {"source_isocenter_distance", "source_detector_distance",
                                              "num_projections", "num_detector_pixels", "detector_spacing",
                                              "angular_range", "start_angle"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown geometry key '" + key + "'");
  ScanGeometry g;
  try {
    g.source_isocenter_distance = j.value("source_isocenter_distance", g.source_isocenter_distance);
    g.source_detector_distance = j.value("source_detector_distance", g.source_detector_distance);
    g.num_projections = j.value("num_projections", g.num_projections);
    g.num_detector_pixels = j.value("num_detector_pixels", g.num_detector_pixels);
    g.detector_spacing = j.value("detector_spacing", g.detector_spacing);
    g.angular_range = j.value("angular_range", g.angular_range);
    g.start_angle = j.value("start_angle", g.start_angle);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  g.validate();
  return g;
}

void save_matrices(const fs::path& path, const ProjectionMatrixStack& P) {
  json matrices = json::array();
  for (const auto& M : P)
    matrices.push_back({{M(0, 0), M(0, 1), M(0, 2)}, {M(1, 0), M(1, 1), M(1, 2)}});
  const json doc = {{"kind", "projection_matrices"}, {"matrices", matrices}};
  write_text(path, doc.dump() + "\n");
}

ProjectionMatrixStack load_matrices(const fs::path& path) {
  try {
    const json doc = json::parse(read_text(path));
    std::vector<ProjectionMatrix> out;
    for (const auto& m : doc.at("matrices")) {
      ProjectionMatrix M;
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) M(r, c) = m.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
      out.push_back(M);
    }
    return ProjectionMatrixStack(std::move(out));
  } catch (const json::exception& e) {
    throw MalformedHeaderError(path.string() + ": " + e.what());
  }
}

}  // namespace geomopt
