#pragma once

#include <filesystem>
#include <utility>

#include <json.hpp>

#include "geomopt/geometry.hpp"
#include "geomopt/image.hpp"
#include "geomopt/projector.hpp"

namespace geomopt {

/// Grids persist as a `<stem>.json` header plus a `<stem>.bin` payload of
/// row-major little-endian float32 values. `stem` may carry either extension.
/// Values are narrowed to float32 on save, so the round trip is bit-exact for
/// float-representable grids.
void save_image(const std::filesystem::path& stem, const Image& image);
void save_sinogram(const std::filesystem::path& stem, const Sinogram& sino);

/// Throws MissingFileError, MalformedHeaderError or ByteCountMismatchError.
/// A header of the other kind loads with a warning on stderr.
Image load_image(const std::filesystem::path& stem);
Sinogram load_sinogram(const std::filesystem::path& stem);

/// 16-bit binary PGM (P5, big-endian samples). Values are mapped affinely
/// from [lo, hi] to [0, 65535], clamped and floored.
void export_pgm(const Image& image, const std::filesystem::path& path, double lo, double hi);

/// Window spanning the image's min and max (falls back to [min, min + 1]).
std::pair<double, double> auto_window(const Image& image);

nlohmann::json geometry_to_json(const ScanGeometry& geom);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ScanGeometry geometry_from_json(const nlohmann::json& j);

/// Projection matrices as JSON: {"kind": "projection_matrices", "matrices": [[[..3], [..3]], ...]}.
void save_matrices(const std::filesystem::path& path, const ProjectionMatrixStack& P);
ProjectionMatrixStack load_matrices(const std::filesystem::path& path);

}  // namespace geomopt
