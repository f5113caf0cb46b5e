#pragma once

// Dataset manifests and annotation files.
//
// Manifest: one entry per line, `image,label[,bbox_file[,fixation_file]]`,
// '#' starts a comment, relative paths resolve against the manifest's folder.
// Bounding-box files hold `top,left,height,width` lines; fixation files hold
// `row,col` lines (integer pixels).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fovex/error.hpp"
#include "fovex/geometry.hpp"
#include "fovex/image_io.hpp"
#include "fovex/random.hpp"
#include "fovex/synthetic.hpp"

namespace fovex {

struct ManifestEntry {
  std::string image;
  std::size_t label = 0;
  std::optional<std::string> boxes;
  std::optional<std::string> fixations;
};

struct DatasetManifest {
  std::string path;
  std::vector<ManifestEntry> entries;
};

namespace dataset_detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t\r");
    const auto e = item.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : item.substr(b, e - b + 1));
  }
  return out;
}

inline std::vector<std::size_t> parse_uints(const std::string& line, std::size_t expected, const std::string& where) {
  const auto fields = split_csv(line);
  if (fields.size() != expected) {
    throw DataError(where + ": expected " + std::to_string(expected) + " comma-separated integers");
  }
  std::vector<std::size_t> out;
  for (const auto& f : fields) {
    if (f.empty() || f.find_first_not_of("0123456789") != std::string::npos) {
      throw DataError(where + ": '" + f + "' is not a non-negative integer");
    }
    out.push_back(std::stoull(f));
  }
  return out;
}

template <class Fn>
void for_each_data_line(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    fn(line, path + ":" + std::to_string(n));
  }
}

}  // namespace dataset_detail

inline std::vector<BoundingBox> read_boxes(const std::string& path) {
  std::vector<BoundingBox> out;
  dataset_detail::for_each_data_line(path, [&](const std::string& line, const std::string& where) {
    const auto v = dataset_detail::parse_uints(line, 4, where);
    out.push_back({v[0], v[1], v[2], v[3]});
  });
  return out;
}

inline std::vector<Pixel> read_fixations(const std::string& path) {
  std::vector<Pixel> out;
  dataset_detail::for_each_data_line(path, [&](const std::string& line, const std::string& where) {
    const auto v = dataset_detail::parse_uints(line, 2, where);
    out.push_back({v[0], v[1]});
  });
  if (out.empty()) throw DataError("fixation file '" + path + "' is empty");
  return out;
}

inline void write_boxes(const std::string& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const auto& b : boxes) out << b.top << ',' << b.left << ',' << b.height << ',' << b.width << '\n';
}

inline void write_fixations(const std::string& path, const std::vector<Pixel>& fixations) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (const auto& p : fixations) out << p.row << ',' << p.col << '\n';
}

// Parses the manifest and checks that every referenced file exists; all
// missing files are reported together.
inline DatasetManifest load_manifest(const std::string& path) {
  namespace fs = std::filesystem;
  DatasetManifest m{path, {}};
  const fs::path dir = fs::path(path).parent_path();
  auto resolve = [&dir](const std::string& p) { return fs::path(p).is_absolute() ? p : (dir / p).string(); };

  std::vector<std::string> missing;
  dataset_detail::for_each_data_line(path, [&](const std::string& line, const std::string& where) {
    const auto f = dataset_detail::split_csv(line);
    if (f.size() < 2 || f.size() > 4 || f[0].empty()) {
      throw DataError(where + ": expected image,label[,bbox_file[,fixation_file]]");
    }
    ManifestEntry e;
    e.image = resolve(f[0]);
    e.label = dataset_detail::parse_uints(f[1], 1, where)[0];
    if (f.size() > 2 && !f[2].empty()) e.boxes = resolve(f[2]);
    if (f.size() > 3 && !f[3].empty()) e.fixations = resolve(f[3]);
    for (const auto* p : {&e.image, e.boxes ? &*e.boxes : nullptr, e.fixations ? &*e.fixations : nullptr}) {
      if (p && !fs::exists(*p)) missing.push_back(*p);
    }
    m.entries.push_back(std::move(e));
  });
  if (!missing.empty()) {
    std::string msg = "manifest '" + path + "' references " + std::to_string(missing.size()) + " missing file(s):";
    for (const auto& p : missing) msg += "\n  " + p;
    throw DataError(msg);
  }
  if (m.entries.empty()) throw DataError("manifest '" + path + "' has no entries");
  return m;
}

// Stand-in gaze data: `count` pixels drawn around the blob centre.
inline std::vector<Pixel> synthetic_gaze(const Sample& s, std::size_t size, std::mt19937_64& rng, std::size_t count) {
  std::normal_distribution<double> jitter(0.0, s.blob_sigma);
  std::vector<Pixel> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = std::clamp(std::round(s.blob_center.row + jitter(rng)), 0.0, double(size) - 1.0);
    const double c = std::clamp(std::round(s.blob_center.col + jitter(rng)), 0.0, double(size) - 1.0);
    out.push_back({static_cast<std::size_t>(r), static_cast<std::size_t>(c)});
  }
  return out;
}

// Writes images (8-bit graymaps), box and fixation files and `manifest.csv`
// into `dir`; returns the manifest path.
inline std::string export_dataset(const SyntheticDataset& ds, const std::string& dir, std::size_t gaze_points = 8) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto rng = make_engine(ds.seed, stream::gaze);
  const std::string manifest = (fs::path(dir) / "manifest.csv").string();
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw DataError("cannot open '" + manifest + "' for writing");
  out << "# image,label,bbox_file,fixation_file\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "img_%05zu", i);
    const std::string base = stem;
    save_image((fs::path(dir) / (base + ".pgm")).string(), s.image,
               "synthetic seed=" + std::to_string(ds.seed) + " index=" + std::to_string(i));
    write_boxes((fs::path(dir) / (base + ".box")).string(), {s.box});
    write_fixations((fs::path(dir) / (base + ".fix")).string(), synthetic_gaze(s, ds.image_size, rng, gaze_points));
    out << base << ".pgm," << s.label << ',' << base << ".box," << base << ".fix\n";
  }
  return manifest;
}

}  // namespace fovex
