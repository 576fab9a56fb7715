#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "lasi/errors.hpp"

namespace lasi {

// Planar image, values normalized to [0,1], raster-scan order
// (row-major over (row, col), channel-fastest within a pixel site).
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * width + c) * channels + ch;
  }
  double at(int r, int c, int ch) const { return data[index(r, c, ch)]; }
  double& at(int r, int c, int ch) { return data[index(r, c, ch)]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // Copy of one channel plane, H*W row-major.
  std::vector<double> plane(int ch) const;
};

// Reads a binary PGM (P5) or PPM (P6) file with maxval 255.
// Values are mapped to v/255. Malformed input raises IoError with the
// byte offset where parsing failed.
ImageTensor load_image(const std::string& path);

// Writes PGM for 1-channel, PPM for 3-channel images. Values are quantized
// with round-half-up to the k/255 grid.
void save_image(const ImageTensor& img, const std::string& path);

// In-memory variants used by the file functions and the tests.
ImageTensor decode_netpbm(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_netpbm(const ImageTensor& img);

struct TwoAfcExample {
  std::string reference;
  std::string alt0;
  std::string alt1;
  double p = 0.0;  // fraction of subjects preferring alt1
};

struct JndExample {
  std::string img_a;
  std::string img_b;
  double p = 0.0;  // fraction judging the pair identical
};

enum class ManifestKind { TwoAfc, Jnd };

struct DatasetManifest {
  ManifestKind kind = ManifestKind::TwoAfc;
  std::vector<TwoAfcExample> two_afc;
  std::vector<JndExample> jnd;
  std::string root;  // directory the record paths are relative to

  std::size_t record_count() const {
    return kind == ManifestKind::TwoAfc ? two_afc.size() : jnd.size();
  }
  std::string resolve(const std::string& rel) const;
};

// Parses a CSV manifest. Header `ref,alt0,alt1,p` selects 2-AFC,
// `a,b,p` selects JND. Every referenced image is checked to exist, parse,
// and match dimensions within its record.
DatasetManifest load_manifest(const std::string& path);

}  // namespace lasi
