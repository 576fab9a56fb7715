#include "lasi/image.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lasi {

namespace {

class ByteCursor {
 public:
  explicit ByteCursor(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool eof() const { return pos_ >= bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(what + " at byte offset " + std::to_string(pos_));
  }

  // Skips whitespace and '#' comment lines between header tokens.
  void skip_separators() {
    while (!eof()) {
      unsigned char c = bytes_[pos_];
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (!eof() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token() {
    skip_separators();
    if (eof()) fail("unexpected end of header");
    std::size_t start = pos_;
    while (!eof() && !std::isspace(bytes_[pos_])) ++pos_;
    return std::string(bytes_.begin() + start, bytes_.begin() + pos_);
  }

  int positive_int(const char* name) {
    std::size_t tok_at = pos_;
    std::string t = token();
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        pos_ = tok_at;
        fail(std::string("malformed ") + name + " '" + t + "'");
      }
    }
    long v = 0;
    try {
      v = std::stol(t);
    } catch (const std::exception&) {
      v = 0;
    }
    if (v <= 0) {
      pos_ = tok_at;
      fail(std::string("non-positive ") + name + " '" + t + "'");
    }
    return static_cast<int>(v);
  }

  // Consumes the single whitespace byte separating the header from payload.
  void single_separator() {
    if (eof() || !std::isspace(bytes_[pos_])) fail("missing separator before payload");
    ++pos_;
  }

  const unsigned char* payload(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated payload");
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

std::vector<double> ImageTensor::plane(int ch) const {
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out[static_cast<std::size_t>(r) * width + c] = at(r, c, ch);
  return out;
}

ImageTensor decode_netpbm(const std::vector<unsigned char>& bytes) {
  ByteCursor cur(bytes);
  std::string magic = cur.token();
  int channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError("unsupported magic '" + magic + "' at byte offset 0");
  }
  int width = cur.positive_int("width");
  int height = cur.positive_int("height");
  std::size_t maxval_at = cur.offset();
  int maxval = cur.positive_int("maxval");
  if (maxval != 255) {
    throw IoError("unsupported maxval " + std::to_string(maxval) + " at byte offset " +
                  std::to_string(maxval_at));
  }
  cur.single_separator();
  std::size_t count = static_cast<std::size_t>(height) * width * channels;
  const unsigned char* p = cur.payload(count);

  ImageTensor img(height, width, channels);
  for (std::size_t i = 0; i < count; ++i) img.data[i] = p[i] / 255.0;
  return img;
}

std::vector<unsigned char> encode_netpbm(const ImageTensor& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ValidationError("netpbm supports 1 or 3 channels, got " + std::to_string(img.channels));
  if (img.height <= 0 || img.width <= 0) throw ValidationError("empty image");
  if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
    throw ValidationError("data length does not match dimensions");

  std::string header = (img.channels == 1 ? "P5\n" : "P6\n");
  header += std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + img.data.size());
  for (double v : img.data) {
    if (v < 0.0 || v > 1.0 || !std::isfinite(v))
      throw ValidationError("pixel value out of [0,1]");
    out.push_back(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)));
  }
  return out;
}

ImageTensor load_image(const std::string& path) {
  try {
    return decode_netpbm(read_file(path));
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " in '" + path + "'");
  }
}

void save_image(const ImageTensor& img, const std::string& path) {
  std::vector<unsigned char> bytes = encode_netpbm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string DatasetManifest::resolve(const std::string& rel) const {
  std::filesystem::path p(rel);
  if (p.is_absolute() || root.empty()) return rel;
  return (std::filesystem::path(root) / p).string();
}

namespace {

double parse_p(const std::string& cell, std::size_t row) {
  double p;
  try {
    std::size_t used = 0;
    p = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
  } catch (const std::exception&) {
    throw ValidationError("manifest row " + std::to_string(row) + ": malformed p '" + cell + "'");
  }
  if (p < 0.0 || p > 1.0)
    throw ValidationError("manifest row " + std::to_string(row) + ": p=" + cell +
                          " outside [0,1]");
  return p;
}

ImageTensor check_image(const DatasetManifest& m, const std::string& rel, std::size_t row) {
  try {
    return load_image(m.resolve(rel));
  } catch (const IoError& e) {
    throw IoError("manifest row " + std::to_string(row) + ": " + e.what());
  }
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");

  DatasetManifest m;
  m.root = std::filesystem::path(path).parent_path().string();

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manifest '" + path + "' is empty");
  std::vector<std::string> header = split_csv(line);
  if (header == std::vector<std::string>{"ref", "alt0", "alt1", "p"}) {
    m.kind = ManifestKind::TwoAfc;
  } else if (header == std::vector<std::string>{"a", "b", "p"}) {
    m.kind = ManifestKind::Jnd;
  } else {
    throw ValidationError("manifest '" + path + "': unrecognized header '" + trim(line) + "'");
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv(line);
    std::size_t want = m.kind == ManifestKind::TwoAfc ? 4 : 3;
    if (cells.size() != want)
      throw ValidationError("manifest row " + std::to_string(row) + ": expected " +
                            std::to_string(want) + " columns, got " +
                            std::to_string(cells.size()));
    if (m.kind == ManifestKind::TwoAfc) {
      TwoAfcExample ex{cells[0], cells[1], cells[2], parse_p(cells[3], row)};
      ImageTensor ref = check_image(m, ex.reference, row);
      ImageTensor a0 = check_image(m, ex.alt0, row);
      ImageTensor a1 = check_image(m, ex.alt1, row);
      if (!ref.same_shape(a0) || !ref.same_shape(a1))
        throw ValidationError("manifest row " + std::to_string(row) +
                              ": images have mismatched dimensions");
      m.two_afc.push_back(std::move(ex));
    } else {
      JndExample ex{cells[0], cells[1], parse_p(cells[2], row)};
      ImageTensor a = check_image(m, ex.img_a, row);
      ImageTensor b = check_image(m, ex.img_b, row);
      if (!a.same_shape(b))
        throw ValidationError("manifest row " + std::to_string(row) +
                              ": images have mismatched dimensions");
      m.jnd.push_back(std::move(ex));
    }
  }
  return m;
}

}  // namespace lasi
