#include "foca/image_io.hpp"

#include "foca/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace foca::image_io {

namespace {

std::uint8_t quantize(double v) {
    const double s = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(s);
}

// Minimal PNM header reader that tracks the byte offset for error reports.
class PnmReader {
public:
    explicit PnmReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FilesystemError("cannot open image file: " + path);
    }

    [[noreturn]] void fail(const std::string& what) {
        throw DataError("malformed image " + path_ + " at byte offset " + std::to_string(offset_) +
                        ": " + what);
    }

    int get() {
        int c = in_.get();
        if (c != EOF) ++offset_;
        return c;
    }

    void skip_space_and_comments() {
        while (true) {
            int c = in_.peek();
            if (c == '#') {
                while (c != EOF && c != '\n') c = get();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
            } else {
                return;
            }
        }
    }

    std::size_t read_uint(const char* what) {
        skip_space_and_comments();
        int c = in_.peek();
        if (c == EOF || c < '0' || c > '9') fail(std::string("expected ") + what);
        std::size_t v = 0;
        while (c >= '0' && c <= '9') {
            get();
            v = v * 10 + static_cast<std::size_t>(c - '0');
            if (v > 1000000) fail(std::string(what) + " out of range");
            c = in_.peek();
        }
        return v;
    }

    void expect_magic(const char* magic) {
        char m0 = static_cast<char>(get());
        char m1 = static_cast<char>(get());
        if (m0 != magic[0] || m1 != magic[1])
            fail(std::string("expected magic ") + magic);
    }

    void read_raster(std::vector<std::uint8_t>& out) {
        // exactly one whitespace byte separates the header from the raster
        int c = get();
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') fail("expected whitespace before raster");
        in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
        const std::size_t got = static_cast<std::size_t>(in_.gcount());
        offset_ += got;
        if (got != out.size())
            fail("raster truncated, expected " + std::to_string(out.size()) + " bytes");
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

} // namespace

void write_ppm(const std::string& path, const Tensor& img) {
    if (img.ndim() != 3 || img.dim(2) != 3)
        throw DimensionError("write_ppm: expected [H,W,3] image, got " + img.shape_str());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write image file: " + path);
    out << "P6\n" << img.dim(1) << " " << img.dim(0) << "\n255\n";
    std::vector<std::uint8_t> bytes(img.numel());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize(img.values()[i]);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FilesystemError("short write on image file: " + path);
}

Tensor read_ppm(const std::string& path) {
    PnmReader r(path);
    r.expect_magic("P6");
    const std::size_t w = r.read_uint("width");
    const std::size_t h = r.read_uint("height");
    const std::size_t maxval = r.read_uint("maxval");
    if (maxval != 255) r.fail("maxval must be 255");
    if (h == 0 || w == 0) r.fail("zero image dimension");
    std::vector<std::uint8_t> bytes(h * w * 3);
    r.read_raster(bytes);
    std::vector<double> values(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) values[i] = static_cast<double>(bytes[i]) / 255.0;
    return Tensor::from_data({h, w, 3}, std::move(values));
}

void write_mask_pgm(const std::string& path, const Mask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write mask file: " + path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> bytes(mask.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FilesystemError("short write on mask file: " + path);
}

Mask read_mask_pgm(const std::string& path) {
    PnmReader r(path);
    r.expect_magic("P5");
    Mask mask;
    mask.width = r.read_uint("width");
    mask.height = r.read_uint("height");
    const std::size_t maxval = r.read_uint("maxval");
    if (maxval != 255) r.fail("maxval must be 255");
    std::vector<std::uint8_t> bytes(mask.width * mask.height);
    r.read_raster(bytes);
    mask.data.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (bytes[i] != 0 && bytes[i] != 255) r.fail("mask values must be 0 or 255");
        mask.data[i] = bytes[i] ? 1 : 0;
    }
    return mask;
}

namespace {

std::pair<double, double> affine_to_bytes(const std::vector<double>& v,
                                          std::vector<std::uint8_t>& bytes) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double span = hi - lo;
    const double scale = span > 0.0 ? 255.0 / span : 0.0;
    bytes.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(std::round((v[i] - lo) * scale));
    return {scale, lo};
}

} // namespace

std::pair<double, double> write_gray_pgm(const std::string& path, const Tensor& field) {
    if (field.ndim() != 2)
        throw DimensionError("write_gray_pgm: expected [H,W] field, got " + field.shape_str());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write graymap file: " + path);
    std::vector<std::uint8_t> bytes;
    auto affine = affine_to_bytes(field.values(), bytes);
    out << "P5\n" << field.dim(1) << " " << field.dim(0) << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FilesystemError("short write on graymap file: " + path);
    return affine;
}

std::pair<double, double> write_band_ppm(const std::string& path, const Tensor& band) {
    if (band.ndim() != 3 || band.dim(2) != 3)
        throw DimensionError("write_band_ppm: expected [H,W,3] band, got " + band.shape_str());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write band file: " + path);
    std::vector<std::uint8_t> bytes;
    auto affine = affine_to_bytes(band.values(), bytes);
    out << "P6\n" << band.dim(1) << " " << band.dim(0) << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FilesystemError("short write on band file: " + path);
    return affine;
}

} // namespace foca::image_io
