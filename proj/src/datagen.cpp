#include "foca/datagen.hpp"

#include "foca/error.hpp"
#include "foca/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace foca::datagen {

std::string to_string(Manipulation m) {
    switch (m) {
        case Manipulation::none: return "none";
        case Manipulation::copy_move: return "copy-move";
        case Manipulation::splicing: return "splicing";
    }
    return "none";
}

Manipulation manipulation_from_string(const std::string& s) {
    if (s == "none") return Manipulation::none;
    if (s == "copy-move") return Manipulation::copy_move;
    if (s == "splicing") return Manipulation::splicing;
    throw DataError("unknown manipulation kind: " + s);
}

void DatasetConfig::validate() const {
    if (image_size < 32 || image_size % 8 != 0)
        throw ParameterError("dataset: image_size must be >= 32 and divisible by 8");
    if (train_count == 0 || eval_count == 0)
        throw ParameterError("dataset: split counts must be >= 1");
    if (frac_authentic < 0.0 || frac_authentic > 1.0 || frac_copy_move < 0.0 ||
        frac_authentic + frac_copy_move > 1.0)
        throw ParameterError("dataset: class fractions out of range");
    if (blend_sigma < 0.0) throw ParameterError("dataset: blend_sigma must be >= 0");
    if (!(mask_min_frac > 0.0) || !(mask_max_frac < 1.0) || mask_min_frac >= mask_max_frac)
        throw ParameterError("dataset: mask area bounds out of range");
}

SplitCounts split_counts(std::size_t total, double frac_authentic, double frac_copy_move) {
    SplitCounts c;
    c.total = total;
    c.authentic = static_cast<std::size_t>(
        std::floor(static_cast<double>(total) * frac_authentic + 0.5));
    c.authentic = std::min(c.authentic, total);
    const std::size_t tampered = total - c.authentic;
    const double denom = 1.0 - frac_authentic;
    const double cm_share = denom > 0.0 ? frac_copy_move / denom : 0.0;
    // Odd tampered counts round the extra sample into the copy-move class.
    c.copy_move = static_cast<std::size_t>(
        std::ceil(static_cast<double>(tampered) * cm_share - 1e-12));
    c.copy_move = std::min(c.copy_move, tampered);
    c.splicing = tampered - c.copy_move;
    return c;
}

namespace {

struct Region {
    bool ellipse = false;
    std::ptrdiff_t x0 = 0, y0 = 0; // top-left of bounding box
    std::size_t w = 0, h = 0;

    bool contains(std::size_t x, std::size_t y) const {
        const double dx = (static_cast<double>(x) - static_cast<double>(x0)) -
                          static_cast<double>(w) / 2.0 + 0.5;
        const double dy = (static_cast<double>(y) - static_cast<double>(y0)) -
                          static_cast<double>(h) / 2.0 + 0.5;
        if (!ellipse) {
            return x >= static_cast<std::size_t>(x0) && x < static_cast<std::size_t>(x0) + w &&
                   y >= static_cast<std::size_t>(y0) && y < static_cast<std::size_t>(y0) + h;
        }
        const double rx = static_cast<double>(w) / 2.0;
        const double ry = static_cast<double>(h) / 2.0;
        return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0;
    }

    // Positive inside, negative outside, roughly in pixels.
    double signed_distance(std::size_t x, std::size_t y) const {
        const double px = static_cast<double>(x) + 0.5;
        const double py = static_cast<double>(y) + 0.5;
        if (!ellipse) {
            const double dx = std::min(px - static_cast<double>(x0),
                                       static_cast<double>(x0) + static_cast<double>(w) - px);
            const double dy = std::min(py - static_cast<double>(y0),
                                       static_cast<double>(y0) + static_cast<double>(h) - py);
            if (dx >= 0.0 && dy >= 0.0) return std::min(dx, dy);
            const double ox = std::min(dx, 0.0);
            const double oy = std::min(dy, 0.0);
            return -std::sqrt(ox * ox + oy * oy);
        }
        const double cx = static_cast<double>(x0) + static_cast<double>(w) / 2.0;
        const double cy = static_cast<double>(y0) + static_cast<double>(h) / 2.0;
        const double rx = static_cast<double>(w) / 2.0;
        const double ry = static_cast<double>(h) / 2.0;
        const double r = std::sqrt(((px - cx) * (px - cx)) / (rx * rx) +
                                   ((py - cy) * (py - cy)) / (ry * ry));
        return (1.0 - r) * std::min(rx, ry);
    }
};

double gauss_cdf(double t) { return 0.5 * std::erfc(-t / 1.4142135623730951); }

// Value noise: random grid values, bilinear interpolation.
std::vector<double> value_noise(Rng& rng, std::size_t h, std::size_t w, std::size_t cell) {
    const std::size_t gy = h / cell + 2, gx = w / cell + 2;
    std::vector<double> grid(gy * gx);
    for (auto& v : grid) v = rng.uniform(-1.0, 1.0);
    std::vector<double> out(h * w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double fy = static_cast<double>(y) / static_cast<double>(cell);
            const double fx = static_cast<double>(x) / static_cast<double>(cell);
            const std::size_t iy = static_cast<std::size_t>(fy), ix = static_cast<std::size_t>(fx);
            const double ty = fy - static_cast<double>(iy), tx = fx - static_cast<double>(ix);
            const double a = grid[iy * gx + ix], b = grid[iy * gx + ix + 1];
            const double c = grid[(iy + 1) * gx + ix], d = grid[(iy + 1) * gx + ix + 1];
            out[y * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
        }
    return out;
}

Region sample_region(Rng& rng, std::size_t h, std::size_t w, double min_frac, double max_frac,
                     std::size_t max_w, std::size_t max_h, double cap_frac) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        const double lo = std::max(min_frac * 1.4, 0.03);
        const double hi = std::max(lo + 0.01, std::min(max_frac * 0.55, cap_frac));
        const double frac = rng.uniform(lo, hi);
        const double aspect = rng.uniform(0.6, 1.7);
        double bw = std::sqrt(frac * static_cast<double>(h * w) * aspect);
        double bh = frac * static_cast<double>(h * w) / bw;
        Region r;
        r.ellipse = rng.next_bool();
        if (r.ellipse) {
            bw *= 1.13; // compensate the ellipse fill factor
            bh *= 1.13;
        }
        r.w = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(bw)), 4, max_w);
        r.h = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(bh)), 4, max_h);
        r.x0 = static_cast<std::ptrdiff_t>(rng.next_below(w - r.w + 1));
        r.y0 = static_cast<std::ptrdiff_t>(rng.next_below(h - r.h + 1));
        // Verify the raster count lands inside the declared bounds.
        std::size_t count = 0;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) count += r.contains(x, y) ? 1 : 0;
        const double area_frac = static_cast<double>(count) / static_cast<double>(h * w);
        if (area_frac >= min_frac && area_frac <= max_frac) return r;
    }
    throw PlacementError("sample_region: could not sample a region within the area bounds");
}

Mask rasterize(const Region& r, std::size_t h, std::size_t w) {
    Mask m;
    m.height = h;
    m.width = w;
    m.data.assign(h * w, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) m.data[y * w + x] = r.contains(x, y) ? 1 : 0;
    return m;
}

} // namespace

Sample gen_authentic(std::uint64_t seed, std::size_t height, std::size_t width) {
    if (height < 32 || width < 32 || height % 2 != 0 || width % 2 != 0)
        throw ParameterError("gen_authentic: dimensions must be even and >= 32");
    Rng rng(seed);
    std::vector<double> img(height * width * 3);

    // Gradient base between two colors with guaranteed contrast.
    double c0[3], c1[3];
    for (int k = 0; k < 3; ++k) c0[k] = rng.uniform(0.0, 1.0);
    for (int tries = 0;; ++tries) {
        double spread = 0.0;
        for (int k = 0; k < 3; ++k) {
            c1[k] = rng.uniform(0.0, 1.0);
            spread = std::max(spread, std::abs(c1[k] - c0[k]));
        }
        if (spread >= 0.6 || tries > 32) break;
    }
    const double angle = rng.uniform(0.0, 6.283185307179586);
    const double dx = std::cos(angle), dy = std::sin(angle);
    const double diag = static_cast<double>(height + width);

    auto noise16 = value_noise(rng, height, width, 16);
    auto noise8 = value_noise(rng, height, width, 8);
    auto noise4 = value_noise(rng, height, width, 4);

    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double t = (static_cast<double>(x) * dx + static_cast<double>(y) * dy) / diag + 0.5;
            t = std::clamp(t, 0.0, 1.0);
            const double n = 0.16 * noise16[y * width + x] + 0.10 * noise8[y * width + x] +
                             0.05 * noise4[y * width + x];
            for (int k = 0; k < 3; ++k)
                img[(y * width + x) * 3 + k] = c0[k] * (1 - t) + c1[k] * t + n;
        }

    // A few soft-edged shapes. Authentic edges are feathered wider than any
    // manipulation boundary, so high-frequency spikes stay a tamper signature.
    const int shapes = static_cast<int>(rng.uniform_int(2, 5));
    for (int s = 0; s < shapes; ++s) {
        Region r;
        r.ellipse = rng.next_bool();
        r.w = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(width) / 8,
                                                       static_cast<std::int64_t>(width) / 3));
        r.h = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(height) / 8,
                                                       static_cast<std::int64_t>(height) / 3));
        r.x0 = static_cast<std::ptrdiff_t>(rng.next_below(width - r.w + 1));
        r.y0 = static_cast<std::ptrdiff_t>(rng.next_below(height - r.h + 1));
        double col[3];
        for (int k = 0; k < 3; ++k) col[k] = rng.uniform(0.0, 1.0);
        const double alpha = rng.uniform(0.65, 1.0);
        const double feather = rng.uniform(1.2, 2.5);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const double d = r.signed_distance(x, y);
                if (d <= -3.0 * feather) continue;
                const double edge = d >= 3.0 * feather ? 1.0 : gauss_cdf(d / feather);
                const double a = alpha * edge;
                if (a == 0.0) continue;
                for (int k = 0; k < 3; ++k) {
                    double& px = img[(y * width + x) * 3 + k];
                    px = px * (1 - a) + col[k] * a;
                }
            }
    }

    for (auto& v : img) v = std::clamp(v, 0.0, 1.0);

    Sample out;
    out.image = Tensor::from_data({height, width, 3}, std::move(img));
    out.label = heads::Verdict::authentic;
    out.mask.height = height;
    out.mask.width = width;
    out.mask.data.assign(height * width, 0);
    out.manipulation = Manipulation::none;
    out.explanation = heads::make_explanation(heads::Verdict::authentic, heads::RegionSlot::none,
                                              heads::CueSlot::none);
    out.seed = seed;
    return out;
}

Sample apply_copy_move(const Sample& src, std::uint64_t seed, double mask_min_frac,
                       double mask_max_frac) {
    if (src.label != heads::Verdict::authentic)
        throw ParameterError("apply_copy_move: source sample must be authentic");
    const std::size_t h = src.image.dim(0), w = src.image.dim(1);
    Rng rng(derive_seed(seed, "copy_move"));
    // A box no wider than a third of each side always leaves room for a
    // disjoint twin along at least one axis.
    Region source = sample_region(rng, h, w, mask_min_frac, mask_max_frac, w / 3, h / 3, 0.10);

    // Destination: same size, non-overlapping bounding boxes. Pick a
    // separating axis with free space, then place uniformly inside it.
    Region dest = source;
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        const bool split_x = rng.next_bool();
        auto place_axis = [&](std::ptrdiff_t src0, std::size_t extent,
                              std::size_t limit) -> std::optional<std::ptrdiff_t> {
            const bool left_ok = src0 >= static_cast<std::ptrdiff_t>(extent);
            const bool right_ok =
                src0 + 2 * static_cast<std::ptrdiff_t>(extent) <= static_cast<std::ptrdiff_t>(limit);
            if (!left_ok && !right_ok) return std::nullopt;
            bool go_left = left_ok && (!right_ok || rng.next_bool());
            if (go_left)
                return static_cast<std::ptrdiff_t>(
                    rng.next_below(static_cast<std::uint64_t>(src0 - extent) + 1));
            return src0 + static_cast<std::ptrdiff_t>(extent) +
                   static_cast<std::ptrdiff_t>(rng.next_below(
                       static_cast<std::uint64_t>(static_cast<std::ptrdiff_t>(limit - extent) -
                                                  (src0 + static_cast<std::ptrdiff_t>(extent))) +
                       1));
        };
        if (split_x) {
            auto x0 = place_axis(source.x0, dest.w, w);
            if (!x0) continue;
            dest.x0 = *x0;
            dest.y0 = static_cast<std::ptrdiff_t>(rng.next_below(h - dest.h + 1));
        } else {
            auto y0 = place_axis(source.y0, dest.h, h);
            if (!y0) continue;
            dest.y0 = *y0;
            dest.x0 = static_cast<std::ptrdiff_t>(rng.next_below(w - dest.w + 1));
        }
        placed = true;
    }
    if (!placed)
        throw PlacementError("apply_copy_move: no non-overlapping destination after 100 tries");

    Sample out = src;
    out.image = Tensor::from_data(src.image.shape(), src.image.values());
    auto& img = out.image.values();
    Mask mask = rasterize(dest, h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            if (!mask.at(y, x)) continue;
            const std::size_t sx = static_cast<std::size_t>(
                static_cast<std::ptrdiff_t>(x) - dest.x0 + source.x0);
            const std::size_t sy = static_cast<std::size_t>(
                static_cast<std::ptrdiff_t>(y) - dest.y0 + source.y0);
            for (int k = 0; k < 3; ++k)
                img[(y * w + x) * 3 + k] = src.image.values()[(sy * w + sx) * 3 + k];
        }

    out.mask = mask;
    out.label = heads::Verdict::tampered;
    out.manipulation = Manipulation::copy_move;
    out.explanation = heads::make_explanation(heads::Verdict::tampered,
                                              heads::region_from_mask(mask),
                                              heads::CueSlot::texture_mismatch);
    out.seed = seed;
    return out;
}

Sample apply_splice(const Sample& src, const Sample& donor, std::uint64_t seed, double blend_sigma,
                    double mask_min_frac, double mask_max_frac) {
    if (src.label != heads::Verdict::authentic || donor.label != heads::Verdict::authentic)
        throw ParameterError("apply_splice: both inputs must be authentic");
    if (src.image.shape() != donor.image.shape())
        throw DimensionError("apply_splice: source " + src.image.shape_str() +
                             " and donor " + donor.image.shape_str() + " disagree");
    const std::size_t h = src.image.dim(0), w = src.image.dim(1);
    Rng rng(derive_seed(seed, "splice"));
    Region region = sample_region(rng, h, w, mask_min_frac, mask_max_frac, w / 2, h / 2, 0.22);

    Sample out = src;
    out.image = Tensor::from_data(src.image.shape(), src.image.values());
    auto& img = out.image.values();
    Mask mask;
    mask.height = h;
    mask.width = w;
    mask.data.assign(h * w, 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const double d = region.signed_distance(x, y);
            double alpha;
            if (blend_sigma == 0.0) {
                alpha = region.contains(x, y) ? 1.0 : 0.0;
            } else if (d <= -3.0 * blend_sigma) {
                alpha = 0.0;
            } else if (d >= 3.0 * blend_sigma) {
                alpha = 1.0;
            } else {
                alpha = gauss_cdf(d / blend_sigma);
            }
            // Mask from the region raster itself: alpha > 0.5 coincides with
            // containment for the CDF profile and for the hard paste.
            mask.data[y * w + x] = region.contains(x, y) ? 1 : 0;
            if (alpha == 0.0) continue;
            for (int k = 0; k < 3; ++k) {
                double& px = img[(y * w + x) * 3 + k];
                px = px * (1 - alpha) + donor.image.values()[(y * w + x) * 3 + k] * alpha;
            }
        }

    out.mask = mask;
    out.label = heads::Verdict::tampered;
    out.manipulation = Manipulation::splicing;
    out.explanation = heads::make_explanation(heads::Verdict::tampered,
                                              heads::region_from_mask(mask),
                                              heads::CueSlot::boundary_discontinuity);
    out.seed = seed;
    return out;
}

Sample generate_sample(const DatasetConfig& cfg, const std::string& split, Manipulation kind,
                       std::size_t index) {
    const std::uint64_t base = derive_seed(cfg.seed, split, index);
    const std::uint64_t kind_seed = derive_seed(base, to_string(kind));
    Sample authentic = gen_authentic(derive_seed(kind_seed, "authentic"), cfg.image_size,
                                     cfg.image_size);
    Sample out;
    switch (kind) {
        case Manipulation::none:
            out = std::move(authentic);
            break;
        case Manipulation::copy_move:
            out = apply_copy_move(authentic, kind_seed, cfg.mask_min_frac, cfg.mask_max_frac);
            break;
        case Manipulation::splicing: {
            Sample donor = gen_authentic(derive_seed(kind_seed, "donor"), cfg.image_size,
                                         cfg.image_size);
            out = apply_splice(authentic, donor, kind_seed, cfg.blend_sigma, cfg.mask_min_frac,
                               cfg.mask_max_frac);
            break;
        }
    }
    std::ostringstream id;
    id << split << "_" << std::setw(6) << std::setfill('0') << index << "_"
       << (kind == Manipulation::none ? "auth" : kind == Manipulation::copy_move ? "cm" : "sp");
    out.id = id.str();
    out.seed = kind_seed;
    return out;
}

namespace {

std::vector<std::pair<std::string, Manipulation>> split_plan(const DatasetConfig& cfg,
                                                             const std::string& split,
                                                             std::size_t total) {
    const SplitCounts c = split_counts(total, cfg.frac_authentic, cfg.frac_copy_move);
    std::vector<std::pair<std::string, Manipulation>> plan;
    plan.reserve(total);
    for (std::size_t i = 0; i < c.authentic; ++i) plan.emplace_back(split, Manipulation::none);
    for (std::size_t i = 0; i < c.copy_move; ++i) plan.emplace_back(split, Manipulation::copy_move);
    for (std::size_t i = 0; i < c.splicing; ++i) plan.emplace_back(split, Manipulation::splicing);
    return plan;
}

std::uint64_t config_hash(const DatasetConfig& cfg) {
    std::ostringstream os;
    os << "image_size=" << cfg.image_size << ";train_count=" << cfg.train_count
       << ";eval_count=" << cfg.eval_count << ";frac_authentic=" << cfg.frac_authentic
       << ";frac_copy_move=" << cfg.frac_copy_move << ";blend_sigma=" << cfg.blend_sigma
       << ";mask_min_frac=" << cfg.mask_min_frac << ";mask_max_frac=" << cfg.mask_max_frac
       << ";seed=" << cfg.seed;
    return hash_str(os.str());
}

} // namespace

DatasetManifest build_dataset(const DatasetConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "images", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    fs::create_directories(fs::path(out_dir) / "explanations", ec);
    if (ec) throw FilesystemError("cannot create dataset directories under: " + out_dir);

    DatasetManifest manifest;
    manifest.version = 1;
    manifest.config_hash = config_hash(cfg);
    manifest.image_size = cfg.image_size;
    manifest.train = split_counts(cfg.train_count, cfg.frac_authentic, cfg.frac_copy_move);
    manifest.eval = split_counts(cfg.eval_count, cfg.frac_authentic, cfg.frac_copy_move);
    manifest.root_dir = out_dir;

    for (const std::string split : {std::string("train"), std::string("eval")}) {
        const std::size_t total = split == "train" ? cfg.train_count : cfg.eval_count;
        auto plan = split_plan(cfg, split, total);
        for (std::size_t i = 0; i < plan.size(); ++i) {
            Sample s = generate_sample(cfg, split, plan[i].second, i);
            ManifestRecord rec;
            rec.id = s.id;
            rec.image_path = "images/" + s.id + ".ppm";
            rec.mask_path = "masks/" + s.id + ".pgm";
            rec.label = s.label;
            rec.manipulation = s.manipulation;
            rec.explanation_text = s.explanation.rendered;
            rec.seed = s.seed;
            image_io::write_ppm((fs::path(out_dir) / rec.image_path).string(), s.image);
            image_io::write_mask_pgm((fs::path(out_dir) / rec.mask_path).string(), s.mask);
            std::ofstream txt(fs::path(out_dir) / "explanations" / (s.id + ".txt"));
            if (!txt) throw FilesystemError("cannot write explanation file under: " + out_dir);
            txt << s.explanation.rendered << "\n";
            manifest.records.push_back(std::move(rec));
        }
    }

    write_manifest(manifest, (fs::path(out_dir) / "manifest.txt").string());
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write manifest: " + path);
    out << "foca-manifest v" << manifest.version << "\n";
    out << "config_hash " << manifest.config_hash << "\n";
    out << "image_size " << manifest.image_size << "\n";
    auto counts = [&](const char* name, const SplitCounts& c) {
        out << "counts " << name << " total " << c.total << " authentic " << c.authentic
            << " copy-move " << c.copy_move << " splicing " << c.splicing << "\n";
    };
    counts("train", manifest.train);
    counts("eval", manifest.eval);
    // record<TAB>id<TAB>image<TAB>mask<TAB>label<TAB>manipulation<TAB>seed<TAB>explanation
    for (const auto& r : manifest.records) {
        out << "record\t" << r.id << "\t" << r.image_path << "\t" << r.mask_path << "\t"
            << heads::to_string(r.label) << "\t" << to_string(r.manipulation) << "\t" << r.seed
            << "\t" << r.explanation_text << "\n";
    }
    if (!out) throw FilesystemError("short write on manifest: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FilesystemError("cannot open manifest: " + path);
    DatasetManifest m;
    m.root_dir = fs::path(path).parent_path().string();
    std::string line;
    if (!std::getline(in, line) || line.rfind("foca-manifest v", 0) != 0)
        throw DataError("manifest " + path + ": bad header line");
    m.version = std::stoi(line.substr(15));
    if (m.version != 1) throw VersionError("manifest " + path + ": unsupported version");
    auto parse_counts = [](std::istringstream& ss, SplitCounts& c) {
        std::string k;
        ss >> k >> c.total >> k >> c.authentic >> k >> c.copy_move >> k >> c.splicing;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "config_hash") {
            ss >> m.config_hash;
        } else if (kind == "image_size") {
            ss >> m.image_size;
        } else if (kind == "counts") {
            std::string which;
            ss >> which;
            parse_counts(ss, which == "train" ? m.train : m.eval);
        } else if (kind == "record") {
            // tab-separated to keep the explanation text intact
            std::vector<std::string> fields;
            std::size_t start = line.find('\t');
            while (start != std::string::npos) {
                std::size_t end = line.find('\t', start + 1);
                fields.push_back(line.substr(start + 1, end == std::string::npos
                                                            ? std::string::npos
                                                            : end - start - 1));
                start = end;
            }
            if (fields.size() != 7)
                throw DataError("manifest " + path + ": record needs 7 fields, got " +
                                std::to_string(fields.size()));
            ManifestRecord r;
            r.id = fields[0];
            r.image_path = fields[1];
            r.mask_path = fields[2];
            r.label = heads::verdict_from_string(fields[3]);
            r.manipulation = manipulation_from_string(fields[4]);
            r.seed = std::stoull(fields[5]);
            r.explanation_text = fields[6];
            m.records.push_back(std::move(r));
        } else {
            throw DataError("manifest " + path + ": unknown line kind '" + kind + "'");
        }
    }
    const std::size_t expect = m.train.total + m.eval.total;
    if (m.records.size() != expect)
        throw DataError("manifest " + path + ": header counts " + std::to_string(expect) +
                        " do not match " + std::to_string(m.records.size()) + " records");
    return m;
}

Sample load_record(const DatasetManifest& manifest, const ManifestRecord& record) {
    Sample s;
    s.id = record.id;
    s.image = image_io::read_ppm((fs::path(manifest.root_dir) / record.image_path).string());
    s.mask = image_io::read_mask_pgm((fs::path(manifest.root_dir) / record.mask_path).string());
    s.label = record.label;
    s.manipulation = record.manipulation;
    s.seed = record.seed;
    heads::RegionSlot region = heads::region_from_mask(s.mask);
    heads::CueSlot cue = record.manipulation == Manipulation::none ? heads::CueSlot::none
                         : record.manipulation == Manipulation::copy_move
                             ? heads::CueSlot::texture_mismatch
                             : heads::CueSlot::boundary_discontinuity;
    s.explanation = heads::make_explanation(record.label, region, cue);
    if (s.explanation.rendered != record.explanation_text)
        throw DataError("manifest record " + record.id +
                        ": stored explanation does not match the derived slots");
    return s;
}

std::vector<const ManifestRecord*> split_records(const DatasetManifest& manifest,
                                                 const std::string& split) {
    std::vector<const ManifestRecord*> out;
    const std::string prefix = split + "_";
    for (const auto& r : manifest.records)
        if (r.id.rfind(prefix, 0) == 0) out.push_back(&r);
    return out;
}

std::uint64_t manifest_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FilesystemError("cannot open manifest: " + path);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hash_str(all);
}

} // namespace foca::datagen
