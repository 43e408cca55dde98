#pragma once

#include "foca/heads.hpp"
#include "foca/image_io.hpp"
#include "foca/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace foca::datagen {

enum class Manipulation : std::uint8_t { none = 0, copy_move = 1, splicing = 2 };

std::string to_string(Manipulation m);
Manipulation manipulation_from_string(const std::string& s);

struct Sample {
    std::string id;
    Tensor image; // [H,W,3] in [0,1]
    heads::Verdict label = heads::Verdict::authentic;
    Mask mask;
    Manipulation manipulation = Manipulation::none;
    heads::Explanation explanation;
    std::uint64_t seed = 0;
};

struct DatasetConfig {
    std::size_t image_size = 64;
    std::size_t train_count = 200;
    std::size_t eval_count = 50;
    double frac_authentic = 0.5;
    double frac_copy_move = 0.25; // of the whole set; splicing takes the rest
    double blend_sigma = 1.0;
    double mask_min_frac = 0.02;
    double mask_max_frac = 0.40;
    std::uint64_t seed = 42;

    void validate() const;
};

struct ManifestRecord {
    std::string id;
    std::string image_path;
    std::string mask_path;
    heads::Verdict label = heads::Verdict::authentic;
    Manipulation manipulation = Manipulation::none;
    std::string explanation_text;
    std::uint64_t seed = 0;
};

struct SplitCounts {
    std::size_t total = 0, authentic = 0, copy_move = 0, splicing = 0;
};

struct DatasetManifest {
    int version = 1;
    std::uint64_t config_hash = 0;
    std::size_t image_size = 0;
    SplitCounts train, eval;
    std::vector<ManifestRecord> records;
    std::string root_dir; // directory the relative paths resolve against
};

// Class counts for one split: authentic gets round-half-up, the tampered
// remainder splits ceil/floor into copy-move/splicing.
SplitCounts split_counts(std::size_t total, double frac_authentic, double frac_copy_move);

// Procedural authentic image: gradient base, band-limited value noise,
// a few geometric shapes. Deterministic in (seed, H, W).
Sample gen_authentic(std::uint64_t seed, std::size_t height, std::size_t width);

// Copies a rectangular or elliptical region to a non-overlapping spot.
Sample apply_copy_move(const Sample& src, std::uint64_t seed, double mask_min_frac = 0.02,
                       double mask_max_frac = 0.40);

// Pastes a donor region with a Gaussian-feathered alpha of width blend_sigma.
Sample apply_splice(const Sample& src, const Sample& donor, std::uint64_t seed,
                    double blend_sigma, double mask_min_frac = 0.02,
                    double mask_max_frac = 0.40);

// Regenerates a full sample from its record seed and kind.
Sample generate_sample(const DatasetConfig& cfg, const std::string& split, Manipulation kind,
                       std::size_t index);

DatasetManifest build_dataset(const DatasetConfig& cfg, const std::string& out_dir);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// Loads the image/mask for one manifest record.
Sample load_record(const DatasetManifest& manifest, const ManifestRecord& record);

// Records of one split ("train" or "eval"), identified by id prefix.
std::vector<const ManifestRecord*> split_records(const DatasetManifest& manifest,
                                                 const std::string& split);

std::uint64_t manifest_hash(const std::string& path);

} // namespace foca::datagen
