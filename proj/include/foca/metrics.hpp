#pragma once

#include "foca/datagen.hpp"
#include "foca/heads.hpp"
#include "foca/image_io.hpp"
#include "foca/model.hpp"

#include <string>
#include <vector>

namespace foca::metrics {

struct MaskScores {
    double iou = 0.0;
    double f1 = 0.0;
};

// Per-class accuracy is that class's recall; overall F1 is the macro mean
// of the two per-class F1 scores. Zero denominators score 0.
struct DetectionScores {
    double acc_real = 0.0, f1_real = 0.0;
    double acc_tampered = 0.0, f1_tampered = 0.0;
    double acc_overall = 0.0, f1_overall = 0.0;
};

DetectionScores detection_scores(const std::vector<heads::Verdict>& preds,
                                 const std::vector<heads::Verdict>& truth);

// IoU and pixel F1; two empty masks score 1 on both.
MaskScores mask_scores(const Mask& predicted, const Mask& truth);

// Sentence-level LCS F-measure; lowercase whitespace tokens.
double rouge_l(const std::string& candidate, const std::string& reference);

// Cosine similarity of lowercase bag-of-words count vectors.
double css(const std::string& candidate, const std::string& reference);

struct SampleScore {
    std::string id;
    heads::Verdict truth = heads::Verdict::authentic;
    heads::Verdict pred = heads::Verdict::authentic;
    double iou = 0.0, f1 = 0.0;
    double rouge_l = 0.0, css = 0.0;
};

struct EvalReport {
    DetectionScores detection;
    double mean_iou = 0.0, mean_f1 = 0.0;
    double mean_rouge_l = 0.0, mean_css = 0.0;
    std::vector<SampleScore> rows;
};

// Runs the full pipeline over one manifest split. When heatmap_dir is
// non-empty, writes a probability graymap per sample next to the report.
EvalReport evaluate(const datagen::DatasetManifest& manifest, const model::ModelParams& params,
                    const std::string& split, const std::string& heatmap_dir = "");

std::string format_summary(const EvalReport& report);
void write_report(const EvalReport& report, const std::string& dir);

} // namespace foca::metrics
