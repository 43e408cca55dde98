#include "foca/metrics.hpp"

#include "foca/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace fs = std::filesystem;

namespace foca::metrics {

DetectionScores detection_scores(const std::vector<heads::Verdict>& preds,
                                 const std::vector<heads::Verdict>& truth) {
    if (preds.size() != truth.size() || preds.empty())
        throw DataError("detection_scores: prediction/truth lengths disagree (" +
                        std::to_string(preds.size()) + " vs " + std::to_string(truth.size()) + ")");
    std::size_t correct = 0;
    // Confusion counts with "tampered" as the positive class.
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == heads::Verdict::tampered;
        const bool t = truth[i] == heads::Verdict::tampered;
        correct += p == t ? 1 : 0;
        if (p && t) ++tp;
        else if (p && !t) ++fp;
        else if (!p && t) ++fn;
        else ++tn;
    }
    auto f1_of = [](std::size_t tp_, std::size_t fp_, std::size_t fn_) {
        const double denom = static_cast<double>(2 * tp_ + fp_ + fn_);
        return denom > 0.0 ? 2.0 * static_cast<double>(tp_) / denom : 0.0;
    };
    auto recall_of = [](std::size_t tp_, std::size_t fn_) {
        const std::size_t denom = tp_ + fn_;
        return denom > 0 ? static_cast<double>(tp_) / static_cast<double>(denom) : 0.0;
    };
    DetectionScores s;
    s.acc_tampered = recall_of(tp, fn);
    s.f1_tampered = f1_of(tp, fp, fn);
    // Real as the positive class swaps the roles.
    s.acc_real = recall_of(tn, fp);
    s.f1_real = f1_of(tn, fn, fp);
    s.acc_overall = static_cast<double>(correct) / static_cast<double>(preds.size());
    s.f1_overall = (s.f1_real + s.f1_tampered) / 2.0;
    return s;
}

MaskScores mask_scores(const Mask& predicted, const Mask& truth) {
    if (predicted.height != truth.height || predicted.width != truth.width)
        throw DimensionError("mask_scores: mask shapes disagree, " +
                             std::to_string(predicted.height) + "x" +
                             std::to_string(predicted.width) + " vs " +
                             std::to_string(truth.height) + "x" + std::to_string(truth.width));
    std::size_t inter = 0, p_count = 0, t_count = 0;
    for (std::size_t i = 0; i < predicted.data.size(); ++i) {
        const bool p = predicted.data[i] != 0;
        const bool t = truth.data[i] != 0;
        inter += (p && t) ? 1 : 0;
        p_count += p ? 1 : 0;
        t_count += t ? 1 : 0;
    }
    MaskScores s;
    if (p_count == 0 && t_count == 0) {
        s.iou = 1.0;
        s.f1 = 1.0;
        return s;
    }
    const std::size_t uni = p_count + t_count - inter;
    s.iou = uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
    s.f1 = 2.0 * static_cast<double>(inter) / static_cast<double>(p_count + t_count);
    return s;
}

namespace {

std::vector<std::string> tokenize_lower(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

} // namespace

double rouge_l(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize_lower(candidate);
    const auto ref = tokenize_lower(reference);
    if (cand.empty() && ref.empty()) return 1.0;
    if (cand.empty() || ref.empty()) return 0.0;
    const std::size_t n = cand.size(), m = ref.size();
    std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            if (cand[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[m]);
    if (lcs == 0.0) return 0.0;
    const double p = lcs / static_cast<double>(n);
    const double r = lcs / static_cast<double>(m);
    return 2.0 * p * r / (p + r);
}

double css(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize_lower(candidate);
    const auto ref = tokenize_lower(reference);
    if (cand.empty() && ref.empty()) return 1.0;
    if (cand.empty() || ref.empty()) return 0.0;
    std::map<std::string, std::pair<double, double>> counts;
    for (const auto& t : cand) counts[t].first += 1.0;
    for (const auto& t : ref) counts[t].second += 1.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [tok, c] : counts) {
        dot += c.first * c.second;
        na += c.first * c.first;
        nb += c.second * c.second;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

EvalReport evaluate(const datagen::DatasetManifest& manifest, const model::ModelParams& params,
                    const std::string& split, const std::string& heatmap_dir) {
    auto records = datagen::split_records(manifest, split);
    if (records.empty()) throw DataError("evaluate: no records in split '" + split + "'");
    EvalReport report;
    std::vector<heads::Verdict> preds, truth;
    double sum_iou = 0.0, sum_f1 = 0.0, sum_rouge = 0.0, sum_css = 0.0;
    for (const auto* rec : records) {
        datagen::Sample s = datagen::load_record(manifest, *rec);
        model::Prediction pred = model::predict(s.image, params);
        SampleScore row;
        row.id = s.id;
        row.truth = s.label;
        row.pred = pred.verdict;
        const MaskScores ms = mask_scores(pred.mask, s.mask);
        row.iou = ms.iou;
        row.f1 = ms.f1;
        row.rouge_l = rouge_l(pred.explanation.rendered, s.explanation.rendered);
        row.css = css(pred.explanation.rendered, s.explanation.rendered);
        preds.push_back(row.pred);
        truth.push_back(row.truth);
        sum_iou += row.iou;
        sum_f1 += row.f1;
        sum_rouge += row.rouge_l;
        sum_css += row.css;
        if (!heatmap_dir.empty()) {
            Tensor prob = sigmoid(pred.mask_logits);
            image_io::write_gray_pgm((fs::path(heatmap_dir) / (s.id + "_heatmap.pgm")).string(),
                                     prob);
        }
        report.rows.push_back(std::move(row));
    }
    const double n = static_cast<double>(report.rows.size());
    report.detection = detection_scores(preds, truth);
    report.mean_iou = sum_iou / n;
    report.mean_f1 = sum_f1 / n;
    report.mean_rouge_l = sum_rouge / n;
    report.mean_css = sum_css / n;
    return report;
}

std::string format_summary(const EvalReport& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "detection (acc / F1)\n";
    os << "  real      " << r.detection.acc_real << " / " << r.detection.f1_real << "\n";
    os << "  tampered  " << r.detection.acc_tampered << " / " << r.detection.f1_tampered << "\n";
    os << "  overall   " << r.detection.acc_overall << " / " << r.detection.f1_overall << "\n";
    os << "localization (mean IoU / mean F1)\n";
    os << "  " << r.mean_iou << " / " << r.mean_f1 << "\n";
    os << "explanation (mean ROUGE-L / mean CSS)\n";
    os << "  " << r.mean_rouge_l << " / " << r.mean_css << "\n";
    os << "samples " << r.rows.size() << "\n";
    return os.str();
}

void write_report(const EvalReport& report, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const std::string summary_path = (fs::path(dir) / "summary.txt").string();
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) throw FilesystemError("cannot write report summary: " + summary_path);
    summary << format_summary(report);

    const std::string csv_path = (fs::path(dir) / "report.csv").string();
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw FilesystemError("cannot write report csv: " + csv_path);
    csv << "id,truth,pred,iou,f1,rouge_l,css\n";
    csv << std::setprecision(17);
    for (const auto& row : report.rows) {
        csv << row.id << "," << heads::to_string(row.truth) << "," << heads::to_string(row.pred)
            << "," << row.iou << "," << row.f1 << "," << row.rouge_l << "," << row.css << "\n";
    }
    if (!csv) throw FilesystemError("short write on report csv: " + csv_path);
}

} // namespace foca::metrics
