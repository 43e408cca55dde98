#include "foca/config.hpp"
#include "foca/datagen.hpp"
#include "foca/error.hpp"
#include "foca/image_io.hpp"
#include "foca/metrics.hpp"
#include "foca/model.hpp"
#include "foca/trainer.hpp"
#include "foca/wavelet.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace foca;

namespace {

// Exit codes: 0 ok, 2 config/input, 3 I/O, 4 divergence, 5 version mismatch.
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kDivergence = 4;
constexpr int kVersionMismatch = 5;

void usage() {
    std::cout << "usage: foca <command> [flags]\n"
              << "\n"
              << "commands:\n"
              << "  generate  --out DIR [--config FILE] [--seed N] [--KEY VALUE ...]\n"
              << "  train     --data MANIFEST --out DIR [--config FILE] [--KEY VALUE ...]\n"
              << "  eval      --checkpoint FILE --data MANIFEST --report DIR\n"
              << "  predict   --checkpoint FILE --image FILE.ppm --out DIR\n"
              << "  decompose --image FILE.ppm --out DIR\n"
              << "\n"
              << "Config files are flat `key = value` lines with `#` comments. Any\n"
              << "config key can be overridden as --key value on generate/train.\n";
}

struct Args {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string take(const std::string& key) {
        auto it = values.find(key);
        if (it == values.end()) throw ParameterError("missing required flag --" + key);
        std::string v = it->second;
        values.erase(it);
        return v;
    }
    std::string take_or(const std::string& key, const std::string& fallback) {
        auto it = values.find(key);
        if (it == values.end()) return fallback;
        std::string v = it->second;
        values.erase(it);
        return v;
    }
};

Args parse_flags(int argc, char** argv, int start) {
    Args args;
    for (int i = start; i < argc; ++i) {
        std::string tok = argv[i];
        if (tok.rfind("--", 0) != 0)
            throw ParameterError("expected --flag, got '" + tok + "'");
        tok = tok.substr(2);
        std::string value;
        const std::size_t eq = tok.find('=');
        if (eq != std::string::npos) {
            value = tok.substr(eq + 1);
            tok = tok.substr(0, eq);
        } else {
            if (i + 1 >= argc) throw ParameterError("flag --" + tok + " needs a value");
            value = argv[++i];
        }
        if (args.values.count(tok)) throw ParameterError("duplicate flag --" + tok);
        args.values[tok] = value;
    }
    return args;
}

// Builds the effective config: file, then per-key command-line overrides.
// Leftover flags must all be registry keys; anything else fails closed.
config::Config effective_config(Args& args) {
    config::Config cfg;
    if (args.has("config")) cfg.load_file(args.take("config"));
    std::vector<std::string> keys;
    for (const auto& [k, v] : args.values) keys.push_back(k);
    for (const auto& k : keys) cfg.set(k, args.values[k]); // set() rejects unknown keys
    args.values.clear();
    return cfg;
}

void reject_leftovers(const Args& args) {
    if (!args.values.empty())
        throw ParameterError("unknown flag --" + args.values.begin()->first);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw FilesystemError("cannot create output directory: " + dir);
    // Probe writability up front so failures map to the I/O exit code.
    const std::string probe = (fs::path(dir) / ".write_probe").string();
    std::ofstream p(probe, std::ios::binary);
    if (!p) throw FilesystemError("output directory is not writable: " + dir);
    p.close();
    fs::remove(probe, ec);
}

int cmd_generate(Args args) {
    const std::string out_dir = args.take("out");
    config::Config cfg = effective_config(args);
    ensure_dir(out_dir);
    datagen::DatasetManifest manifest = datagen::build_dataset(cfg.dataset_config(), out_dir);
    cfg.write_echo((fs::path(out_dir) / "config_echo.txt").string());
    const auto total = manifest.train.total + manifest.eval.total;
    const auto auth = manifest.train.authentic + manifest.eval.authentic;
    const auto cm = manifest.train.copy_move + manifest.eval.copy_move;
    const auto sp = manifest.train.splicing + manifest.eval.splicing;
    std::cout << total << " samples (" << auth << " authentic, " << cm << " copy-move, " << sp
              << " splicing)\n";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(
                      datagen::manifest_hash((fs::path(out_dir) / "manifest.txt").string())));
    std::cout << "manifest hash " << hex << "\n";
    return kOk;
}

int cmd_train(Args args) {
    const std::string data = args.take("data");
    const std::string out_dir = args.take("out");
    config::Config cfg = effective_config(args);
    ensure_dir(out_dir);
    datagen::DatasetManifest manifest = datagen::load_manifest(data);
    trainer::TrainResult result = trainer::train(manifest, cfg, out_dir);
    const auto& b = result.log.empty() ? objectives::LossBreakdown{} : result.log.back();
    std::printf("steps %zu\n", result.log.size());
    std::printf("final total=%.6f pred=%.6f cl=%.6f t=%.6f cls=%.6f mask=%.6f bce=%.6f dice=%.6f\n",
                b.l_total, b.l_pred, b.l_cl, b.l_t, b.l_cls, b.l_mask, b.l_bce, b.l_dice);
    std::cout << "checkpoint " << result.checkpoint_path << "\n";
    return kOk;
}

int cmd_eval(Args args) {
    const std::string ckpt_path = args.take("checkpoint");
    const std::string data = args.take("data");
    const std::string report_dir = args.take("report");
    reject_leftovers(args);
    ensure_dir(report_dir);
    trainer::Checkpoint ckpt = trainer::load_checkpoint(ckpt_path);
    datagen::DatasetManifest manifest = datagen::load_manifest(data);
    if (manifest.image_size != static_cast<std::size_t>(ckpt.cfg.get_int("image_size")))
        throw VersionError("checkpoint expects image_size " + ckpt.cfg.get_str("image_size") +
                           " but manifest has " + std::to_string(manifest.image_size));
    metrics::EvalReport report = metrics::evaluate(manifest, ckpt.params, "eval", report_dir);
    metrics::write_report(report, report_dir);
    ckpt.cfg.write_echo((fs::path(report_dir) / "config_echo.txt").string());
    std::cout << metrics::format_summary(report);
    return kOk;
}

int cmd_predict(Args args) {
    const std::string ckpt_path = args.take("checkpoint");
    const std::string image_path = args.take("image");
    const std::string out_dir = args.take("out");
    reject_leftovers(args);
    ensure_dir(out_dir);
    trainer::Checkpoint ckpt = trainer::load_checkpoint(ckpt_path);
    Tensor image = image_io::read_ppm(image_path);
    const auto trained = static_cast<std::size_t>(ckpt.cfg.get_int("image_size"));
    if (image.dim(0) % 2 != 0 || image.dim(1) % 2 != 0)
        throw DataError("predict: image dimensions must be even, got " + image.shape_str());
    if (image.dim(0) != trained || image.dim(1) != trained)
        throw DataError("predict: image " + image.shape_str() + " does not match trained size " +
                        std::to_string(trained));
    model::Prediction pred = model::predict(image, ckpt.params);
    const std::string stem = fs::path(image_path).stem().string();
    image_io::write_mask_pgm((fs::path(out_dir) / (stem + "_mask.pgm")).string(), pred.mask);
    {
        std::ofstream txt(fs::path(out_dir) / (stem + "_explanation.txt"));
        if (!txt) throw FilesystemError("cannot write explanation under: " + out_dir);
        txt << pred.explanation.rendered << "\n";
    }
    ckpt.cfg.write_echo((fs::path(out_dir) / "config_echo.txt").string());
    std::cout << heads::to_string(pred.verdict) << "\n" << pred.explanation.rendered << "\n";
    return kOk;
}

int cmd_decompose(Args args) {
    const std::string image_path = args.take("image");
    const std::string out_dir = args.take("out");
    reject_leftovers(args);
    ensure_dir(out_dir);
    Tensor image = image_io::read_ppm(image_path);
    if (image.dim(0) % 2 != 0 || image.dim(1) % 2 != 0)
        throw DataError("decompose: image dimensions must be even, got " + image.shape_str());
    wavelet::SubbandSet bands = wavelet::dwt2(image);
    const std::string stem = fs::path(image_path).stem().string();
    auto dump = [&](const char* name, const Tensor& band) {
        auto [scale, offset] =
            image_io::write_band_ppm((fs::path(out_dir) / (stem + "_" + name + ".ppm")).string(),
                                     band);
        std::printf("%s scale=%.17g offset=%.17g\n", name, scale, offset);
    };
    dump("ll", bands.ll);
    dump("lh", bands.lh);
    dump("hl", bands.hl);
    dump("hh", bands.hh);
    Tensor energy = wavelet::hh_energy_map(bands, 3);
    auto [escale, eoffset] =
        image_io::write_gray_pgm((fs::path(out_dir) / (stem + "_hh_energy.pgm")).string(), energy);
    std::printf("hh_energy scale=%.17g offset=%.17g\n", escale, eoffset);
    config::Config().write_echo((fs::path(out_dir) / "config_echo.txt").string());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        usage();
        return kConfigError;
    }
    const std::string command = argv[1];
    if (command == "--help" || command == "help" || command == "-h") {
        usage();
        return kOk;
    }
    try {
        Args args = parse_flags(argc, argv, 2);
        if (command == "generate") return cmd_generate(std::move(args));
        if (command == "train") return cmd_train(std::move(args));
        if (command == "eval") return cmd_eval(std::move(args));
        if (command == "predict") return cmd_predict(std::move(args));
        if (command == "decompose") return cmd_decompose(std::move(args));
        std::cerr << "error: unknown command '" << command << "'\n";
        usage();
        return kConfigError;
    } catch (const trainer::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDivergence;
    } catch (const VersionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kVersionMismatch;
    } catch (const FilesystemError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIoError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
