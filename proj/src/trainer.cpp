#include "foca/trainer.hpp"

#include "foca/error.hpp"
#include "foca/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace foca::trainer {

void TrainConfig::validate() const {
    if (epochs < 1) throw ParameterError("train: epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ParameterError("train: learning_rate must be > 0");
    weights.validate();
}

TrainConfig TrainConfig::from_config(const config::Config& cfg) {
    TrainConfig t;
    t.epochs = static_cast<std::size_t>(cfg.get_int("epochs"));
    t.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size"));
    t.learning_rate = cfg.get_double("learning_rate");
    t.seed = cfg.get_u64("seed");
    t.weights = cfg.loss_weights();
    const std::string opt = cfg.get_str("optimizer");
    if (opt == "adam")
        t.optimizer = OptimizerKind::adam;
    else if (opt == "sgd")
        t.optimizer = OptimizerKind::sgd;
    else
        throw ParameterError("train: optimizer must be adam or sgd, got " + opt);
    t.adam_beta1 = cfg.get_double("adam_beta1");
    t.adam_beta2 = cfg.get_double("adam_beta2");
    t.adam_eps = cfg.get_double("adam_eps");
    t.checkpoint_every = static_cast<std::size_t>(cfg.get_int("checkpoint_every"));
    t.grad_clip = cfg.get_double("grad_clip");
    const std::string views = cfg.get_str("contrastive_views");
    if (views == "self")
        t.augmented_views = false;
    else if (views == "augmented")
        t.augmented_views = true;
    else
        throw ParameterError("train: contrastive_views must be self or augmented, got " + views);
    t.validate();
    return t;
}

Optimizer Optimizer::init(const TrainConfig& cfg,
                          const std::vector<std::pair<std::string, Tensor>>& params) {
    Optimizer o;
    o.kind = cfg.optimizer;
    o.lr = cfg.learning_rate;
    o.beta1 = cfg.adam_beta1;
    o.beta2 = cfg.adam_beta2;
    o.eps = cfg.adam_eps;
    o.t = 0;
    o.m.resize(params.size());
    o.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        o.m[i].assign(params[i].second.numel(), 0.0);
        o.v[i].assign(params[i].second.numel(), 0.0);
    }
    return o;
}

void Optimizer::step(const std::vector<std::pair<std::string, Tensor>>& params, double grad_clip) {
    // Collect gradients (absent grads count as zero).
    std::vector<std::vector<double>> grads(params.size());
    double sq_norm = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& p = params[i].second;
        grads[i] = p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0);
        for (double g : grads[i]) sq_norm += g * g;
    }
    if (grad_clip > 0.0) {
        const double norm = std::sqrt(sq_norm);
        if (norm > grad_clip) {
            const double scale = grad_clip / norm;
            for (auto& g : grads)
                for (double& x : g) x *= scale;
        }
    }
    ++t;
    if (kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor p = params[i].second;
            for (std::size_t j = 0; j < grads[i].size(); ++j) p.values()[j] -= lr * grads[i][j];
        }
        return;
    }
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        for (std::size_t j = 0; j < grads[i].size(); ++j) {
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * grads[i][j];
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * grads[i][j] * grads[i][j];
            const double mhat = m[i][j] / bc1;
            const double vhat = v[i][j] / bc2;
            p.values()[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

Tensor batch_mean(std::vector<Tensor> parts) {
    Tensor acc = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return mul_scalar(acc, 1.0 / static_cast<double>(parts.size()));
}

// Horizontal flip plus Gaussian pixel noise, for the optional paired-view
// contrastive mode.
Tensor augment_view(const Tensor& image, Rng& rng) {
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
    const bool flip = rng.next_bool();
    std::vector<double> out(image.numel());
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t sx = flip ? w - 1 - x : x;
            for (std::size_t k = 0; k < c; ++k)
                out[(y * w + x) * c + k] = image.values()[(y * w + sx) * c + k];
        }
    for (auto& v : out) v = std::clamp(v + 0.02 * rng.gaussian(), 0.0, 1.0);
    return Tensor::from_data(image.shape(), std::move(out));
}

} // namespace

objectives::LossBreakdown train_step(const std::vector<const datagen::Sample*>& batch,
                                     model::ModelParams& params, Optimizer& opt,
                                     const TrainConfig& cfg, std::uint64_t global_step) {
    if (batch.empty()) throw ParameterError("train_step: empty batch");
    for (const auto* s : batch)
        if (s->image.shape() != batch[0]->image.shape())
            throw DimensionError("train_step: samples in a batch must share one shape");

    std::vector<Tensor> l_t_parts, l_cls_parts, l_bce_parts, l_dice_parts;
    std::vector<Tensor> embeddings;
    for (const auto* s : batch) {
        model::SampleForward fwd = model::forward_sample(s->image, params);
        l_t_parts.push_back(objectives::text_loss(fwd.backbone.verdict_logits,
                                                  fwd.backbone.region_logits,
                                                  fwd.backbone.cue_logits, s->explanation));
        l_cls_parts.push_back(objectives::cls_loss(fwd.backbone.det_logits, s->label));
        l_bce_parts.push_back(objectives::bce_loss(fwd.mask_logits, s->mask));
        l_dice_parts.push_back(objectives::dice_loss(fwd.mask_logits, s->mask));
        embeddings.push_back(reshape(fwd.contrastive, {1, params.cfg.faf.d_embed}));
    }

    Tensor l_cl;
    if (cfg.augmented_views) {
        Rng rng(derive_seed(cfg.seed, "augment", global_step));
        std::vector<Tensor> views = embeddings;
        for (const auto* s : batch) {
            Tensor aug = augment_view(s->image, rng);
            model::SampleForward fwd = model::forward_sample(aug, params);
            views.push_back(reshape(fwd.contrastive, {1, params.cfg.faf.d_embed}));
        }
        l_cl = objectives::infonce_pairs(concat_rows(views), cfg.weights.tau);
    } else {
        l_cl = objectives::infonce(concat_rows(embeddings), cfg.weights.tau);
    }

    objectives::TotalLoss total =
        objectives::total_loss(batch_mean(std::move(l_t_parts)), batch_mean(std::move(l_cls_parts)),
                               batch_mean(std::move(l_bce_parts)),
                               batch_mean(std::move(l_dice_parts)), l_cl, cfg.weights);

    if (!std::isfinite(total.breakdown.l_total))
        throw DivergenceError("train_step: non-finite loss at step " + std::to_string(global_step),
                              total.breakdown);

    auto trainable = params.trainable();
    for (auto& [name, p] : trainable) p.zero_grad();
    total.total.backward();
    opt.step(trainable, cfg.grad_clip);

    for (const auto& [name, p] : trainable)
        if (!p.all_finite())
            throw DivergenceError("train_step: parameter " + name + " became non-finite",
                                  total.breakdown);
    return total.breakdown;
}

namespace {

constexpr char kCkptMagic[8] = {'F', 'O', 'C', 'A', 'C', 'K', 'P', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    std::uint64_t bits = get_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
    const std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write checkpoint: " + path);
    out.write(kCkptMagic, 8);
    put_u32(out, 1);
    put_u64(out, ckpt.model_hash);
    put_u64(out, ckpt.step);
    put_u64(out, ckpt.epoch);
    put_u64(out, ckpt.pos);
    put_str(out, ckpt.cfg.serialize());
    const auto params = ckpt.params.trainable();
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, p] : params) {
        put_str(out, name);
        put_u32(out, static_cast<std::uint32_t>(p.ndim()));
        for (std::size_t d : p.shape()) put_u64(out, d);
        for (double v : p.values()) put_f64(out, v);
    }
    out.put(static_cast<char>(ckpt.opt.kind));
    put_u64(out, ckpt.opt.t);
    if (ckpt.opt.kind == OptimizerKind::adam) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (double v : ckpt.opt.m[i]) put_f64(out, v);
            for (double v : ckpt.opt.v[i]) put_f64(out, v);
        }
    }
    if (!out) throw FilesystemError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FilesystemError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw VersionError("checkpoint " + path + ": bad magic bytes");
    const std::uint32_t version = get_u32(in);
    if (version != 1)
        throw VersionError("checkpoint " + path + ": unsupported version " +
                           std::to_string(version));
    Checkpoint ckpt;
    ckpt.model_hash = get_u64(in);
    ckpt.step = get_u64(in);
    ckpt.epoch = get_u64(in);
    ckpt.pos = get_u64(in);

    // Restore the effective config, then rebuild shapes and the frozen stack.
    const std::string cfg_text = get_str(in);
    {
        const std::string tmp = path + ".cfg.tmp";
        std::ofstream tmpout(tmp, std::ios::binary);
        tmpout << cfg_text;
        tmpout.close();
        ckpt.cfg.load_file(tmp);
        fs::remove(tmp);
    }
    if (ckpt.cfg.model_hash() != ckpt.model_hash)
        throw VersionError("checkpoint " + path + ": stored config does not match its model hash");
    ckpt.params = model::ModelParams::init(ckpt.cfg.model_config(), ckpt.cfg.get_u64("seed"));

    const std::uint32_t param_count = get_u32(in);
    auto params = ckpt.params.trainable();
    if (param_count != params.size())
        throw VersionError("checkpoint " + path + ": parameter count mismatch");
    for (auto& [name, p] : params) {
        const std::string stored = get_str(in);
        if (stored != name)
            throw VersionError("checkpoint " + path + ": parameter order mismatch at " + name);
        const std::uint32_t ndim = get_u32(in);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = static_cast<std::size_t>(get_u64(in));
        if (shape != p.shape())
            throw VersionError("checkpoint " + path + ": shape mismatch for " + name);
        for (double& v : p.values()) v = get_f64(in);
    }
    const int kind = in.get();
    if (kind != 0 && kind != 1) throw VersionError("checkpoint " + path + ": bad optimizer kind");
    TrainConfig tc = TrainConfig::from_config(ckpt.cfg);
    ckpt.opt = Optimizer::init(tc, params);
    ckpt.opt.kind = static_cast<OptimizerKind>(kind);
    ckpt.opt.t = get_u64(in);
    if (ckpt.opt.kind == OptimizerKind::adam) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            for (double& v : ckpt.opt.m[i]) v = get_f64(in);
            for (double& v : ckpt.opt.v[i]) v = get_f64(in);
        }
    }
    if (!in) throw VersionError("checkpoint " + path + ": truncated file");
    return ckpt;
}

void append_log_csv(const std::string& path, const std::vector<objectives::LossBreakdown>& rows,
                    std::uint64_t first_step, bool write_header) {
    std::ofstream out(path, write_header ? std::ios::trunc : std::ios::app);
    if (!out) throw FilesystemError("cannot write training log: " + path);
    if (write_header) out << "step,l_total,l_pred,l_cl,l_t,l_cls,l_bce,l_dice\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << (first_step + i) << "," << fmt(r.l_total) << "," << fmt(r.l_pred) << ","
            << fmt(r.l_cl) << "," << fmt(r.l_t) << "," << fmt(r.l_cls) << "," << fmt(r.l_bce)
            << "," << fmt(r.l_dice) << "\n";
    }
    if (!out) throw FilesystemError("short write on training log: " + path);
}

namespace {

TrainResult run_loop(const datagen::DatasetManifest& manifest, Checkpoint state,
                     const std::string& out_dir, bool fresh_log) {
    const TrainConfig tc = TrainConfig::from_config(state.cfg);
    auto records = datagen::split_records(manifest, "train");
    if (records.empty()) throw DataError("train: manifest has no train records");
    if (manifest.image_size != static_cast<std::size_t>(state.cfg.get_int("image_size")))
        throw VersionError("train: manifest image_size " + std::to_string(manifest.image_size) +
                           " does not match config");

    std::vector<datagen::Sample> samples;
    samples.reserve(records.size());
    for (const auto* r : records) samples.push_back(datagen::load_record(manifest, *r));

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.bin").string();
    const std::string log_path = (fs::path(out_dir) / "train_log.csv").string();
    state.cfg.write_echo((fs::path(out_dir) / "config_echo.txt").string());

    const std::size_t n = samples.size();
    const std::size_t nbatches = (n + tc.batch_size - 1) / tc.batch_size;

    TrainResult result;
    bool header = fresh_log;
    const std::uint64_t logged_from = state.step;

    for (std::uint64_t epoch = state.epoch; epoch < tc.epochs; ++epoch) {
        // Derive the epoch permutation from (seed, epoch) so a resumed run
        // rebuilds the identical order.
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        Rng rng(derive_seed(tc.seed, "shuffle", epoch));
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
            std::swap(perm[i - 1], perm[j]);
        }
        const std::uint64_t start_pos = epoch == state.epoch ? state.pos : 0;
        for (std::uint64_t b = start_pos; b < nbatches; ++b) {
            std::vector<const datagen::Sample*> batch;
            for (std::size_t i = b * tc.batch_size; i < std::min(n, (b + 1) * tc.batch_size); ++i)
                batch.push_back(&samples[perm[i]]);
            objectives::LossBreakdown row;
            try {
                row = train_step(batch, state.params, state.opt, tc, state.step);
            } catch (const DivergenceError&) {
                // Keep what we have on disk: log rows so far plus the last
                // written checkpoint.
                append_log_csv(log_path, result.log, logged_from, header);
                throw;
            }
            result.log.push_back(row);
            ++state.step;
            state.epoch = epoch;
            state.pos = b + 1;
            if (state.pos == nbatches) {
                state.epoch = epoch + 1;
                state.pos = 0;
            }
            if (tc.checkpoint_every > 0 && state.step % tc.checkpoint_every == 0)
                save_checkpoint(ckpt_path, state);
        }
    }
    state.epoch = tc.epochs;
    state.pos = 0;
    save_checkpoint(ckpt_path, state);
    append_log_csv(log_path, result.log, logged_from, header);
    result.final_checkpoint = std::move(state);
    result.checkpoint_path = ckpt_path;
    result.log_path = log_path;
    return result;
}

} // namespace

TrainResult train(const datagen::DatasetManifest& manifest, const config::Config& cfg,
                  const std::string& out_dir) {
    const TrainConfig tc = TrainConfig::from_config(cfg);
    Checkpoint state;
    state.cfg = cfg;
    state.model_hash = cfg.model_hash();
    state.params = model::ModelParams::init(cfg.model_config(), cfg.get_u64("seed"));
    state.opt = Optimizer::init(tc, state.params.trainable());
    state.step = 0;
    state.epoch = 0;
    state.pos = 0;
    return run_loop(manifest, std::move(state), out_dir, /*fresh_log=*/true);
}

TrainResult resume(const datagen::DatasetManifest& manifest, const Checkpoint& start,
                   const std::string& out_dir) {
    Checkpoint state;
    state.cfg = start.cfg;
    state.model_hash = start.model_hash;
    state.step = start.step;
    state.epoch = start.epoch;
    state.pos = start.pos;
    state.params = start.params.clone();
    state.opt = start.opt;
    return run_loop(manifest, std::move(state), out_dir, /*fresh_log=*/true);
}

} // namespace foca::trainer
