#include "foca/config.hpp"

#include "foca/error.hpp"
#include "foca/rng.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace foca::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

} // namespace

const std::vector<std::pair<std::string, std::string>>& Config::registry() {
    static const std::vector<std::pair<std::string, std::string>> entries = {
        {"seed", "42"},
        {"image_size", "64"},
        {"train_count", "200"},
        {"eval_count", "50"},
        {"frac_authentic", "0.5"},
        {"frac_copy_move", "0.25"},
        {"blend_sigma", "1.0"},
        {"mask_min_frac", "0.02"},
        {"mask_max_frac", "0.40"},
        {"patch", "4"},
        {"d_k", "64"},
        {"d_v", "64"},
        {"d_h", "128"},
        {"d_embed", "64"},
        {"trunk_patch", "8"},
        {"c_b", "32"},
        {"d_b", "32"},
        {"c_s", "32"},
        {"c_d", "32"},
        {"faf_enabled", "true"},
        {"epochs", "20"},
        {"batch_size", "8"},
        {"learning_rate", "0.001"},
        {"optimizer", "adam"},
        {"adam_beta1", "0.9"},
        {"adam_beta2", "0.999"},
        {"adam_eps", "1e-8"},
        {"lambda_c", "0.5"},
        {"lambda_bce", "2.0"},
        {"lambda_dice", "1.0"},
        {"tau", "0.07"},
        {"checkpoint_every", "0"},
        {"grad_clip", "0"},
        {"contrastive_views", "self"},
    };
    return entries;
}

bool Config::known_key(const std::string& key) {
    for (const auto& [k, v] : registry())
        if (k == key) return true;
    return false;
}

Config::Config() {
    for (const auto& [k, v] : registry()) values_[k] = v;
}

void Config::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ParameterError("unknown config key: " + key);
    values_[key] = value;
}

bool Config::is_default(const std::string& key) const {
    for (const auto& [k, v] : registry())
        if (k == key) return values_.at(key) == v;
    throw ParameterError("unknown config key: " + key);
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FilesystemError("cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError(path + ":" + std::to_string(lineno) +
                                 ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!known_key(key))
            throw ParameterError(path + ":" + std::to_string(lineno) + ": unknown config key: " +
                                 key);
        values_[key] = value;
    }
}

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ParameterError("unknown config key: " + key);
    return it->second;
}

long long Config::get_int(const std::string& key) const {
    const std::string& s = get_str(key);
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config key " + key + ": expected integer, got '" + s + "'");
    }
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string& s = get_str(key);
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config key " + key + ": expected unsigned integer, got '" + s + "'");
    }
}

double Config::get_double(const std::string& key) const {
    const std::string& s = get_str(key);
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config key " + key + ": expected number, got '" + s + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string& s = get_str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParameterError("config key " + key + ": expected boolean, got '" + s + "'");
}

std::string Config::serialize() const {
    std::ostringstream os;
    for (const auto& [k, def] : registry()) os << k << " = " << values_.at(k) << "\n";
    return os.str();
}

void Config::write_echo(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FilesystemError("cannot write config echo: " + path);
    out << serialize();
    if (!out) throw FilesystemError("short write on config echo: " + path);
}

std::uint64_t Config::model_hash() const {
    static const char* keys[] = {"seed", "image_size", "patch",       "d_k", "d_v",
                                 "d_h",  "d_embed",    "trunk_patch", "c_b", "d_b",
                                 "c_s",  "c_d",        "faf_enabled"};
    std::ostringstream os;
    for (const char* k : keys) os << k << "=" << values_.at(k) << ";";
    return hash_str(os.str());
}

datagen::DatasetConfig Config::dataset_config() const {
    datagen::DatasetConfig d;
    d.image_size = static_cast<std::size_t>(get_int("image_size"));
    d.train_count = static_cast<std::size_t>(get_int("train_count"));
    d.eval_count = static_cast<std::size_t>(get_int("eval_count"));
    d.frac_authentic = get_double("frac_authentic");
    d.frac_copy_move = get_double("frac_copy_move");
    d.blend_sigma = get_double("blend_sigma");
    d.mask_min_frac = get_double("mask_min_frac");
    d.mask_max_frac = get_double("mask_max_frac");
    d.seed = get_u64("seed");
    d.validate();
    return d;
}

model::ModelConfig Config::model_config() const {
    model::ModelConfig m;
    m.faf.patch = static_cast<std::size_t>(get_int("patch"));
    m.faf.d_k = static_cast<std::size_t>(get_int("d_k"));
    m.faf.d_v = static_cast<std::size_t>(get_int("d_v"));
    m.faf.d_h = static_cast<std::size_t>(get_int("d_h"));
    m.faf.d_embed = static_cast<std::size_t>(get_int("d_embed"));
    m.backbone.trunk_patch = static_cast<std::size_t>(get_int("trunk_patch"));
    m.backbone.c_b = static_cast<std::size_t>(get_int("c_b"));
    m.backbone.d_b = static_cast<std::size_t>(get_int("d_b"));
    m.backbone.c_s = static_cast<std::size_t>(get_int("c_s"));
    m.backbone.c_d = static_cast<std::size_t>(get_int("c_d"));
    m.faf_enabled = get_bool("faf_enabled");
    m.faf.validate();
    m.backbone.validate();
    return m;
}

objectives::LossWeights Config::loss_weights() const {
    objectives::LossWeights w;
    w.lambda_c = get_double("lambda_c");
    w.lambda_bce = get_double("lambda_bce");
    w.lambda_dice = get_double("lambda_dice");
    w.tau = get_double("tau");
    w.validate();
    return w;
}

} // namespace foca::config
