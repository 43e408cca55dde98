#pragma once

#include "foca/datagen.hpp"
#include "foca/model.hpp"
#include "foca/objectives.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace foca::config {

// Flat key=value configuration with a closed key registry. Files are
// UTF-8 lines of `key = value` with `#` comments; unknown keys are
// rejected everywhere, including command-line overrides.
class Config {
public:
    Config(); // registry defaults

    static const std::vector<std::pair<std::string, std::string>>& registry();
    static bool known_key(const std::string& key);

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    bool is_default(const std::string& key) const;

    const std::string& get_str(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Canonical serialization in registry order; also the echo format.
    std::string serialize() const;
    void write_echo(const std::string& path) const;

    // Hash over the keys that determine parameter shapes and the frozen
    // encoder, i.e. what a checkpoint must agree on.
    std::uint64_t model_hash() const;

    datagen::DatasetConfig dataset_config() const;
    model::ModelConfig model_config() const;
    objectives::LossWeights loss_weights() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace foca::config
