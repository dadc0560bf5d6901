#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlab/encoder.hpp"
#include "rlab/mining.hpp"
#include "rlab/synth.hpp"
#include "rlab/training.hpp"

namespace rlab::pipeline {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat key/value configuration. Keys use underscores; the matching command
// line flag swaps them for hyphens (learning_rate -> --learning-rate).
using Config = nlohmann::ordered_json;

Config default_config();
const std::vector<std::string>& preset_names();

// Overwrites the keys a method preset fixes and records the preset name.
void apply_preset(Config& config, const std::string& name);

// Copies `overrides` into `config`. Unknown keys and type mismatches throw,
// naming `source`. A "preset" key is applied first.
void merge_config(Config& config, const nlohmann::json& overrides, const std::string& source);

// Parses a command line string value according to the type of the key's default.
nlohmann::json parse_flag_value(const Config& config, const std::string& key, const std::string& text);

nlohmann::json load_json_file(const std::filesystem::path& path);

EncoderConfig encoder_config(const Config& config);
SynthSpec synth_spec(const Config& config);
MiningConfig mining_config(const Config& config);
TrainConfig train_config(const Config& config);

// Each command writes into config["outdir"] (created if missing) and returns
// the manifest it wrote: config, seed, input and output file hashes, plus
// command-specific metrics.
nlohmann::ordered_json cmd_synth(const Config& config);
nlohmann::ordered_json cmd_mine(const Config& config);
nlohmann::ordered_json cmd_train(const Config& config);
nlohmann::ordered_json cmd_eval(const Config& config);
// Inputs are eval report or eval manifest JSON files.
nlohmann::ordered_json cmd_compare(const Config& config, const std::vector<std::filesystem::path>& inputs);

}  // namespace rlab::pipeline
