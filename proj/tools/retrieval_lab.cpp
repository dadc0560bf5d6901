// retrieval-lab: synthetic data, negative mining, fine-tuning and evaluation
// of the toy dense retriever.

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "pipeline.hpp"

namespace pl = rlab::pipeline;

namespace {

struct Command {
    CLI::App* app = nullptr;
    std::string config_path;
    std::string preset;
    struct Flag {
        CLI::Option* option = nullptr;
        std::string raw;
    };
    std::map<std::string, Flag> flags;  // keyed by config key
    std::vector<std::string> inputs;    // compare only
};

void add_config_flags(Command& cmd, const pl::Config& defaults) {
    cmd.app->add_option("--config", cmd.config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd.app->add_option("--preset", cmd.preset, "method preset")
        ->check(CLI::IsMember(pl::preset_names()));
    for (const auto& [key, value] : defaults.items()) {
        if (key == "preset") continue;
        std::string flag = key;
        for (char& c : flag) {
            if (c == '_') c = '-';
        }
        Command::Flag& f = cmd.flags[key];
        f.option = cmd.app->add_option("--" + flag, f.raw, "default " + value.dump());
    }
}

// Precedence: defaults, then the preset, then config file keys, then flags.
// A --preset flag replaces the preset named in the file.
pl::Config resolve(const Command& cmd) {
    pl::Config config = pl::default_config();
    nlohmann::json file = cmd.config_path.empty() ? nlohmann::json::object() : pl::load_json_file(cmd.config_path);
    if (!cmd.preset.empty()) file["preset"] = cmd.preset;
    pl::merge_config(config, file, cmd.config_path.empty() ? "--preset" : cmd.config_path);
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [key, flag] : cmd.flags) {
        if (flag.option->count() > 0) overrides[key] = pl::parse_flag_value(config, key, flag.raw);
    }
    pl::merge_config(config, overrides, "command line");
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense retrieval fine-tuning lab: synth, mine, train, eval, compare"};
    app.require_subcommand(1);
    const pl::Config defaults = pl::default_config();

    std::map<std::string, Command> commands;
    const std::map<std::string, std::string> help = {
        {"synth", "generate the synthetic benchmark into --outdir"},
        {"mine", "mine negatives for the training queries and write train.jsonl"},
        {"train", "fine-tune on --train-set and write checkpoint.bin and loss_trace.csv"},
        {"eval", "score --checkpoint on the evaluation queries (nDCG@k)"},
        {"compare", "tabulate eval reports or eval manifests"},
    };
    for (const auto& [name, text] : help) {
        Command& cmd = commands[name];
        cmd.app = app.add_subcommand(name, text);
        add_config_flags(cmd, defaults);
    }
    commands["compare"].app->add_option("inputs", commands["compare"].inputs, "report.json or eval_manifest.json files")
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        for (auto& [name, cmd] : commands) {
            if (!cmd.app->parsed()) continue;
            const pl::Config config = resolve(cmd);
            nlohmann::ordered_json manifest;
            if (name == "synth") manifest = pl::cmd_synth(config);
            if (name == "mine") manifest = pl::cmd_mine(config);
            if (name == "train") manifest = pl::cmd_train(config);
            if (name == "eval") manifest = pl::cmd_eval(config);
            if (name == "compare") {
                std::vector<std::filesystem::path> inputs(cmd.inputs.begin(), cmd.inputs.end());
                manifest = pl::cmd_compare(config, inputs);
            }
            std::cout << name << ": wrote";
            for (const auto& [file, hash] : manifest.at("outputs").items()) std::cout << ' ' << file;
            std::cout << " and " << name << "_manifest.json to " << config.at("outdir").get<std::string>() << '\n';
            if (manifest.contains("report")) {
                std::cout << "nDCG@" << manifest["report"]["k"] << " = " << manifest["report"]["mean"] << '\n';
            }
            if (manifest.contains("final_metrics")) std::cout << manifest["final_metrics"].dump() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
