#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "manipulant/config.hpp"

namespace manipulant {

// Subcommand bodies, exposed for integration tests. Each returns the process
// exit code: 0 success, 1 user error, 2 numerical failure.

struct SynthArgs {
    std::string task = "SM";
    unsigned long long seed = 1;
    int count = 1;
    double noise = 1.0;
    double sample_rate = 60.0;
    std::filesystem::path out;  // file for count == 1, directory otherwise
};
int cmd_synth(const SynthArgs& args);

int cmd_ingest(const std::filesystem::path& dir);

struct AnalyzeArgs {
    std::filesystem::path dir;
    std::filesystem::path out_dir = ".";
    PipelineConfig cfg;
};
int cmd_analyze(const AnalyzeArgs& args);

struct LearnArgs {
    std::filesystem::path input;
    std::filesystem::path out;
    PipelineConfig cfg;
    std::vector<std::string> actions;  // optional action filter
};
int cmd_learn(const LearnArgs& args);

struct TrackArgs {
    std::filesystem::path robot;
    std::filesystem::path profile;
    std::filesystem::path out;
    PipelineConfig cfg;
};
int cmd_track(const TrackArgs& args);

struct ReportArgs {
    std::filesystem::path input;
    std::filesystem::path out_dir;
    PipelineConfig cfg;
};
int cmd_report(const ReportArgs& args);

/// Full argv entry point used by the binary.
int run_cli(int argc, char** argv);

}  // namespace manipulant
