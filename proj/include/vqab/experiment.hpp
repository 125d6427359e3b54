#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vqab/json_io.hpp"
#include "vqab/metrics.hpp"
#include "vqab/model.hpp"
#include "vqab/synth_world.hpp"
#include "vqab/trainer.hpp"

namespace vqab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything an experiment run depends on. Serializes fully; its hash goes into the report.
struct PipelineConfig {
    WorldConfig world;
    std::size_t k = kDefaultCandidates;
    std::map<ModelKind, TrainConfig> train;  // one entry per trained kind
    std::vector<AccuracyMode> eval_modes{AccuracyMode::consensus};
    std::uint64_t annotation_seed = 7;
    std::uint64_t explain_seed = 11;

    static PipelineConfig defaults();
    void validate() const;
};

json to_json(const PipelineConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const json& j);

/// Stage failure; the stage name leads the message.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what);
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct ReportBundle {
    json report;
    std::string markdown;
};

/// synth, index, tasks, simulated collection, assembly, training of every model kind on
/// the unbalanced and balanced train splits, and evaluation on both test variants.
/// When `work_dir` is set, the store, neighbours, and checkpoints are persisted there
/// (partial state survives a failing stage).
ReportBundle run_experiment(const PipelineConfig& config,
                            const std::optional<std::filesystem::path>& work_dir = std::nullopt);

/// Writes report.json and report.md.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace vqab
