#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vqab/json_io.hpp"
#include "vqab/store.hpp"

namespace vqab {

/// A desk-scale world of images with latent categorical attributes.
///
/// Each image has `n_attributes` attributes; each is present with probability
/// `presence_prob` and then takes one of `values_per_attribute` values drawn from
/// softmax(prior_strength * [v == 0]), so prior_strength = 0 is uniform and larger
/// values make "value_0" dominate. Features are a fixed random linear embedding of
/// the one-hot attribute encoding plus N(0, noise_sigma^2) noise.
///
/// Questions use two templates: "what is attribute_k" and "is attribute_k value_v".
struct WorldConfig {
    int n_images = 2000;
    int n_attributes = 4;
    int values_per_attribute = 4;
    int feature_dim = 32;
    double noise_sigma = 0.3;
    double prior_strength = 2.0;  // beta
    int questions_per_image = 2;
    std::uint64_t seed = 1;
    double presence_prob = 0.9;
    double binary_fraction = 0.5;
    double answer_noise = 0.1;  // chance a simulated human answers at random
    double train_fraction = 0.6;
    double val_fraction = 0.1;

    void validate() const;
    bool operator==(const WorldConfig&) const = default;
};

json to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const json& j);

struct LatentScene {
    std::string image_id;
    std::vector<int> attributes;  // value index, or -1 when the attribute is absent

    bool operator==(const LatentScene&) const = default;
};

using Latents = std::map<std::string, LatentScene>;

struct World {
    WorldConfig config;
    DataStore store;
    Latents latents;
};

/// Probability of each attribute value under the tilted sampler.
std::vector<double> value_distribution(const WorldConfig& config);

World generate_world(const WorldConfig& config);

struct ParsedQuestion {
    int attribute = -1;
    std::optional<int> value;  // set for the binary template
};

/// Throws ValidationError for tokens that match neither template.
ParsedQuestion parse_question(std::span<const std::string> tokens);

/// Ground truth from the latent scene. Throws ValidationError for an attribute the
/// world does not have. An absent attribute answers "none" (open) or "no" (binary).
std::string oracle_answer(const LatentScene& scene, std::span<const std::string> tokens);

/// Whether the question's premise (its attribute is visible) holds for the scene.
bool premise_holds(const LatentScene& scene, std::span<const std::string> tokens);

/// Ten answers: each is the truth with probability 1 - answer_noise, otherwise a
/// uniformly random plausible answer for the template.
std::vector<std::string> simulated_answers(const LatentScene& scene, std::span<const std::string> tokens,
                                           const WorldConfig& config, std::mt19937_64& rng);

/// Picks uniformly among candidates whose premise holds and whose answer differs
/// from the task's shown answer; NotPossible when none qualifies.
AnnotationResult simulated_annotator(const DataStore& store, const Latents& latents, const AnnotationTask& task,
                                     std::mt19937_64& rng, std::int64_t timestamp_ms = 0);

struct CollectionSummary {
    std::size_t picked = 0;
    std::size_t not_possible = 0;
    std::size_t pairs = 0;
};

/// Runs both collection rounds with simulated people over every open task, in task-id order.
CollectionSummary simulate_collection(DataStore& store, const Latents& latents, const WorldConfig& config,
                                      std::uint64_t seed);

void write_latents(const std::filesystem::path& file, const Latents& latents);
Latents read_latents(const std::filesystem::path& file);

/// Store files plus latents.jsonl and world.json.
void save_world(const World& world, const std::filesystem::path& dir);

}  // namespace vqab
