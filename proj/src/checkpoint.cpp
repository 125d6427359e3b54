#include "vqab/checkpoint.hpp"

#include <fstream>

#include "vqab/errors.hpp"
#include "vqab/hashing.hpp"

namespace vqab {

namespace {

constexpr const char* kFormat = "vqab-checkpoint";
constexpr int kCheckpointVersion = 1;

json dims_to_json(const ModelDims& d) {
    return json{{"feature_dim", d.feature_dim},         {"word_dim", d.word_dim},
                {"hidden", d.hidden},                   {"explain_dim", d.explain_dim},
                {"answer_embed_dim", d.answer_embed_dim}, {"candidates", d.candidates},
                {"question_vocab", d.question_vocab},   {"answer_vocab", d.answer_vocab},
                {"mix", to_string(d.mix)},              {"normalize_image", d.normalize_image}};
}

ModelDims dims_from_json(const json& j) {
    ModelDims d;
    d.feature_dim = j.at("feature_dim").get<int>();
    d.word_dim = j.at("word_dim").get<int>();
    d.hidden = j.at("hidden").get<int>();
    d.explain_dim = j.at("explain_dim").get<int>();
    d.answer_embed_dim = j.at("answer_embed_dim").get<int>();
    d.candidates = j.at("candidates").get<int>();
    d.question_vocab = j.at("question_vocab").get<int>();
    d.answer_vocab = j.at("answer_vocab").get<int>();
    d.mix = mix_mode_from_string(j.at("mix").get<std::string>());
    d.normalize_image = j.at("normalize_image").get<bool>();
    return d;
}

}  // namespace

std::vector<int> Model::token_ids(std::span<const std::string> tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(question_vocab.id_or_unknown(t));
    return ids;
}

AnswerDistribution Model::distribution(std::span<const std::string> tokens, std::span<const double> features) const {
    const auto ids = token_ids(tokens);
    return predict_distribution(kind, params, dims, ids, features);
}

std::string Model::predict(std::span<const std::string> tokens, std::span<const double> features) const {
    if (kind == ModelKind::prior) return prior_answer;
    const auto dist = distribution(tokens, features);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < dist.probabilities.size(); ++i) {
        if (dist.probabilities(i) > dist.probabilities(best)) best = i;
    }
    return answer_vocab.word(static_cast<int>(best));
}

json checkpoint_to_json(const Model& m) {
    json j{{"format", kFormat},
           {"version", kCheckpointVersion},
           {"model_kind", to_string(m.kind)},
           {"prior_answer", m.prior_answer}};
    if (m.kind == ModelKind::prior) return j;
    j["dims"] = dims_to_json(m.dims);
    j["question_vocab"] = m.question_vocab.words();
    j["answer_vocab"] = m.answer_vocab.words();
    json tensors = json::array();
    for (const auto& b : m.params.blocks()) {
        tensors.push_back({{"name", b.name},
                           {"shape", {b.rows, b.cols}},
                           {"data", std::vector<double>(b.values.begin(), b.values.end())}});
    }
    j["tensors"] = std::move(tensors);
    return j;
}

Model checkpoint_from_json(const json& j) {
    if (j.value("format", std::string{}) != kFormat) throw ValidationError("not a vqab checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) throw ValidationError("unsupported checkpoint version");
    Model m;
    m.kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    m.prior_answer = j.value("prior_answer", std::string{});
    if (m.kind == ModelKind::prior) return m;
    m.dims = dims_from_json(j.at("dims"));
    m.question_vocab = Vocabulary(j.at("question_vocab").get<std::vector<std::string>>(), true);
    m.answer_vocab = Vocabulary(j.at("answer_vocab").get<std::vector<std::string>>(), false);
    m.params = ModelParams::zeros(m.dims);
    const auto& tensors = j.at("tensors");
    auto blocks = m.params.blocks();
    if (tensors.size() != blocks.size()) throw ValidationError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != blocks[i].name) {
            throw ValidationError("checkpoint tensor '" + t.at("name").get<std::string>() + "' out of order");
        }
        const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
        const auto data = t.at("data").get<std::vector<double>>();
        if (shape.size() != 2 || shape[0] != blocks[i].rows || shape[1] != blocks[i].cols ||
            data.size() != blocks[i].values.size()) {
            throw ValidationError("checkpoint tensor '" + blocks[i].name + "' has the wrong shape");
        }
        std::copy(data.begin(), data.end(), blocks[i].values.begin());
    }
    return m;
}

void save_checkpoint(const Model& model, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    out << checkpoint_to_json(model).dump() << '\n';
    if (!out) throw IoError("write failed for '" + file.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    try {
        return checkpoint_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ValidationError("malformed checkpoint '" + file.string() + "': " + e.what());
    }
}

std::string checkpoint_hash(const Model& model) { return sha256_hex(checkpoint_to_json(model).dump()); }

}  // namespace vqab
