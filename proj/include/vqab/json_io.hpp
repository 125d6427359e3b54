#pragma once

#include <json.hpp>

#include "vqab/types.hpp"

namespace vqab {

using json = nlohmann::json;

void to_json(json& j, const FeatureVector& v);
void to_json(json& j, const ImageRecord& r);
void to_json(json& j, const QuestionRecord& r);
void to_json(json& j, const AnswerSet& r);
void to_json(json& j, const ComplementaryPair& r);
void to_json(json& j, const AnnotationTask& r);
void to_json(json& j, const AnnotationOutcome& r);
void to_json(json& j, const AnnotationResult& r);
void to_json(json& j, const AnswerJob& r);

void from_json(const json& j, ImageRecord& r);
void from_json(const json& j, QuestionRecord& r);
void from_json(const json& j, AnswerSet& r);
void from_json(const json& j, ComplementaryPair& r);
void from_json(const json& j, AnnotationTask& r);
void from_json(const json& j, AnnotationOutcome& r);
void from_json(const json& j, AnnotationResult& r);
void from_json(const json& j, AnswerJob& r);

}  // namespace vqab
