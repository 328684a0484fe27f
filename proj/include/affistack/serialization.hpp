#pragma once

#include <string>

#include <json.hpp>

#include "affistack/evaluate.hpp"
#include "affistack/learners.hpp"
#include "affistack/pca.hpp"
#include "affistack/pipeline.hpp"

namespace affistack {

using Json = nlohmann::ordered_json;

Json to_json(const PCABasis& basis);
PCABasis pca_basis_from_json(const Json& j);

Json to_json(const LinearModel& model);
LinearModel linear_model_from_json(const Json& j);

Json to_json(const GBTHyperparams& hp);
GBTHyperparams gbt_hyperparams_from_json(const Json& j);
Json to_json(const GBTModel& model);
GBTModel gbt_model_from_json(const Json& j);

Json to_json(const FittedMetaModel& model);
FittedMetaModel fitted_model_from_json(const Json& j);

Json to_json(const EvaluationReport& report, bool include_per_complex = true);
Json to_json(const TargetScreenReport& report);

/// Two-space indented dump followed by a newline.
std::string dump(const Json& j);

}  // namespace affistack
