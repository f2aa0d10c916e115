#pragma once

#include <string>

#include "uwf/dataset.hpp"
#include "uwf/field.hpp"

namespace uwf {

/// Orientation fix applied to a test series before evaluation.
enum class CaseTransform { none, rotate90ccw, vflip };

std::string to_string(CaseTransform t);

/// One cell of the experiment matrix, named like W-Nii-P-SDF-R:
/// wind direction, city tag, regime (T/P with optional SDF), an optional
/// -R (quarter-turn) or -VF (vertical flip) transform, and an optional
/// trailing -CFD marking ground-truth/training data.
struct ExperimentCase {
    std::string direction;  ///< one of W, N, E, S
    std::string city;       ///< e.g. Nii, Mon
    Regime regime = Regime::PSdf;
    CaseTransform transform = CaseTransform::none;
    bool cfd = false;
    std::string model_path;  ///< attached by the runner, not part of the id
};

/// Parse a case id; anything outside the grammar raises ContractError
/// naming the bad token. format_case_id(parse_case_id(id)) == id.
ExperimentCase parse_case_id(const std::string& id);
std::string format_case_id(const ExperimentCase& c);

/// Apply the case's orientation fix. Rotation turns an HxW grid into WxH.
ScalarField apply_case_transform(const ScalarField& f, CaseTransform t);
FieldSeries apply_case_transform(const FieldSeries& s, CaseTransform t);

} // namespace uwf
