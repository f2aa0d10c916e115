#include "uwf/cases.hpp"

#include <algorithm>
#include <vector>

#include "uwf/errors.hpp"

namespace uwf {

namespace {

std::vector<std::string> split_dashes(const std::string& id) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : id) {
        if (ch == '-') {
            tokens.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    tokens.push_back(cur);
    return tokens;
}

bool is_direction(const std::string& t) {
    return t == "W" || t == "N" || t == "E" || t == "S";
}

}  // namespace

std::string to_string(CaseTransform t) {
    switch (t) {
        case CaseTransform::none: return "none";
        case CaseTransform::rotate90ccw: return "rotate90ccw";
        case CaseTransform::vflip: return "vflip";
    }
    throw ContractError("to_string: unknown case transform");
}

ExperimentCase parse_case_id(const std::string& id) {
    const std::vector<std::string> tokens = split_dashes(id);
    if (tokens.size() < 3)
        throw ContractError("case id '" + id +
                            "': expected at least direction-city-regime");

    ExperimentCase c;
    if (!is_direction(tokens[0]))
        throw ContractError("case id '" + id + "': direction '" + tokens[0] +
                            "' is not one of W, N, E, S");
    c.direction = tokens[0];

    const std::string& city = tokens[1];
    if (city.empty() || !std::all_of(city.begin(), city.end(), [](unsigned char ch) {
            return std::isalnum(ch);
        }))
        throw ContractError("case id '" + id + "': bad city tag '" + city + "'");
    c.city = city;

    std::size_t i = 2;
    bool patches = false;
    if (tokens[i] == "T") {
        patches = false;
    } else if (tokens[i] == "P") {
        patches = true;
    } else {
        throw ContractError("case id '" + id + "': regime token '" + tokens[i] +
                            "' is not T or P");
    }
    ++i;
    bool sdf = false;
    if (i < tokens.size() && tokens[i] == "SDF") {
        sdf = true;
        ++i;
    }
    c.regime = patches ? (sdf ? Regime::PSdf : Regime::P)
                       : (sdf ? Regime::TSdf : Regime::T);

    if (i < tokens.size() && (tokens[i] == "R" || tokens[i] == "VF")) {
        c.transform = tokens[i] == "R" ? CaseTransform::rotate90ccw
                                       : CaseTransform::vflip;
        ++i;
    }
    if (i < tokens.size() && tokens[i] == "CFD") {
        c.cfd = true;
        ++i;
    }
    if (i != tokens.size())
        throw ContractError("case id '" + id + "': unexpected token '" + tokens[i] +
                            "'");
    return c;
}

std::string format_case_id(const ExperimentCase& c) {
    if (!is_direction(c.direction))
        throw ContractError("format_case_id: direction '" + c.direction +
                            "' is not one of W, N, E, S");
    if (c.city.empty()) throw ContractError("format_case_id: empty city tag");
    std::string id = c.direction + "-" + c.city + "-";
    id += regime_uses_patches(c.regime) ? "P" : "T";
    if (regime_uses_sdf(c.regime)) id += "-SDF";
    if (c.transform == CaseTransform::rotate90ccw) id += "-R";
    if (c.transform == CaseTransform::vflip) id += "-VF";
    if (c.cfd) id += "-CFD";
    return id;
}

ScalarField apply_case_transform(const ScalarField& f, CaseTransform t) {
    switch (t) {
        case CaseTransform::none: return f;
        case CaseTransform::rotate90ccw: return rotate90_ccw(f);
        case CaseTransform::vflip: return flip_vertical(f);
    }
    throw ContractError("apply_case_transform: unknown transform");
}

FieldSeries apply_case_transform(const FieldSeries& s, CaseTransform t) {
    switch (t) {
        case CaseTransform::none: return s;
        case CaseTransform::rotate90ccw: return rotate90_ccw(s);
        case CaseTransform::vflip: return flip_vertical(s);
    }
    throw ContractError("apply_case_transform: unknown transform");
}

} // namespace uwf
