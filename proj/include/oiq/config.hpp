#pragma once

#include <optional>
#include <string>

#include "oiq/nested.hpp"
#include "oiq/simulate.hpp"

namespace oiq {

// Parsed configuration document.  Rates given as strings or integers become
// exact rationals; JSON floats stay floating point.  Unknown keys anywhere
// are rejected.
struct ConfigDocument {
    int version = 1;
    SystemSpec spec;

    double tolerance = 1e-10;
    int truncation = 10;
    SimConfig sim;

    std::string nested_class;
    std::string nested_model = "collab";
    std::vector<double> cdf_points;
    std::vector<double> quantiles;
    std::vector<std::string> condition;  // server (or class) ids for conditioning
    bool condition_on_classes = false;
    std::optional<BusyWeights> busy_weights;

    // analyze queries kept as raw JSON text; the CLI interprets them
    std::string queries_json;

    std::string format = "records";  // or "human"
    int precision = 17;
};

ConfigDocument load_config(const std::string& path);
ConfigDocument parse_config(const std::string& text);

}  // namespace oiq
