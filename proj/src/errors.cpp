#include "qvlc/errors.hpp"

#include <sstream>

namespace qvlc {

namespace {

std::string join(const std::vector<int>& xs) {
    std::ostringstream out;
    for (std::size_t k = 0; k < xs.size(); ++k) out << (k ? "," : "") << xs[k];
    return out.str();
}

std::string describe_classes(const std::vector<std::vector<int>>& classes, const std::vector<int>& transient) {
    std::ostringstream out;
    out << "chain has " << classes.size() << " recurrent classes:";
    for (const auto& c : classes) out << " {" << join(c) << "}";
    if (!transient.empty()) out << "; transient {" << join(transient) << "}";
    return out.str();
}

}  // namespace

NotUnichainError::NotUnichainError(std::vector<std::vector<int>> classes, std::vector<int> transient)
    : Error(describe_classes(classes, transient)), classes_(std::move(classes)), transient_(std::move(transient)) {}

NotThresholdFormError::NotThresholdFormError(std::vector<int> states)
    : Error("policy is not of threshold form at states {" + join(states) + "}"), states_(std::move(states)) {}

}  // namespace qvlc
