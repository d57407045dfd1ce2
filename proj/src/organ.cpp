#include "oarseg/organ.hpp"

#include <stdexcept>
#include <string>

namespace oarseg {

namespace {

struct OrganNames {
    OrganId id;
    std::string_view name;
    std::string_view title;
};

constexpr std::array<OrganNames, kOrganCount> kNames = {{
    {OrganId::right_lung, "right_lung", "Right Lung"},
    {OrganId::left_lung, "left_lung", "Left Lung"},
    {OrganId::heart, "heart", "Heart"},
    {OrganId::trachea, "trachea", "Trachea"},
    {OrganId::spinal_cord, "spinal_cord", "Spinal Cord"},
    {OrganId::esophagus, "esophagus", "Esophagus"},
}};

}  // namespace

std::string_view organ_name(OrganId organ) { return kNames[organ_index(organ)].name; }

std::string_view organ_title(OrganId organ) { return kNames[organ_index(organ)].title; }

std::optional<OrganId> organ_from_code(int code) {
    if (code < 1 || code > kOrganCount) return std::nullopt;
    return static_cast<OrganId>(code);
}

std::optional<OrganId> organ_from_name(std::string_view name) {
    for (const auto& entry : kNames)
        if (entry.name == name) return entry.id;
    return std::nullopt;
}

OrganId parse_organ(std::string_view name) {
    if (auto organ = organ_from_name(name)) return *organ;
    std::string valid;
    for (const auto& entry : kNames) {
        if (!valid.empty()) valid += ", ";
        valid += entry.name;
    }
    throw std::invalid_argument("unknown organ '" + std::string(name) + "' (expected one of: " + valid + ")");
}

}  // namespace oarseg
