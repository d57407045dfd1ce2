#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace oarseg {

/// Thoracic organs at risk. Codes are the values stored in label volumes;
/// 0 is background.
enum class OrganId : int {
    right_lung = 1,
    left_lung = 2,
    heart = 3,
    trachea = 4,
    spinal_cord = 5,
    esophagus = 6,
};

inline constexpr int kOrganCount = 6;
inline constexpr int kMaxLabelCode = 6;

inline constexpr std::array<OrganId, kOrganCount> kAllOrgans = {
    OrganId::right_lung, OrganId::left_lung, OrganId::heart,
    OrganId::trachea,    OrganId::spinal_cord, OrganId::esophagus};

constexpr int organ_code(OrganId organ) { return static_cast<int>(organ); }
constexpr std::size_t organ_index(OrganId organ) { return static_cast<std::size_t>(organ_code(organ) - 1); }

std::string_view organ_name(OrganId organ);
/// Display name used in report tables ("Right Lung").
std::string_view organ_title(OrganId organ);

std::optional<OrganId> organ_from_code(int code);
std::optional<OrganId> organ_from_name(std::string_view name);
/// Throws std::invalid_argument listing the valid names.
OrganId parse_organ(std::string_view name);

}  // namespace oarseg
