#ifndef SPLITGATE_PRESETS_HPP
#define SPLITGATE_PRESETS_HPP

#include <array>
#include <optional>
#include <string_view>

#include "splitgate/synthbench.hpp"

namespace splitgate {

/// Dataset-shaped configurations: class count and test images per class of
/// the three public OCT datasets the tool was built around.
struct Preset {
    std::string_view name;
    std::size_t k_classes;
    std::size_t test_per_class;
};

inline constexpr std::array<Preset, 4> presets{{
    {"default", 2, 1000},
    {"kermany-like", 4, 1000},
    {"srinivasan-like", 3, 250},
    {"aiims-like", 2, 1000},
}};

inline std::optional<Preset> find_preset(std::string_view name)
{
    for (const auto& p : presets)
        if (p.name == name)
            return p;
    return std::nullopt;
}

/// Synthetic parameters for a preset: the default amplitudes with the
/// preset's class count.
inline SynthParams synth_params_for(const Preset& preset)
{
    SynthParams p;
    p.k_classes = preset.k_classes;
    return p;
}

} // namespace splitgate

#endif // SPLITGATE_PRESETS_HPP
