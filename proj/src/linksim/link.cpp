#include "cda/linksim/link.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace cda::linksim {

const char* to_string(ProfileName name) {
    switch (name) {
        case ProfileName::Wifi6: return "wifi6";
        case ProfileName::Wifi4: return "wifi4";
        case ProfileName::Lte: return "lte";
        case ProfileName::Loopback: return "loopback";
    }
    return "?";
}

ProfileName parse_profile_name(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto name : {ProfileName::Wifi6, ProfileName::Wifi4, ProfileName::Lte, ProfileName::Loopback}) {
        if (lower == to_string(name)) {
            return name;
        }
    }
    throw std::invalid_argument("unknown link profile '" + std::string(text) + "'");
}

void LinkProfile::validate() const {
    if (!(latency_min_ms >= 0.0) || !(latency_min_ms <= latency_max_ms)) {
        throw std::invalid_argument("link profile needs 0 <= latency_min <= latency_max");
    }
    if (!(loss_rate >= 0.0) || !(loss_rate < 1.0)) {
        throw std::invalid_argument("link profile loss_rate must be in [0, 1)");
    }
}

LinkProfile builtin_profile(ProfileName name) {
    switch (name) {
        case ProfileName::Wifi6: return {name, 1.0, 10.0, 0.0, 4.3e9};
        case ProfileName::Wifi4: return {name, 5.0, 50.0, 0.0, 100e6};
        case ProfileName::Lte: return {name, 20.0, 100.0, 0.0, 50e6};
        case ProfileName::Loopback: return {name, 0.0, 0.0, 0.0, 0.0};
    }
    throw std::invalid_argument("unknown link profile");
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double sample_delay_ms(const LinkProfile& profile, LinkRng& rng) {
    if (profile.latency_max_ms == profile.latency_min_ms) {
        return profile.latency_min_ms;
    }
    return rng.uniform(profile.latency_min_ms, profile.latency_max_ms);
}

}  // namespace cda::linksim
