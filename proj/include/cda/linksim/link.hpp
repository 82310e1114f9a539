#pragma once

#include "cda/common/time.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cda::linksim {

enum class ProfileName { Wifi6, Wifi4, Lte, Loopback };

const char* to_string(ProfileName name);
/// Accepts "wifi6", "wifi4", "lte", "loopback" (case-insensitive).
/// Throws std::invalid_argument for anything else.
ProfileName parse_profile_name(std::string_view text);

/// Latency/loss envelope of one access technology.
struct LinkProfile {
    ProfileName name = ProfileName::Loopback;
    double latency_min_ms = 0.0;
    double latency_max_ms = 0.0;
    double loss_rate = 0.0;
    double bandwidth_bps = 0.0;  // recorded only, never enforced

    /// Throws std::invalid_argument unless 0 <= min <= max and 0 <= loss < 1.
    void validate() const;
};

/// Upper latency bounds are the measured WiFi 6 / WiFi 4-5 / LTE ceilings
/// (< 10, < 50, < 100 ms); lower bounds are floor values we picked.
LinkProfile builtin_profile(ProfileName name);

/// Seeded generator shared by every sampling decision of one link.
/// Draws are converted to doubles by hand so sequences do not depend on the
/// standard library's distribution implementations.
class LinkRng {
public:
    explicit LinkRng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 engine_;
};

/// Derives independent per-link seeds from a scenario seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Uniform delay in [latency_min_ms, latency_max_ms].
double sample_delay_ms(const LinkProfile& profile, LinkRng& rng);

struct LinkStats {
    std::uint64_t sent = 0;
    std::uint64_t dropped = 0;
    std::uint64_t delivered = 0;
};

/// One direction of an impaired hop. Items are delivered in deliver_at
/// order; items scheduled for the same instant keep submission order.
template <typename Item>
class ImpairedLink {
public:
    ImpairedLink(LinkProfile profile, std::uint64_t seed) : profile_(profile), rng_(seed) {
        profile_.validate();
    }

    const LinkProfile& profile() const { return profile_; }
    const LinkStats& stats() const { return stats_; }

    SimTime sample_delay() { return from_millis(sample_delay_ms(profile_, rng_)); }

    /// Returns the scheduled delivery time, or nullopt when the item is lost.
    std::optional<SimTime> transmit(Item item, SimTime now) {
        ++stats_.sent;
        if (profile_.loss_rate > 0.0 && rng_.unit() < profile_.loss_rate) {
            ++stats_.dropped;
            return std::nullopt;
        }
        const SimTime at = now + sample_delay();
        queue_.push_back(Pending{at, next_order_++, std::move(item)});
        std::push_heap(queue_.begin(), queue_.end(), Later{});
        return at;
    }

    std::optional<SimTime> next_delivery() const {
        if (queue_.empty()) {
            return std::nullopt;
        }
        return queue_.front().deliver_at;
    }

    /// Removes and returns every item with deliver_at <= now.
    std::vector<Item> pop_due(SimTime now) {
        std::vector<Item> out;
        while (!queue_.empty() && queue_.front().deliver_at <= now) {
            std::pop_heap(queue_.begin(), queue_.end(), Later{});
            out.push_back(std::move(queue_.back().item));
            queue_.pop_back();
            ++stats_.delivered;
        }
        return out;
    }

    bool idle() const { return queue_.empty(); }

private:
    struct Pending {
        SimTime deliver_at;
        std::uint64_t order;
        Item item;
    };
    struct Later {
        bool operator()(const Pending& a, const Pending& b) const {
            return a.deliver_at != b.deliver_at ? a.deliver_at > b.deliver_at : a.order > b.order;
        }
    };

    LinkProfile profile_;
    LinkRng rng_;
    LinkStats stats_;
    std::uint64_t next_order_ = 0;
    std::vector<Pending> queue_;  // min-heap on (deliver_at, order)
};

}  // namespace cda::linksim
