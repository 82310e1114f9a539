#include "cda/wire/json.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace cda::wire {

namespace {

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
        return;
    }
    if (!it->is_number_integer()) {
        throw std::invalid_argument(std::string("field '") + key + "' must be an integer");
    }
    const auto value = it->get<std::int64_t>();
    if (value < static_cast<std::int64_t>(std::numeric_limits<T>::min()) ||
        value > static_cast<std::int64_t>(std::numeric_limits<T>::max())) {
        throw std::invalid_argument(std::string("field '") + key + "' exceeds its storage width");
    }
    out = static_cast<T>(value);
}

}  // namespace

Payload payload_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("type") || !doc["type"].is_string()) {
        throw std::invalid_argument("document needs a string \"type\" member");
    }
    const auto type = doc["type"].get<std::string>();
    if (type == "bsm") {
        BsmPayload m;
        read_field(doc, "msg_cnt", m.msg_cnt);
        read_field(doc, "temp_id", m.temp_id);
        read_field(doc, "sec_mark", m.sec_mark);
        read_field(doc, "lat", m.lat);
        read_field(doc, "lon", m.lon);
        read_field(doc, "elev", m.elev);
        read_field(doc, "speed", m.speed);
        read_field(doc, "heading", m.heading);
        return m;
    }
    if (type == "advisory") {
        AdvisoryPayload m;
        read_field(doc, "advisory_id", m.advisory_id);
        read_field(doc, "segment_id", m.segment_id);
        read_field(doc, "advisory_speed", m.advisory_speed);
        read_field(doc, "start_minute_of_year", m.start_minute_of_year);
        read_field(doc, "duration_minutes", m.duration_minutes);
        read_field(doc, "cause", m.cause);
        return m;
    }
    if (type == "toll") {
        TollPayload m;
        read_field(doc, "toll_point_id", m.toll_point_id);
        read_field(doc, "amount_cents", m.amount_cents);
        read_field(doc, "currency", m.currency);
        read_field(doc, "lane_mask", m.lane_mask);
        return m;
    }
    throw std::invalid_argument("unknown message type '" + type + "'");
}

nlohmann::json payload_to_json(const Payload& message) {
    struct Visitor {
        nlohmann::json operator()(const BsmPayload& m) const {
            return {{"type", "bsm"},         {"msg_cnt", m.msg_cnt}, {"temp_id", m.temp_id},
                    {"sec_mark", m.sec_mark}, {"lat", m.lat},         {"lon", m.lon},
                    {"elev", m.elev},         {"speed", m.speed},     {"heading", m.heading}};
        }
        nlohmann::json operator()(const AdvisoryPayload& m) const {
            return {{"type", "advisory"},
                    {"advisory_id", m.advisory_id},
                    {"segment_id", m.segment_id},
                    {"advisory_speed", m.advisory_speed},
                    {"start_minute_of_year", m.start_minute_of_year},
                    {"duration_minutes", m.duration_minutes},
                    {"cause", m.cause}};
        }
        nlohmann::json operator()(const TollPayload& m) const {
            return {{"type", "toll"},
                    {"toll_point_id", m.toll_point_id},
                    {"amount_cents", m.amount_cents},
                    {"currency", m.currency},
                    {"lane_mask", m.lane_mask}};
        }
    };
    return std::visit(Visitor{}, message);
}

}  // namespace cda::wire
