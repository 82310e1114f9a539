#include "cda/meta/meta_action.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace cda::meta {

namespace {

constexpr std::string_view kOpenFence = "```metaaction";
constexpr std::string_view kCloseFence = "```";
constexpr double kMaxDurationS = 65535.0 * 60.0;

std::string_view trim(std::string_view s) {
    const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!s.empty() && ws(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && ws(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

struct Value {
    std::string text;
    std::optional<double> number;  // set when the unquoted text is a number
};

std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) {
        return std::nullopt;
    }
    const char c = s.front();
    // from_chars also accepts "inf" and "nan", which are not numbers here.
    if (!(c == '-' || c == '.' || (c >= '0' && c <= '9'))) {
        return std::nullopt;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

Value parse_value(std::string_view raw) {
    raw = trim(raw);
    if (raw.size() >= 2 && (raw.front() == '"' || raw.front() == '\'') && raw.back() == raw.front()) {
        return {std::string(raw.substr(1, raw.size() - 2)), std::nullopt};
    }
    return {std::string(raw), parse_number(raw)};
}

struct Block {
    std::string action;
    bool has_params = false;
    std::map<std::string, Value> params;
};

Rejection reject(RejectReason reason, std::string detail, std::string field = {}) {
    Rejection r;
    r.reason = reason;
    r.detail = std::move(detail);
    r.field = std::move(field);
    return r;
}

// Splits "key: value" at the first colon; the key must be an identifier.
std::optional<std::pair<std::string_view, std::string_view>> key_value(std::string_view line) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
        return std::nullopt;
    }
    const auto key = trim(line.substr(0, colon));
    if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) {
            return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        })) {
        return std::nullopt;
    }
    return std::make_pair(key, line.substr(colon + 1));
}

std::variant<Block, Rejection> parse_block(const std::vector<std::string_view>& body) {
    Block block;
    bool have_action = false;
    for (const auto raw : body) {
        if (trim(raw).empty()) {
            continue;
        }
        const bool indented = raw.front() == ' ' || raw.front() == '\t';
        const auto kv = key_value(raw);
        if (!kv) {
            return reject(RejectReason::Malformed, "expected 'key: value', got '" + std::string(trim(raw)) + "'");
        }
        const std::string key(kv->first);
        if (!indented) {
            if (key == "action" && !have_action) {
                block.action = std::string(trim(kv->second));
                have_action = true;
            } else if (key == "params" && !block.has_params && trim(kv->second).empty()) {
                block.has_params = true;
            } else {
                return reject(RejectReason::Malformed, "unexpected top-level key '" + key + "'");
            }
            continue;
        }
        if (!block.has_params) {
            return reject(RejectReason::Malformed, "indented line outside params");
        }
        if (!block.params.emplace(key, parse_value(kv->second)).second) {
            return reject(RejectReason::Malformed, "duplicate param '" + key + "'", key);
        }
    }
    if (!have_action) {
        return reject(RejectReason::Malformed, "block has no action");
    }
    return block;
}

// Typed access to a block's params that remembers which keys were used.
class Params {
public:
    explicit Params(const std::map<std::string, Value>& p) : params_(p) {}

    std::variant<double, Rejection> number(const std::string& key) {
        const auto* v = find(key);
        if (!v) {
            return reject(RejectReason::MissingParam, "missing param '" + key + "'", key);
        }
        if (!v->number) {
            return reject(RejectReason::MistypedParam, "param '" + key + "' must be a number", key);
        }
        return *v->number;
    }

    std::variant<std::uint16_t, Rejection> segment(const std::string& key) {
        auto n = number(key);
        if (auto* r = std::get_if<Rejection>(&n)) {
            return *r;
        }
        const double d = std::get<double>(n);
        if (d != std::floor(d)) {
            return reject(RejectReason::MistypedParam, "param '" + key + "' must be an integer", key);
        }
        if (d < 0 || d > 65535) {
            Rejection r = reject(RejectReason::OutOfRange, "param '" + key + "' outside 0..65535", key);
            r.value = d;
            r.upper = 65535;
            return r;
        }
        return static_cast<std::uint16_t>(d);
    }

    std::variant<std::string, Rejection> string(const std::string& key) {
        const auto* v = find(key);
        if (!v) {
            return reject(RejectReason::MissingParam, "missing param '" + key + "'", key);
        }
        return v->text;
    }

    std::optional<Rejection> leftovers() const {
        for (const auto& [k, v] : params_) {
            if (std::find(used_.begin(), used_.end(), k) == used_.end()) {
                return reject(RejectReason::UnknownParam, "unknown param '" + k + "'", k);
            }
        }
        return std::nullopt;
    }

private:
    const Value* find(const std::string& key) {
        used_.push_back(key);
        const auto it = params_.find(key);
        return it == params_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, Value>& params_;
    std::vector<std::string> used_;
};

template <class T>
bool take(std::variant<T, Rejection>&& v, T& out, std::optional<Rejection>& err) {
    if (auto* r = std::get_if<Rejection>(&v)) {
        if (!err) {
            err = std::move(*r);
        }
        return false;
    }
    out = std::get<T>(std::move(v));
    return true;
}

std::variant<Command, Rejection> build(const Block& block) {
    Params p(block.params);
    std::optional<Rejection> err;
    Command cmd;
    if (block.action == "SetCruiseSpeed") {
        SetCruiseSpeed c;
        take(p.number("speed_mps"), c.speed_mps, err);
        cmd = c;
    } else if (block.action == "SetFollowGap") {
        SetFollowGap c;
        take(p.number("gap_s"), c.gap_s, err);
        cmd = c;
    } else if (block.action == "ApplyAdvisorySpeed") {
        ApplyAdvisorySpeed c;
        take(p.segment("segment_id"), c.segment_id, err);
        take(p.number("speed_mps"), c.speed_mps, err);
        take(p.number("duration_s"), c.duration_s, err);
        cmd = c;
    } else if (block.action == "CancelAdvisory") {
        CancelAdvisory c;
        take(p.segment("segment_id"), c.segment_id, err);
        cmd = c;
    } else if (block.action == "DriverNotice") {
        DriverNotice c;
        std::string severity;
        take(p.string("text"), c.text, err);
        if (take(p.string("severity"), severity, err)) {
            if (severity == "info") {
                c.severity = vehicle::NoticeSeverity::Info;
            } else if (severity == "warn") {
                c.severity = vehicle::NoticeSeverity::Warn;
            } else if (!err) {
                err = reject(RejectReason::MistypedParam, "severity must be info or warn", "severity");
            }
        }
        cmd = c;
    } else {
        return reject(RejectReason::UnknownAction, "unknown action '" + block.action + "'", "action");
    }
    if (!block.has_params && !err) {
        return reject(RejectReason::MissingParam, "block has no params section", "params");
    }
    if (!err) {
        err = p.leftovers();
    }
    if (err) {
        return *err;
    }
    return cmd;
}

// Number of UTF-8 code points, or nullopt for invalid UTF-8 or control characters.
std::optional<std::size_t> printable_length(std::string_view s) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        std::size_t n = 0;
        std::uint32_t cp = 0;
        if (b < 0x80) {
            n = 1;
            cp = b;
        } else if ((b & 0xE0) == 0xC0) {
            n = 2;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            n = 3;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            n = 4;
            cp = b & 0x07;
        } else {
            return std::nullopt;
        }
        if (i + n > s.size()) {
            return std::nullopt;
        }
        for (std::size_t k = 1; k < n; ++k) {
            const auto c = static_cast<unsigned char>(s[i + k]);
            if ((c & 0xC0) != 0x80) {
                return std::nullopt;
            }
            cp = (cp << 6) | (c & 0x3F);
        }
        static constexpr std::uint32_t kMinForLength[] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < kMinForLength[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return std::nullopt;
        }
        if (cp < 0x20 || cp == 0x7F) {
            return std::nullopt;
        }
        i += n;
        ++count;
    }
    return count;
}

Rejection out_of_range(std::string field, double value, double lo, double hi) {
    Rejection r;
    r.reason = RejectReason::OutOfRange;
    r.field = std::move(field);
    r.value = value;
    r.lower = lo;
    r.upper = hi;
    std::ostringstream os;
    os << r.field << " = " << value << " outside [" << lo << ", " << hi << "]";
    r.detail = os.str();
    return r;
}

std::optional<Rejection> check_range(const char* field, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
        return out_of_range(field, v, lo, hi);
    }
    return std::nullopt;
}

std::optional<Rejection> check_envelope(const Command& command, const SafetyEnvelope& env) {
    struct Visitor {
        const SafetyEnvelope& env;
        std::optional<Rejection> operator()(const SetCruiseSpeed& c) const {
            return check_range("speed_mps", c.speed_mps, env.speed_min, env.speed_max);
        }
        std::optional<Rejection> operator()(const SetFollowGap& c) const {
            return check_range("gap_s", c.gap_s, env.gap_min, env.gap_max);
        }
        std::optional<Rejection> operator()(const ApplyAdvisorySpeed& c) const {
            if (auto r = check_range("speed_mps", c.speed_mps, env.speed_min, env.speed_max)) {
                return r;
            }
            // The wire speed is quantized; the quantized value must also fit.
            const double wire_speed = vehicle::speed_field(c.speed_mps) * wire::kSpeedUnitMps;
            if (auto r = check_range("speed_mps", wire_speed, env.speed_min, env.speed_max)) {
                return r;
            }
            if (!(c.duration_s > 0.0)) {
                return out_of_range("duration_s", c.duration_s, 0.0, kMaxDurationS);
            }
            return check_range("duration_s", c.duration_s, 0.0, kMaxDurationS);
        }
        std::optional<Rejection> operator()(const CancelAdvisory&) const { return std::nullopt; }
        std::optional<Rejection> operator()(const DriverNotice& c) const {
            const auto len = printable_length(c.text);
            if (!len || *len == 0) {
                Rejection r;
                r.reason = RejectReason::OutOfRange;
                r.field = "text";
                r.detail = "notice text must be non-empty printable UTF-8";
                return r;
            }
            return check_range("text", static_cast<double>(*len), 1.0, static_cast<double>(env.notice_max_len));
        }
    };
    return std::visit(Visitor{env}, command);
}

}  // namespace

const char* action_name(const Command& command) {
    static constexpr const char* kNames[] = {"SetCruiseSpeed", "SetFollowGap", "ApplyAdvisorySpeed",
                                             "CancelAdvisory", "DriverNotice"};
    return kNames[command.index()];
}

const char* to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::NoBlock: return "no_block";
        case RejectReason::MultipleBlocks: return "multiple_blocks";
        case RejectReason::Malformed: return "malformed";
        case RejectReason::UnknownAction: return "unknown_action";
        case RejectReason::MissingParam: return "missing_param";
        case RejectReason::MistypedParam: return "mistyped_param";
        case RejectReason::UnknownParam: return "unknown_param";
        case RejectReason::OutOfRange: return "out_of_range";
        case RejectReason::RateLimited: return "rate_limited";
    }
    return "?";
}

std::string Rejection::describe() const {
    std::string s = to_string(reason);
    if (!detail.empty()) {
        s += ": " + detail;
    }
    return s;
}

std::variant<Command, Rejection> parse_command(std::string_view text) {
    const auto lines = split_lines(text);
    std::vector<std::string_view> body;
    int blocks = 0;
    bool inside = false;
    bool terminated = false;
    for (const auto line : lines) {
        const auto t = trim(line);
        if (inside) {
            if (t == kCloseFence) {
                inside = false;
                terminated = true;
            } else {
                body.push_back(line);
            }
        } else if (t == kOpenFence) {
            ++blocks;
            inside = true;
            terminated = false;
        }
    }
    if (blocks == 0) {
        return reject(RejectReason::NoBlock, "no metaaction block");
    }
    if (blocks > 1) {
        return reject(RejectReason::MultipleBlocks, std::to_string(blocks) + " metaaction blocks");
    }
    if (!terminated) {
        return reject(RejectReason::Malformed, "unterminated metaaction block");
    }
    auto parsed = parse_block(body);
    if (auto* r = std::get_if<Rejection>(&parsed)) {
        return *r;
    }
    return build(std::get<Block>(parsed));
}

void SafetyEnvelope::validate() const {
    if (!(speed_min < speed_max) || !(gap_min < gap_max) || !(rate_limit_s >= 0.0)) {
        throw std::invalid_argument("safety envelope needs min < max and rate_limit >= 0");
    }
}

std::variant<ValidatedCommand, Rejection> validate(const Command& command, const SafetyEnvelope& envelope,
                                                   std::optional<SimTime> last_accepted_at, SimTime now) {
    if (auto r = check_envelope(command, envelope)) {
        return *r;
    }
    if (last_accepted_at) {
        const double since = to_seconds(now - *last_accepted_at);
        if (since < envelope.rate_limit_s) {
            Rejection r;
            r.reason = RejectReason::RateLimited;
            r.remaining_s = envelope.rate_limit_s - since;
            std::ostringstream os;
            os << "next command allowed in " << r.remaining_s << " s";
            r.detail = os.str();
            return r;
        }
    }
    return ValidatedCommand(command);
}

std::optional<vehicle::AdvisoryOutcome> apply(const ValidatedCommand& validated, vehicle::VehicleState& state,
                                              SimTime now) {
    // A synthesized advisory reuses the active advisory's id on that segment
    // so it replaces (or cancels) it instead of being treated as older.
    const auto local_id = [&](std::uint16_t segment) -> std::uint16_t {
        const auto& a = state.active_advisory;
        return a && a->payload.segment_id == segment ? a->payload.advisory_id : 0;
    };
    const auto& cmd = validated.command();
    if (const auto* c = std::get_if<SetCruiseSpeed>(&cmd)) {
        state.driver_set_speed_mps = c->speed_mps;
    } else if (const auto* c = std::get_if<SetFollowGap>(&cmd)) {
        state.follow_gap_s = c->gap_s;
    } else if (const auto* c = std::get_if<ApplyAdvisorySpeed>(&cmd)) {
        wire::AdvisoryPayload a;
        a.advisory_id = local_id(c->segment_id);
        a.segment_id = c->segment_id;
        a.advisory_speed = vehicle::speed_field(c->speed_mps);
        a.start_minute_of_year = wire::kStartImmediate;
        a.duration_minutes = static_cast<std::uint16_t>(std::ceil(c->duration_s / 60.0));
        return vehicle::on_advisory(state, a, now);
    } else if (const auto* c = std::get_if<CancelAdvisory>(&cmd)) {
        wire::AdvisoryPayload a;
        a.advisory_id = local_id(c->segment_id);
        a.segment_id = c->segment_id;
        a.advisory_speed = wire::kSpeedUnavailable;
        return vehicle::on_advisory(state, a, now);
    } else if (const auto* c = std::get_if<DriverNotice>(&cmd)) {
        state.notices.push_back({now, c->text, c->severity});
    }
    return std::nullopt;
}

CommandGate::CommandGate(SafetyEnvelope envelope) : envelope_(envelope) { envelope_.validate(); }

CommandGate::Result CommandGate::submit(std::string_view model_output, vehicle::VehicleState& state, SimTime now) {
    Result result;
    const auto fail = [&](Rejection r) {
        ++rejections_[r.reason];
        result.rejection = std::move(r);
        return result;
    };
    auto parsed = parse_command(model_output);
    if (auto* r = std::get_if<Rejection>(&parsed)) {
        return fail(std::move(*r));
    }
    auto checked = validate(std::get<Command>(parsed), envelope_, last_accepted_, now);
    if (auto* r = std::get_if<Rejection>(&checked)) {
        return fail(std::move(*r));
    }
    const auto& ok = std::get<ValidatedCommand>(checked);
    result.advisory_outcome = apply(ok, state, now);
    result.applied = ok.command();
    last_accepted_ = now;
    ++accepted_;
    return result;
}

}  // namespace cda::meta
