#include <parrot/config.hpp>

#include <parrot/errors.hpp>
#include <parrot/json_util.hpp>

#include <fstream>

namespace parrot {

namespace {

[[noreturn]] void invalid(const std::string& msg) {
    throw ConfigError("sim: " + msg);
}

}  // namespace

std::string_view to_string(Scheme s) noexcept {
    switch (s) {
    case Scheme::Sp: return "sp";
    case Scheme::SdDist: return "sd-dist";
    case Scheme::FaDist: return "fa-dist";
    case Scheme::Parrot: return "parrot";
    case Scheme::RwDist: return "rw-dist";
    }
    return "?";
}

std::string_view to_string(SchedulingMode m) noexcept {
    switch (m) {
    case SchedulingMode::Uniform: return "uniform";
    case SchedulingMode::FullHistory: return "full-history";
    case SchedulingMode::TimeWindow: return "time-window";
    case SchedulingMode::Random: return "random";
    }
    return "?";
}

std::string_view to_string(ClockMode c) noexcept {
    return c == ClockMode::Virtual ? "virtual" : "real";
}

Scheme parse_scheme(std::string_view s) {
    for (auto v : {Scheme::Sp, Scheme::SdDist, Scheme::FaDist, Scheme::Parrot, Scheme::RwDist}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    throw ConfigError("unknown scheme '" + std::string(s) + "' (sp, sd-dist, fa-dist, parrot)");
}

SchedulingMode parse_scheduling(std::string_view s) {
    if (s == "none" || s == "none-uniform") {
        return SchedulingMode::Uniform;
    }
    for (auto v : {SchedulingMode::Uniform, SchedulingMode::FullHistory, SchedulingMode::TimeWindow,
                   SchedulingMode::Random}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    throw ConfigError("unknown scheduling mode '" + std::string(s) +
                      "' (uniform, full-history, time-window, random)");
}

ClockMode parse_clock(std::string_view s) {
    if (s == "virtual") {
        return ClockMode::Virtual;
    }
    if (s == "real") {
        return ClockMode::Real;
    }
    throw ConfigError("unknown clock '" + std::string(s) + "' (virtual, real)");
}

void SimConfig::validate() const {
    if (total_clients < 1) invalid("total_clients must be positive");
    if (concurrent_clients < 1) invalid("concurrent_clients must be positive");
    if (num_devices < 1) invalid("num_devices must be positive");
    if (total_rounds < 1) invalid("total_rounds must be positive");
    if (local_epochs < 1) invalid("local_epochs must be positive");
    if (warmup_rounds < 0) invalid("warmup_rounds must be non-negative");
    if (batch_size < 0) invalid("batch_size must be non-negative (0 = full batch)");
    if (!(learning_rate > 0.0)) invalid("learning_rate must be positive");
    if (!(trip_overhead_seconds >= 0.0)) invalid("trip_overhead_seconds must be non-negative");
    if (concurrent_clients > total_clients) {
        invalid("concurrent_clients (" + std::to_string(concurrent_clients) +
                ") exceeds total_clients (" + std::to_string(total_clients) + ")");
    }
    if (warmup_rounds >= total_rounds) {
        invalid("warmup_rounds must be smaller than total_rounds");
    }
    if (scheduling == SchedulingMode::TimeWindow && time_window && *time_window < 1) {
        invalid("time_window must be >= 1 for time-window scheduling");
    }
    switch (scheme) {
    case Scheme::Sp:
        if (num_devices != 1) invalid("scheme sp requires num_devices = 1");
        break;
    case Scheme::SdDist:
        if (num_devices != concurrent_clients) {
            invalid("scheme sd-dist requires num_devices = concurrent_clients");
        }
        break;
    case Scheme::FaDist:
    case Scheme::Parrot:
        if (num_devices > concurrent_clients) {
            invalid("num_devices must not exceed concurrent_clients");
        }
        break;
    case Scheme::RwDist:
        invalid("scheme rw-dist is analytic only and cannot be executed");
    }
}

std::optional<int> SimConfig::estimation_window() const noexcept {
    if (scheduling == SchedulingMode::TimeWindow) {
        return time_window;
    }
    return std::nullopt;
}

SimConfig sim_config_from_json(const nlohmann::json& j) {
    using namespace json_util;
    constexpr std::string_view where = "sim";
    require_object(j, where);
    require_known_keys(j,
                       {"total_clients", "concurrent_clients", "num_devices", "total_rounds",
                        "local_epochs", "warmup_rounds", "time_window", "seed", "scheme",
                        "scheduling", "clock", "batch_size", "learning_rate",
                        "trip_overhead_seconds"},
                       where);
    SimConfig cfg;
    cfg.total_clients = get_required<int>(j, "total_clients", where);
    cfg.concurrent_clients = get_or<int>(j, "concurrent_clients", cfg.total_clients, where);
    cfg.num_devices = get_or<int>(j, "num_devices", cfg.num_devices, where);
    cfg.total_rounds = get_required<int>(j, "total_rounds", where);
    cfg.local_epochs = get_or<int>(j, "local_epochs", cfg.local_epochs, where);
    cfg.warmup_rounds = get_or<int>(j, "warmup_rounds", cfg.warmup_rounds, where);
    if (auto it = j.find("time_window"); it != j.end()) {
        if (it->is_string()) {
            if (it->get<std::string>() != "all-history") {
                throw ConfigError("sim.time_window: expected a positive integer or \"all-history\"");
            }
            cfg.time_window = std::nullopt;
        } else if (it->is_number_integer()) {
            cfg.time_window = it->get<int>();
        } else {
            throw ConfigError("sim.time_window: expected a positive integer or \"all-history\"");
        }
    }
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, where);
    cfg.scheme = parse_scheme(get_or<std::string>(j, "scheme", "parrot", where));
    cfg.scheduling = parse_scheduling(get_or<std::string>(j, "scheduling", "time-window", where));
    cfg.clock = parse_clock(get_or<std::string>(j, "clock", "virtual", where));
    cfg.batch_size = get_or<int>(j, "batch_size", cfg.batch_size, where);
    cfg.learning_rate = get_or<double>(j, "learning_rate", cfg.learning_rate, where);
    cfg.trip_overhead_seconds =
        get_or<double>(j, "trip_overhead_seconds", cfg.trip_overhead_seconds, where);
    cfg.validate();
    return cfg;
}

nlohmann::json sim_config_to_json(const SimConfig& cfg) {
    nlohmann::json j;
    j["total_clients"] = cfg.total_clients;
    j["concurrent_clients"] = cfg.concurrent_clients;
    j["num_devices"] = cfg.num_devices;
    j["total_rounds"] = cfg.total_rounds;
    j["local_epochs"] = cfg.local_epochs;
    j["warmup_rounds"] = cfg.warmup_rounds;
    if (cfg.time_window) {
        j["time_window"] = *cfg.time_window;
    } else {
        j["time_window"] = "all-history";
    }
    j["seed"] = cfg.seed;
    j["scheme"] = std::string(to_string(cfg.scheme));
    j["scheduling"] = std::string(to_string(cfg.scheduling));
    j["clock"] = std::string(to_string(cfg.clock));
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["trip_overhead_seconds"] = cfg.trip_overhead_seconds;
    return j;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
    return sim_config_from_json(json_util::read_json_file(path.string()));
}

namespace json_util {

void require_known_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view where) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError(std::string(where) + "." + key + ": unknown key");
        }
    }
}

void require_object(const nlohmann::json& j, std::string_view where) {
    if (!j.is_object()) {
        throw ConfigError(std::string(where) + ": expected an object");
    }
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("parse error in '" + path + "': " + e.what());
    }
}

}  // namespace json_util

}  // namespace parrot
