#include <parrot/metrics.hpp>

#include <parrot/errors.hpp>

namespace parrot {

CostLedger expected_costs(Scheme scheme, int total_clients, int concurrent_clients, int num_devices,
                          const CostUnits& u) {
    const std::int64_t m = total_clients;
    const std::int64_t mp = concurrent_clients;
    const std::int64_t k = num_devices;
    CostLedger c;
    c.scheme = scheme;
    std::int64_t states = 0;
    switch (scheme) {
    case Scheme::Sp:
        c.peak_live_model_replicas = 1;
        states = 1;
        c.state_bytes_disk = u.s_m * mp;
        break;
    case Scheme::RwDist:
        c.trips_up = c.trips_down = mp;
        c.bytes_avg_params = u.s_a * mp;
        c.bytes_special_params = u.s_e * mp;
        c.peak_live_model_replicas = m;
        states = mp;
        break;
    case Scheme::SdDist:
        c.trips_up = c.trips_down = mp;
        c.bytes_avg_params = u.s_a * mp;
        c.bytes_special_params = u.s_e * mp;
        c.peak_live_model_replicas = mp;
        states = mp;
        break;
    case Scheme::FaDist:
        c.trips_up = c.trips_down = mp;
        c.bytes_avg_params = u.s_a * mp;
        c.bytes_special_params = u.s_e * mp;
        c.peak_live_model_replicas = k;
        states = k;
        break;
    case Scheme::Parrot:
        c.trips_up = c.trips_down = k;
        c.bytes_avg_params = u.s_a * k;
        c.bytes_special_params = u.s_e * mp;
        c.peak_live_model_replicas = k;
        states = k;
        break;
    }
    if (u.s_d > 0) {
        c.peak_live_state_entries = states;
        c.state_bytes_disk += u.s_d * m;
    }
    return c;
}

std::string ReconcileReport::to_string() const {
    if (mismatches.empty()) {
        return "ok";
    }
    std::string s;
    for (const auto& m : mismatches) {
        s += (s.empty() ? "" : "; ") + m;
    }
    return s;
}

ReconcileReport reconcile(const CostLedger& observed, const CostLedger& expected) {
    if (observed.scheme != expected.scheme) {
        throw Error("reconcile: ledgers are for different schemes");
    }
    ReconcileReport r;
    auto check = [&r](const char* name, std::int64_t obs, std::int64_t exp, bool upper_bound) {
        if (obs < 0) {
            r.mismatches.push_back(std::string(name) + " is negative (" + std::to_string(obs) + ")");
        } else if (upper_bound ? obs > exp : obs != exp) {
            r.mismatches.push_back(std::string(name) + ": observed " + std::to_string(obs) +
                                   (upper_bound ? ", bound " : ", expected ") + std::to_string(exp));
        }
    };
    check("trips_up", observed.trips_up, expected.trips_up, false);
    check("trips_down", observed.trips_down, expected.trips_down, false);
    check("bytes_avg_params", observed.bytes_avg_params, expected.bytes_avg_params,
          observed.idle_devices > 0);
    check("bytes_special_params", observed.bytes_special_params, expected.bytes_special_params, false);
    check("peak_live_model_replicas", observed.peak_live_model_replicas,
          expected.peak_live_model_replicas, true);
    check("peak_live_state_entries", observed.peak_live_state_entries, expected.peak_live_state_entries,
          true);
    check("state_bytes_disk", observed.state_bytes_disk, expected.state_bytes_disk, true);
    for (const auto& [name, v] : {std::pair{"payload_bytes_up", observed.payload_bytes_up},
                                  std::pair{"payload_bytes_down", observed.payload_bytes_down},
                                  std::pair{"idle_devices", observed.idle_devices}}) {
        if (v < 0) {
            r.mismatches.push_back(std::string(name) + " is negative (" + std::to_string(v) + ")");
        }
    }
    return r;
}

}  // namespace parrot
