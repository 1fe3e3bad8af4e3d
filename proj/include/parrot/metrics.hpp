#pragma once

#include <parrot/config.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace parrot {

// Per-round cost counters. Byte counters cover tensor payload only; message
// framing (names, shapes, client lists) is excluded.
struct CostLedger {
    int round = 0;
    Scheme scheme = Scheme::Parrot;
    std::int64_t trips_up = 0;
    std::int64_t trips_down = 0;
    std::int64_t bytes_avg_params = 0;      // uplink averaged tensors (s_a role)
    std::int64_t bytes_special_params = 0;  // uplink collected tensors (s_e role)
    std::int64_t peak_live_model_replicas = 0;
    std::int64_t peak_live_state_entries = 0;
    std::int64_t state_bytes_disk = 0;
    // Whole message payloads, framing included.
    std::int64_t payload_bytes_up = 0;
    std::int64_t payload_bytes_down = 0;
    // Devices that received an empty client list (they upload no tensors).
    std::int64_t idle_devices = 0;
};

// Unit sizes in bytes: one model replica, one client's averaged and
// collected tensors, one client's state record.
struct CostUnits {
    std::int64_t s_m = 0;
    std::int64_t s_a = 0;
    std::int64_t s_e = 0;
    std::int64_t s_d = 0;
};

// Cost model per scheme, with the state manager enabled.
//
//   scheme   trips  avg bytes  special  replicas  live states  disk
//   sp       0      0          0        1         1            s_m M_p + s_d M
//   rw-dist  M_p    s_a M_p    s_e M_p  M         M_p          s_d M
//   sd-dist  M_p    s_a M_p    s_e M_p  M_p       M_p          s_d M
//   fa-dist  M_p    s_a M_p    s_e M_p  K         K            s_d M
//   parrot   K      s_a K      s_e M_p  K         K            s_d M
//
// Trips are counted once per direction. Live-state and disk terms are zero
// when s_d = 0.
CostLedger expected_costs(Scheme scheme, int total_clients, int concurrent_clients, int num_devices,
                          const CostUnits& units);

struct ReconcileReport {
    std::vector<std::string> mismatches;
    bool ok() const noexcept { return mismatches.empty(); }
    std::string to_string() const;
};

// Trip counts and special-param bytes must match exactly. Averaged bytes
// must match exactly unless devices were idle, in which case they may be
// lower. Replicas, live states and disk bytes are upper bounds.
ReconcileReport reconcile(const CostLedger& observed, const CostLedger& expected);

}  // namespace parrot
