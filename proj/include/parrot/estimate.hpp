#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace parrot {

// One observed task: device k ran client m in round r on N_m samples.
struct TimingRecord {
    int device_id = 0;
    int client_id = 0;
    int round = 0;
    std::int64_t sample_count = 0;
    double reported_seconds = 0.0;

    bool operator==(const TimingRecord&) const = default;
};

// Append-only log of task timings, indexed by device.
class TimingHistory {
public:
    // Throws Error on an invalid record (non-positive time or samples).
    void record(const TimingRecord& rec);

    std::size_t size() const noexcept { return records_.size(); }
    const std::vector<TimingRecord>& records() const noexcept { return records_; }

    // Records of `device_id` with round in [first_round, last_round].
    std::vector<TimingRecord> query(int device_id, int first_round, int last_round) const;
    std::vector<TimingRecord> round_records(int round) const;

    // Tab-separated: round, device, client, samples, seconds.
    void export_tsv(const std::filesystem::path& path) const;

private:
    std::vector<TimingRecord> records_;
    std::vector<std::vector<std::size_t>> by_device_;
};

enum class FitStatus {
    Ok,
    DegenerateDesign,  // every N_m equal: t = mean(T)/mean(N), b = 0
    InsufficientData,  // fewer than two records
};

// Per-device linear workload model T = N * t_sample + b.
struct WorkloadFit {
    int device_id = 0;
    double t_sample = 0.0;
    double b = 0.0;
    std::int64_t records_used = 0;
    std::optional<int> window;  // nullopt = all history
    FitStatus status = FitStatus::InsufficientData;
    int first_round = 0;  // round range the fit drew from
    int last_round = -1;

    bool valid() const noexcept { return status != FitStatus::InsufficientData; }
};

// Ordinary least squares of reported seconds on sample count over rounds
// [r - window, r - 1] (or [0, r - 1] when window is nullopt).
WorkloadFit fit_device(const TimingHistory& history, int device_id, std::optional<int> window,
                       int current_round);

// Closed-form OLS on explicit points; shared by fit_device.
WorkloadFit fit_points(std::span<const TimingRecord> records);

// max(0, N * t_sample + b).
double predict(const WorkloadFit& fit, std::int64_t sample_count) noexcept;
bool prediction_clamped(const WorkloadFit& fit, std::int64_t sample_count) noexcept;

// Mean over the round's records of |predicted - reported| / reported, using
// each record's device fit. Records whose device has no valid fit are
// skipped; returns nullopt if nothing was scored.
std::optional<double> estimation_error(const TimingHistory& history, std::span<const WorkloadFit> fits,
                                       int round);

}  // namespace parrot
