#include <parrot/estimate.hpp>

#include <parrot/errors.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace parrot {

void TimingHistory::record(const TimingRecord& rec) {
    if (!(rec.reported_seconds > 0.0) || !std::isfinite(rec.reported_seconds)) {
        throw Error("timing record needs a positive finite time (client " +
                    std::to_string(rec.client_id) + ", round " + std::to_string(rec.round) + ")");
    }
    if (rec.sample_count < 1 || rec.device_id < 0) {
        throw Error("timing record needs sample_count >= 1 and a device id");
    }
    const auto d = static_cast<std::size_t>(rec.device_id);
    if (by_device_.size() <= d) {
        by_device_.resize(d + 1);
    }
    by_device_[d].push_back(records_.size());
    records_.push_back(rec);
}

std::vector<TimingRecord> TimingHistory::query(int device_id, int first_round, int last_round) const {
    std::vector<TimingRecord> out;
    if (device_id < 0 || static_cast<std::size_t>(device_id) >= by_device_.size()) {
        return out;
    }
    for (auto i : by_device_[static_cast<std::size_t>(device_id)]) {
        const auto& rec = records_[i];
        if (rec.round >= first_round && rec.round <= last_round) {
            out.push_back(rec);
        }
    }
    return out;
}

std::vector<TimingRecord> TimingHistory::round_records(int round) const {
    std::vector<TimingRecord> out;
    for (const auto& rec : records_) {
        if (rec.round == round) {
            out.push_back(rec);
        }
    }
    return out;
}

void TimingHistory::export_tsv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write timing history '" + path.string() + "'");
    }
    out.precision(17);
    out << "round\tdevice\tclient\tsamples\tseconds\n";
    for (const auto& r : records_) {
        out << r.round << '\t' << r.device_id << '\t' << r.client_id << '\t' << r.sample_count << '\t'
            << r.reported_seconds << '\n';
    }
}

WorkloadFit fit_points(std::span<const TimingRecord> records) {
    WorkloadFit fit;
    fit.records_used = static_cast<std::int64_t>(records.size());
    if (records.size() < 2) {
        fit.status = FitStatus::InsufficientData;
        return fit;
    }
    // Two-pass centered sums.
    const double n = static_cast<double>(records.size());
    double mean_n = 0.0;
    double mean_t = 0.0;
    for (const auto& r : records) {
        mean_n += static_cast<double>(r.sample_count);
        mean_t += r.reported_seconds;
    }
    mean_n /= n;
    mean_t /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& r : records) {
        const double dx = static_cast<double>(r.sample_count) - mean_n;
        sxx += dx * dx;
        sxy += dx * (r.reported_seconds - mean_t);
    }
    if (sxx == 0.0) {
        fit.status = FitStatus::DegenerateDesign;
        fit.t_sample = mean_t / mean_n;
        fit.b = 0.0;
        return fit;
    }
    fit.status = FitStatus::Ok;
    fit.t_sample = sxy / sxx;
    fit.b = mean_t - fit.t_sample * mean_n;
    return fit;
}

WorkloadFit fit_device(const TimingHistory& history, int device_id, std::optional<int> window,
                       int current_round) {
    const int last = current_round - 1;
    const int first = window ? std::max(0, current_round - *window) : 0;
    const auto records = history.query(device_id, first, last);
    WorkloadFit fit = fit_points(records);
    fit.device_id = device_id;
    fit.window = window;
    fit.first_round = first;
    fit.last_round = last;
    return fit;
}

double predict(const WorkloadFit& fit, std::int64_t sample_count) noexcept {
    const double t = static_cast<double>(sample_count) * fit.t_sample + fit.b;
    return t > 0.0 ? t : 0.0;
}

bool prediction_clamped(const WorkloadFit& fit, std::int64_t sample_count) noexcept {
    return static_cast<double>(sample_count) * fit.t_sample + fit.b < 0.0;
}

std::optional<double> estimation_error(const TimingHistory& history, std::span<const WorkloadFit> fits,
                                       int round) {
    double total = 0.0;
    std::int64_t scored = 0;
    for (const auto& rec : history.round_records(round)) {
        const auto d = static_cast<std::size_t>(rec.device_id);
        if (d >= fits.size() || !fits[d].valid()) {
            continue;
        }
        total += std::abs(predict(fits[d], rec.sample_count) - rec.reported_seconds) / rec.reported_seconds;
        ++scored;
    }
    if (scored == 0) {
        return std::nullopt;
    }
    return total / static_cast<double>(scored);
}

}  // namespace parrot
