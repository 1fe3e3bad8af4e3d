#include <parrot/engine.hpp>

#include <parrot/errors.hpp>
#include <parrot/rng.hpp>
#include <parrot/trainer.hpp>
#include <parrot/transport.hpp>
#include <parrot/wire.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace parrot {

double report_time(double measured_seconds, const DeviceModel& device, int round, int total_rounds) {
    double t = measured_seconds * (1.0 + device.hetero_ratio);
    if (device.dynamic) {
        t *= 1.0 + std::cos(3.14 * static_cast<double>(round) / static_cast<double>(total_rounds) +
                            static_cast<double>(device.device_id));
    }
    return t;
}

double virtual_task_seconds(const DeviceModel& device, std::int64_t samples, std::uint64_t seed, int round,
                            int client_id) {
    const double mean = static_cast<double>(samples) * device.t_true + device.b_true;
    if (device.noise == 0.0) {
        return mean;
    }
    auto rng = make_rng(seed, stream::kTimingNoise,
                        {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client_id)});
    std::normal_distribution<double> z(0.0, 1.0);
    // Keep the time positive under large noise.
    return std::max(mean * (1.0 + device.noise * z(rng)), 1e-3 * mean);
}

std::vector<DeviceModel> make_device_models(int num_devices, const std::vector<double>& hetero_ratios,
                                            bool dynamic, double t_true, double b_true, double noise) {
    std::vector<DeviceModel> out;
    for (int k = 0; k < num_devices; ++k) {
        DeviceModel d;
        d.device_id = k;
        d.hetero_ratio = hetero_ratios.empty() ? 0.0 : hetero_ratios[static_cast<std::size_t>(k) % hetero_ratios.size()];
        d.dynamic = dynamic;
        d.t_true = t_true;
        d.b_true = b_true;
        d.noise = noise;
        out.push_back(d);
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Concurrent model replicas held by executors.
class ReplicaGauge {
public:
    void acquire() {
        const auto now = ++live_;
        auto peak = peak_.load();
        while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
        }
    }
    void release() { --live_; }
    void reset() { peak_ = live_.load(); }
    std::int64_t peak() const { return peak_.load(); }

private:
    std::atomic<std::int64_t> live_{0};
    std::atomic<std::int64_t> peak_{0};
};

struct TaskTiming {
    int client_id = 0;
    std::int64_t samples = 0;
    double measured = 0.0;
    double reported = 0.0;
};

struct DeviceWork {
    DevicePartial partial;
    std::vector<TaskTiming> timings;
};

std::vector<std::byte> encode_assignment(const std::vector<std::byte>& global_bytes,
                                         std::span<const int> clients) {
    wire::Writer w;
    w.bytes() = global_bytes;
    w.u32(static_cast<std::uint32_t>(clients.size()));
    for (int c : clients) {
        w.i64(c);
    }
    return std::move(w).take();
}

struct DecodedReport {
    DeviceWork work;
    std::size_t payload_bytes = 0;
};

DecodedReport decode_report(const Message& msg) {
    wire::Reader r(msg.payload);
    if (r.u8() != 0) {
        throw DeviceFailure(msg.device_id, r.str());
    }
    DecodedReport out;
    out.payload_bytes = msg.payload.size();
    out.work.partial = decode_partial(r);
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        TaskTiming t;
        t.client_id = static_cast<int>(r.i64());
        t.samples = r.i64();
        t.measured = r.f64();
        t.reported = r.f64();
        out.work.timings.push_back(t);
    }
    if (!r.at_end()) {
        throw WireFormatError("trailing bytes in device report");
    }
    return out;
}

}  // namespace

struct Simulation::Impl {
    SimulationInputs in;
    ParamBundle global;
    TimingHistory history;
    int next_round = 0;
    bool failed = false;

    std::unique_ptr<StateStore> store;
    ReplicaGauge replicas;

    std::unique_ptr<InProcessTransport> transport;
    std::unique_ptr<Endpoint> server;
    std::vector<std::thread> executors;

    mutable std::mutex capture_mu;
    std::map<int, ClientState> captured;

    CostUnits units;

    explicit Impl(SimulationInputs inputs) : in(std::move(inputs)) {}

    int executor_count() const {
        return in.cfg.scheme == Scheme::Sp ? 0 : in.cfg.num_devices;
    }

    void open_store() {
        if (!in.plugin->is_stateful()) {
            return;
        }
        const auto* plugin = in.plugin;
        const auto* initial = &in.initial_global;
        store = std::make_unique<StateStore>(in.state_dir, [plugin, initial](int client_id) {
            return plugin->default_state(client_id, *initial);
        });
    }

    // Device_Executes: runs `clients` in order and folds their results.
    DeviceWork execute_clients(const DeviceModel& device, int round, const ParamBundle& g,
                               std::span<const int> clients) {
        DeviceWork work;
        work.partial.device_id = device.device_id;
        const auto& cfg = in.cfg;
        TrainOptions opts{cfg.local_epochs, cfg.batch_size, cfg.learning_rate, cfg.seed, round};
        const bool stateful = in.plugin->is_stateful();
        for (int c : clients) {
            const auto& profile = in.profiles.at(static_cast<std::size_t>(c));
            std::optional<ClientState> state;
            if (stateful) {
                state = store->load_state(c);
            }
            replicas.acquire();
            TrainReport rep;
            try {
                rep = client_execute(*in.plugin, profile, *in.train, g, state ? &*state : nullptr, opts);
            } catch (...) {
                replicas.release();
                if (stateful) {
                    store->release(c);
                }
                throw;
            }
            replicas.release();
            if (stateful) {
                if (rep.new_state) {
                    store->save_state(c, round, rep.new_state->payload);
                    if (in.capture_states) {
                        auto saved = *rep.new_state;
                        saved.client_id = c;
                        saved.round_written = round;
                        std::lock_guard lock(capture_mu);
                        captured[c] = std::move(saved);
                    }
                } else {
                    store->release(c);
                }
            }
            local_fold(work.partial, rep.client_result, c);

            const double measured = cfg.clock == ClockMode::Virtual
                                        ? virtual_task_seconds(device, profile.sample_count, cfg.seed, round, c)
                                        : rep.measured_seconds;
            const double reported = report_time(measured, device, round, cfg.total_rounds);
            if (cfg.clock == ClockMode::Real && reported > measured) {
                std::this_thread::sleep_for(std::chrono::duration<double>(reported - measured));
            }
            work.timings.push_back(TaskTiming{c, profile.sample_count, measured, reported});
        }
        return work;
    }

    void executor_loop(int k, std::unique_ptr<Endpoint> ep) {
        const DeviceModel device = in.devices.at(static_cast<std::size_t>(k));
        while (auto msg = ep->receive()) {
            if (msg->kind == MessageKind::Shutdown) {
                break;
            }
            wire::Writer w;
            try {
                wire::Reader r(msg->payload);
                const ParamBundle g = r.bundle();
                std::vector<int> clients(r.u32());
                for (auto& c : clients) {
                    c = static_cast<int>(r.i64());
                }
                const auto work = execute_clients(device, msg->round, g, clients);
                w.u8(0);
                encode_partial(w, work.partial);
                w.u32(static_cast<std::uint32_t>(work.timings.size()));
                for (const auto& t : work.timings) {
                    w.i64(t.client_id);
                    w.i64(t.samples);
                    w.f64(t.measured);
                    w.f64(t.reported);
                }
            } catch (const std::exception& e) {
                w = wire::Writer{};
                w.u8(1);
                w.str(e.what());
            }
            ep->send(Message{MessageKind::DeviceReport, msg->round, k, std::move(w).take()});
        }
    }

    void start_executors() {
        const int k = executor_count();
        if (k == 0) {
            return;
        }
        if (in.devices.size() < static_cast<std::size_t>(k)) {
            throw ConfigError("need a device model for each of the " + std::to_string(k) + " devices");
        }
        transport = std::make_unique<InProcessTransport>(k);
        server = transport->connect_server();
        for (int d = 0; d < k; ++d) {
            executors.emplace_back(&Impl::executor_loop, this, d, transport->connect_device(d));
        }
    }

    void stop_executors() {
        for (std::size_t d = 0; d < executors.size(); ++d) {
            server->send(Message{MessageKind::Shutdown, next_round, static_cast<int>(d), {}});
        }
        for (auto& t : executors) {
            t.join();
        }
        executors.clear();
        if (server) {
            server->close();
        }
    }

    void note_units(const DevicePartial& p) {
        if (p.clients_folded.empty()) {
            return;
        }
        units.s_a = std::max(units.s_a, static_cast<std::int64_t>(p.averaged_bytes()));
        // Every client emits the same collected tensors, so the per-client share is exact.
        units.s_e = std::max(units.s_e, static_cast<std::int64_t>(p.collected_bytes() / p.clients_folded.size()));
    }

    // Records one device report into the round's accumulators.
    void absorb(const DecodedReport& rep, CostLedger& ledger) {
        ++ledger.trips_up;
        ledger.payload_bytes_up += static_cast<std::int64_t>(rep.payload_bytes);
        ledger.bytes_avg_params += static_cast<std::int64_t>(rep.work.partial.averaged_bytes());
        ledger.bytes_special_params += static_cast<std::int64_t>(rep.work.partial.collected_bytes());
        note_units(rep.work.partial);
    }

    static void push_records(const DeviceWork& w, int device_id, int round, std::vector<TimingRecord>& records) {
        for (const auto& t : w.timings) {
            records.push_back(TimingRecord{device_id, t.client_id, round, t.samples, t.reported});
        }
    }

    double task_time_sum(const DeviceWork& w) const {
        double s = 0.0;
        for (const auto& t : w.timings) {
            s += t.reported;
        }
        return s;
    }

    void send_assignment(int round, int device, const std::vector<std::byte>& global_bytes,
                         std::span<const int> clients, CostLedger& ledger) {
        auto payload = encode_assignment(global_bytes, clients);
        ++ledger.trips_down;
        ledger.payload_bytes_down += static_cast<std::int64_t>(payload.size());
        server->send(Message{MessageKind::TaskAssignment, round, device, std::move(payload)});
    }

    Message receive_report() {
        auto msg = server->receive();
        if (!msg || msg->kind != MessageKind::DeviceReport) {
            throw Error("server channel closed while waiting for device reports");
        }
        return std::move(*msg);
    }

    void run_sp(int round, const ClientSelection& sel, RoundOutcome& out, std::vector<DevicePartial>& partials,
                std::vector<TimingRecord>& records) {
        const DeviceModel device = in.devices.empty() ? DeviceModel{} : in.devices.front();
        auto work = execute_clients(device, round, global, sel.selected);
        note_units(work.partial);
        push_records(work, 0, round, records);
        out.device_loads = {task_time_sum(work)};
        partials.push_back(std::move(work.partial));
    }

    void run_static(int round, const ClientSelection& sel, RoundOutcome& out,
                    std::vector<DevicePartial>& partials, std::vector<TimingRecord>& records) {
        const auto& cfg = in.cfg;
        const int k = cfg.num_devices;
        RoundPlan plan;
        std::vector<WorkloadFit> fits;
        if (cfg.scheme == Scheme::Parrot) {
            const auto t0 = Clock::now();
            for (int d = 0; d < k; ++d) {
                fits.push_back(fit_device(history, d, cfg.estimation_window(), round));
            }
            const auto t1 = Clock::now();
            plan = schedule(round, sel, fits, in.profiles,
                            ScheduleOptions{k, cfg.warmup_rounds, cfg.scheduling, cfg.seed});
            out.fit_seconds = std::chrono::duration<double>(t1 - t0).count();
            out.schedule_seconds = seconds_since(t1);
        } else {
            plan = uniform_division(round, sel.selected, k);
        }

        wire::Writer gw;
        gw.bundle(global);
        const auto global_bytes = std::move(gw).take();
        for (int d = 0; d < k; ++d) {
            const auto& clients = plan.assignments[static_cast<std::size_t>(d)];
            if (clients.empty()) {
                ++out.ledger.idle_devices;
            }
            send_assignment(round, d, global_bytes, clients, out.ledger);
        }

        // Barrier: the fold waits for every device's report.
        std::vector<std::optional<DeviceWork>> by_device(static_cast<std::size_t>(k));
        for (int received = 0; received < k; ++received) {
            auto msg = receive_report();
            auto rep = decode_report(msg);
            absorb(rep, out.ledger);
            by_device[static_cast<std::size_t>(msg.device_id)] = std::move(rep.work);
        }
        out.device_loads.assign(static_cast<std::size_t>(k), 0.0);
        for (int d = 0; d < k; ++d) {
            auto& w = *by_device[static_cast<std::size_t>(d)];
            out.device_loads[static_cast<std::size_t>(d)] = 2.0 * cfg.trip_overhead_seconds + task_time_sum(w);
            push_records(w, d, round, records);
            partials.push_back(std::move(w.partial));
        }
        pending_fits = std::move(fits);
        out.plan = std::move(plan);
    }

    // Work pulling: one client per assignment, the next client goes to the
    // device that would become free first in simulated time.
    void run_pulling(int round, const ClientSelection& sel, RoundOutcome& out,
                     std::vector<DevicePartial>& partials, std::vector<TimingRecord>& records) {
        const auto& cfg = in.cfg;
        const auto k = static_cast<std::size_t>(cfg.num_devices);
        const double trip = 2.0 * cfg.trip_overhead_seconds;
        wire::Writer gw;
        gw.bundle(global);
        const auto global_bytes = std::move(gw).take();

        std::vector<double> clock(k, 0.0);
        std::vector<std::optional<double>> started(k);  // set while a task is in flight
        std::size_t next = 0;
        std::size_t in_flight = 0;
        const auto& tasks = sel.selected;

        while (next < tasks.size() || in_flight > 0) {
            if (next < tasks.size()) {
                std::optional<std::size_t> idle;
                for (std::size_t d = 0; d < k; ++d) {
                    if (!started[d] && (!idle || clock[d] < clock[*idle])) {
                        idle = d;
                    }
                }
                bool dispatch = idle.has_value();
                if (dispatch && cfg.clock == ClockMode::Virtual) {
                    // A busy device finishes strictly after it started; the idle
                    // device is certainly earliest only if it is free by then.
                    for (std::size_t d = 0; d < k; ++d) {
                        if (started[d] && *started[d] < clock[*idle]) {
                            dispatch = false;
                        }
                    }
                }
                if (dispatch) {
                    const int c = tasks[next++];
                    send_assignment(round, static_cast<int>(*idle), global_bytes, std::span<const int>(&c, 1),
                                    out.ledger);
                    started[*idle] = clock[*idle];
                    ++in_flight;
                    continue;
                }
            }
            auto msg = receive_report();
            auto rep = decode_report(msg);
            absorb(rep, out.ledger);
            push_records(rep.work, msg.device_id, round, records);
            const auto d = static_cast<std::size_t>(msg.device_id);
            clock[d] = *started[d] + trip + task_time_sum(rep.work);
            started[d].reset();
            --in_flight;
            partials.push_back(std::move(rep.work.partial));
        }
        // Fold in client order so the result does not depend on arrival order.
        std::sort(partials.begin(), partials.end(), [](const DevicePartial& a, const DevicePartial& b) {
            return a.clients_folded.front() < b.clients_folded.front();
        });
        std::sort(records.begin(), records.end(),
                  [](const TimingRecord& a, const TimingRecord& b) { return a.client_id < b.client_id; });
        out.device_loads = clock;
    }

    std::vector<WorkloadFit> pending_fits;

    RoundOutcome step() {
        if (failed) {
            throw Error("simulation stopped after a device failure");
        }
        if (next_round >= in.cfg.total_rounds) {
            throw Error("simulation already ran all " + std::to_string(in.cfg.total_rounds) + " rounds");
        }
        const auto& cfg = in.cfg;
        const int round = next_round;
        const auto t0 = Clock::now();

        RoundOutcome out;
        out.round = round;
        out.ledger.round = round;
        out.ledger.scheme = cfg.scheme;
        replicas.reset();
        if (store) {
            store->reset_peak();
        }
        {
            std::lock_guard lock(capture_mu);
            captured.clear();
        }
        pending_fits.clear();

        const auto sel = select_clients(cfg, round);
        std::vector<DevicePartial> partials;
        std::vector<TimingRecord> records;
        try {
            switch (cfg.scheme) {
            case Scheme::Sp: run_sp(round, sel, out, partials, records); break;
            case Scheme::Parrot:
            case Scheme::SdDist: run_static(round, sel, out, partials, records); break;
            case Scheme::FaDist: run_pulling(round, sel, out, partials, records); break;
            case Scheme::RwDist: throw ConfigError("scheme rw-dist cannot be executed");
            }
            const auto agg = global_fold(partials);
            global = in.plugin->server_update(global, agg, ServerContext{round, cfg.total_clients,
                                                                         static_cast<int>(sel.selected.size())});
        } catch (...) {
            failed = true;
            throw;
        }

        for (const auto& rec : records) {
            history.record(rec);
        }
        out.timings = std::move(records);
        if (!pending_fits.empty()) {
            out.estimation_error = estimation_error(history, pending_fits, round);
        }
        for (double l : out.device_loads) {
            out.simulated_round_seconds = std::max(out.simulated_round_seconds, l);
        }

        out.ledger.peak_live_model_replicas = replicas.peak();
        if (store) {
            const auto s = store->stats();
            out.ledger.peak_live_state_entries = s.peak_live_cache_entries;
            out.ledger.state_bytes_disk = static_cast<std::int64_t>(s.bytes_on_disk);
            if (s.records > 0) {
                units.s_d = std::max(units.s_d, static_cast<std::int64_t>(s.bytes_on_disk) / s.records);
            }
        }
        if (in.holdout != nullptr) {
            out.evaluation = evaluate(get_params(global), *in.holdout);
        }
        out.new_global = global;
        ++next_round;
        out.wall_seconds = seconds_since(t0);
        return out;
    }
};

Simulation::Simulation(SimulationInputs inputs) : impl_(std::make_unique<Impl>(std::move(inputs))) {
    auto& in = impl_->in;
    in.cfg.validate();
    if (in.plugin == nullptr || in.train == nullptr) {
        throw ConfigError("simulation needs a plugin and a training dataset");
    }
    if (in.profiles.size() != static_cast<std::size_t>(in.cfg.total_clients)) {
        throw ConfigError("simulation needs one profile per client (" + std::to_string(in.cfg.total_clients) +
                          "), got " + std::to_string(in.profiles.size()));
    }
    for (std::size_t i = 0; i < in.profiles.size(); ++i) {
        if (in.profiles[i].client_id != static_cast<int>(i)) {
            throw ConfigError("client profiles must be indexed by client id");
        }
    }
    if (in.plugin->is_stateful() && in.state_dir.empty()) {
        throw ConfigError("stateful plugin '" + std::string(in.plugin->name()) + "' needs a state directory");
    }
    if (in.devices.empty()) {
        in.devices = make_device_models(in.cfg.num_devices, {}, false, DeviceModel{}.t_true,
                                        DeviceModel{}.b_true, 0.0);
    }
    impl_->global = in.initial_global;
    impl_->units.s_m = static_cast<std::int64_t>(get_params(in.initial_global).weights.byte_size() +
                                                 get_params(in.initial_global).bias.byte_size());
    impl_->open_store();
    impl_->start_executors();
}

Simulation::~Simulation() {
    impl_->stop_executors();
}

RoundOutcome Simulation::step() {
    return impl_->step();
}

bool Simulation::done() const noexcept {
    return impl_->next_round >= impl_->in.cfg.total_rounds;
}

int Simulation::next_round() const noexcept {
    return impl_->next_round;
}

const ParamBundle& Simulation::global() const noexcept {
    return impl_->global;
}

const TimingHistory& Simulation::history() const noexcept {
    return impl_->history;
}

const SimConfig& Simulation::config() const noexcept {
    return impl_->in.cfg;
}

StateStore* Simulation::state_store() noexcept {
    return impl_->store.get();
}

void Simulation::reopen_state_store() {
    if (!impl_->store) {
        return;
    }
    impl_->store.reset();
    impl_->open_store();
}

std::map<int, ClientState> Simulation::captured_states() const {
    std::lock_guard lock(impl_->capture_mu);
    return impl_->captured;
}

CostUnits Simulation::observed_units() const {
    return impl_->units;
}

std::vector<RoundOutcome> run(SimulationInputs inputs) {
    Simulation sim(std::move(inputs));
    std::vector<RoundOutcome> out;
    while (!sim.done()) {
        out.push_back(sim.step());
    }
    return out;
}

void write_round_header(std::ostream& out) {
    out << "round\tscheme\tscheduling\tsimulated_round_seconds\twall_seconds\tdevice_loads\ttrips_up\t"
           "trips_down\tbytes_avg_params\tbytes_special_params\tpayload_bytes\taccuracy\tloss\t"
           "estimation_error\n";
}

void write_round(std::ostream& out, const SimConfig& cfg, const RoundOutcome& o) {
    out << o.round << '\t' << to_string(cfg.scheme) << '\t'
        << (o.plan ? to_string(o.plan->mode) : std::string_view("-")) << '\t' << o.simulated_round_seconds
        << '\t' << o.wall_seconds << '\t';
    for (std::size_t k = 0; k < o.device_loads.size(); ++k) {
        out << (k ? "," : "") << o.device_loads[k];
    }
    const auto& l = o.ledger;
    out << '\t' << l.trips_up << '\t' << l.trips_down << '\t' << l.bytes_avg_params << '\t'
        << l.bytes_special_params << '\t' << l.payload_bytes_up + l.payload_bytes_down << '\t';
    if (o.evaluation) {
        out << o.evaluation->accuracy << '\t' << o.evaluation->loss;
    } else {
        out << "-\t-";
    }
    out << '\t';
    if (o.estimation_error) {
        out << *o.estimation_error;
    } else {
        out << '-';
    }
    out << '\n';
}

}  // namespace parrot
