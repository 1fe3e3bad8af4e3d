#include <parrot/experiment.hpp>

#include <parrot/errors.hpp>
#include <parrot/json_util.hpp>
#include <parrot/model.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace parrot {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
std::vector<T> get_list(const json& obj, const char* key, std::string_view where) {
    return json_util::get_or<std::vector<T>>(obj, key, {}, where);
}

DataSpec data_from_json(const json& j) {
    using namespace json_util;
    constexpr std::string_view where = "data";
    require_object(j, where);
    require_known_keys(j,
                       {"samples", "holdout", "features", "classes", "separation", "noise", "label_skew",
                        "quantity_skew", "min_samples_per_client"},
                       where);
    DataSpec d;
    d.samples = get_or<std::int64_t>(j, "samples", d.samples, where);
    d.holdout = get_or<std::int64_t>(j, "holdout", d.holdout, where);
    d.generator.n_features = get_or<int>(j, "features", d.generator.n_features, where);
    d.generator.n_classes = get_or<int>(j, "classes", d.generator.n_classes, where);
    d.generator.separation = get_or<double>(j, "separation", d.generator.separation, where);
    d.generator.noise = get_or<double>(j, "noise", d.generator.noise, where);
    auto optional_alpha = [&](const char* key) -> std::optional<double> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) {
            return std::nullopt;
        }
        const auto a = get_or<double>(j, key, 0.0, where);
        if (!(a > 0.0)) {
            throw ConfigError(std::string("data.") + key + ": Dirichlet alpha must be positive");
        }
        return a;
    };
    d.partition.label_skew = optional_alpha("label_skew");
    d.partition.quantity_skew = optional_alpha("quantity_skew");
    d.partition.min_samples_per_client =
        get_or<std::int64_t>(j, "min_samples_per_client", d.partition.min_samples_per_client, where);
    if (d.samples < 1) throw ConfigError("data.samples must be positive");
    if (d.holdout < 0) throw ConfigError("data.holdout must be non-negative");
    if (d.generator.n_features < 1) throw ConfigError("data.features must be positive");
    if (d.generator.n_classes < 2) throw ConfigError("data.classes must be at least 2");
    if (d.partition.min_samples_per_client < 1) throw ConfigError("data.min_samples_per_client must be positive");
    return d;
}

json data_to_json(const DataSpec& d) {
    json j{{"samples", d.samples},
           {"holdout", d.holdout},
           {"features", d.generator.n_features},
           {"classes", d.generator.n_classes},
           {"separation", d.generator.separation},
           {"noise", d.generator.noise},
           {"min_samples_per_client", d.partition.min_samples_per_client}};
    j["label_skew"] = d.partition.label_skew ? json(*d.partition.label_skew) : json(nullptr);
    j["quantity_skew"] = d.partition.quantity_skew ? json(*d.partition.quantity_skew) : json(nullptr);
    return j;
}

DeviceSpec devices_from_json(const json& j) {
    using namespace json_util;
    constexpr std::string_view where = "devices";
    require_object(j, where);
    require_known_keys(j, {"hetero_ratios", "dynamic", "t_sample", "b", "noise"}, where);
    DeviceSpec d;
    d.hetero_ratios = get_list<double>(j, "hetero_ratios", where);
    d.dynamic = get_or<bool>(j, "dynamic", d.dynamic, where);
    d.t_sample = get_or<double>(j, "t_sample", d.t_sample, where);
    d.b = get_or<double>(j, "b", d.b, where);
    d.noise = get_or<double>(j, "noise", d.noise, where);
    for (double eta : d.hetero_ratios) {
        if (!(eta >= 0.0)) throw ConfigError("devices.hetero_ratios: ratios must be non-negative");
    }
    if (!(d.t_sample > 0.0)) throw ConfigError("devices.t_sample must be positive");
    if (!(d.b >= 0.0)) throw ConfigError("devices.b must be non-negative");
    if (!(d.noise >= 0.0)) throw ConfigError("devices.noise must be non-negative");
    return d;
}

json devices_to_json(const DeviceSpec& d) {
    return json{{"hetero_ratios", d.hetero_ratios}, {"dynamic", d.dynamic}, {"t_sample", d.t_sample},
                {"b", d.b}, {"noise", d.noise}};
}

SweepSpec sweep_from_json(const json& j) {
    using namespace json_util;
    constexpr std::string_view where = "sweep";
    require_object(j, where);
    require_known_keys(j, {"scheme", "scheduling", "num_devices", "dynamic"}, where);
    SweepSpec s;
    for (const auto& name : get_list<std::string>(j, "scheme", where)) {
        s.schemes.push_back(parse_scheme(name));
    }
    for (const auto& name : get_list<std::string>(j, "scheduling", where)) {
        s.scheduling.push_back(parse_scheduling(name));
    }
    s.num_devices = get_list<int>(j, "num_devices", where);
    s.dynamic = get_list<bool>(j, "dynamic", where);
    return s;
}

json sweep_to_json(const SweepSpec& s) {
    json j = json::object();
    if (!s.schemes.empty()) {
        auto& a = j["scheme"] = json::array();
        for (auto v : s.schemes) a.push_back(std::string(to_string(v)));
    }
    if (!s.scheduling.empty()) {
        auto& a = j["scheduling"] = json::array();
        for (auto v : s.scheduling) a.push_back(std::string(to_string(v)));
    }
    if (!s.num_devices.empty()) j["num_devices"] = s.num_devices;
    if (!s.dynamic.empty()) j["dynamic"] = s.dynamic;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    out << text;
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json ledger_to_json(const CostLedger& l) {
    return json{{"trips_up", l.trips_up},
                {"trips_down", l.trips_down},
                {"bytes_avg_params", l.bytes_avg_params},
                {"bytes_special_params", l.bytes_special_params},
                {"peak_live_model_replicas", l.peak_live_model_replicas},
                {"peak_live_state_entries", l.peak_live_state_entries},
                {"state_bytes_disk", l.state_bytes_disk}};
}

}  // namespace

ExperimentSpec experiment_from_json(const json& j) {
    using namespace json_util;
    require_object(j, "experiment");
    require_known_keys(j, {"sim", "data", "model", "algorithm", "devices", "output", "sweep"}, "experiment");
    ExperimentSpec spec;
    if (!j.contains("sim")) {
        throw ConfigError("experiment.sim: missing required section");
    }
    spec.sim = sim_config_from_json(j.at("sim"));
    if (j.contains("data")) spec.data = data_from_json(j.at("data"));
    if (j.contains("model")) {
        const auto& m = j.at("model");
        require_object(m, "model");
        require_known_keys(m, {"init_scale"}, "model");
        spec.init_scale = get_or<double>(m, "init_scale", spec.init_scale, "model");
        if (!(spec.init_scale >= 0.0)) throw ConfigError("model.init_scale must be non-negative");
    }
    if (j.contains("algorithm")) spec.algorithm = plugin_config_from_json(j.at("algorithm"));
    if (j.contains("devices")) spec.devices = devices_from_json(j.at("devices"));
    if (j.contains("output")) {
        const auto& o = j.at("output");
        require_object(o, "output");
        require_known_keys(o, {"dir"}, "output");
        spec.output_dir = get_or<std::string>(o, "dir", spec.output_dir, "output");
    }
    if (j.contains("sweep")) spec.sweep = sweep_from_json(j.at("sweep"));
    if (spec.data.samples < static_cast<std::int64_t>(spec.sim.total_clients) *
                               spec.data.partition.min_samples_per_client) {
        throw ConfigError("data.samples is too small for sim.total_clients clients");
    }
    return spec;
}

json experiment_to_json(const ExperimentSpec& spec) {
    json j;
    j["sim"] = sim_config_to_json(spec.sim);
    j["data"] = data_to_json(spec.data);
    j["model"] = json{{"init_scale", spec.init_scale}};
    j["algorithm"] = plugin_config_to_json(spec.algorithm);
    j["devices"] = devices_to_json(spec.devices);
    j["output"] = json{{"dir", spec.output_dir}};
    if (!spec.sweep.empty()) {
        j["sweep"] = sweep_to_json(spec.sweep);
    }
    return j;
}

ExperimentSpec load_experiment(const fs::path& path) {
    return experiment_from_json(json_util::read_json_file(path.string()));
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const fs::path& out_dir) {
    spec.sim.validate();
    fs::create_directories(out_dir);
    write_text(out_dir / "spec.json", experiment_to_json(spec).dump(2) + "\n");

    const auto& cfg = spec.sim;
    const auto train = generate(spec.data.samples, spec.data.generator, cfg.seed);
    std::optional<SyntheticDataset> holdout;
    if (spec.data.holdout > 0) {
        holdout = sample_like(train, spec.data.holdout, cfg.seed);
    }
    const auto plugin = make_plugin(spec.algorithm);
    const auto init = ModelParams::random(spec.data.generator.n_classes, spec.data.generator.n_features,
                                          spec.init_scale, cfg.seed);

    SimulationInputs in;
    in.cfg = cfg;
    in.plugin = plugin.get();
    in.train = &train;
    in.holdout = holdout ? &*holdout : nullptr;
    in.profiles = partition(train, cfg.total_clients, spec.data.partition, cfg.seed);
    in.devices = make_device_models(cfg.num_devices, spec.devices.hetero_ratios, spec.devices.dynamic,
                                    spec.devices.t_sample, spec.devices.b, spec.devices.noise);
    in.initial_global = plugin->initial_global(init);
    if (plugin->is_stateful()) {
        in.state_dir = out_dir / "state";
        fs::remove_all(in.state_dir);
    }

    ExperimentResult result;
    std::ofstream rounds(out_dir / "rounds.tsv", std::ios::binary);
    std::ofstream plans(out_dir / "plans.tsv", std::ios::binary);
    if (!rounds || !plans) {
        throw Error("cannot write results into '" + out_dir.string() + "'");
    }
    rounds.precision(10);
    plans.precision(10);
    write_round_header(rounds);
    write_plan_header(plans);

    Simulation sim(std::move(in));
    while (!sim.done()) {
        auto o = sim.step();
        write_round(rounds, cfg, o);
        if (o.plan) {
            write_plan(plans, *o.plan);
        }
        o.new_global = ParamBundle{};  // the final global is kept by the simulation
        result.rounds.push_back(std::move(o));
    }
    sim.history().export_tsv(out_dir / "timings.tsv");
    result.units = sim.observed_units();

    // Summary
    std::vector<double> round_secs;
    std::vector<double> wall_secs;
    std::vector<double> est_errors;
    std::int64_t trips = 0;
    std::int64_t bytes = 0;
    std::vector<std::string> mismatches;
    const auto expected = expected_costs(cfg.scheme, cfg.total_clients, cfg.concurrent_clients,
                                         cfg.num_devices, result.units);
    for (const auto& o : result.rounds) {
        round_secs.push_back(o.simulated_round_seconds);
        wall_secs.push_back(o.wall_seconds);
        if (o.estimation_error) {
            est_errors.push_back(*o.estimation_error);
        }
        trips += o.ledger.trips_up + o.ledger.trips_down;
        bytes += o.ledger.payload_bytes_up + o.ledger.payload_bytes_down;
        const auto rep = reconcile(o.ledger, expected);
        for (const auto& m : rep.mismatches) {
            mismatches.push_back("round " + std::to_string(o.round) + ": " + m);
        }
    }
    const auto final_eval = result.rounds.empty() ? std::nullopt : result.rounds.back().evaluation;

    json s;
    s["arm"] = json{{"scheme", std::string(to_string(cfg.scheme))},
                    {"scheduling", std::string(to_string(cfg.scheduling))},
                    {"num_devices", cfg.num_devices},
                    {"concurrent_clients", cfg.concurrent_clients},
                    {"total_clients", cfg.total_clients},
                    {"total_rounds", cfg.total_rounds},
                    {"dynamic", spec.devices.dynamic},
                    {"hetero_ratios", spec.devices.hetero_ratios},
                    {"algorithm", spec.algorithm.name},
                    {"seed", cfg.seed},
                    {"clock", std::string(to_string(cfg.clock))}};
    s["final_accuracy"] = final_eval ? json(final_eval->accuracy) : json(nullptr);
    s["final_loss"] = final_eval ? json(final_eval->loss) : json(nullptr);
    s["mean_round_seconds"] = mean(round_secs);
    s["mean_wall_seconds"] = mean(wall_secs);
    s["mean_estimation_error"] = est_errors.empty() ? json(nullptr) : json(mean(est_errors));
    s["total_trips"] = trips;
    s["total_payload_bytes"] = bytes;
    s["units"] = json{{"s_m", result.units.s_m}, {"s_a", result.units.s_a}, {"s_e", result.units.s_e},
                      {"s_d", result.units.s_d}};
    s["expected_per_round"] = ledger_to_json(expected);
    s["cost_mismatches"] = mismatches;
    result.summary = s;
    write_text(out_dir / "summary.json", s.dump(2) + "\n");

    std::ostringstream txt;
    txt.precision(6);
    txt << "scheme            " << to_string(cfg.scheme) << "\n"
        << "scheduling        " << to_string(cfg.scheduling) << "\n"
        << "devices           " << cfg.num_devices << "\n"
        << "clients           " << cfg.concurrent_clients << " of " << cfg.total_clients << " per round\n"
        << "rounds            " << cfg.total_rounds << "\n"
        << "algorithm         " << spec.algorithm.name << "\n";
    if (final_eval) {
        txt << "final accuracy    " << final_eval->accuracy << "\n"
            << "final loss        " << final_eval->loss << "\n";
    }
    txt << "mean round time   " << mean(round_secs) << " s (simulated)\n"
        << "total trips       " << trips << "\n"
        << "total bytes       " << bytes << "\n";
    if (!est_errors.empty()) {
        txt << "mean est. error   " << mean(est_errors) << "\n";
    }
    txt << "cost model        " << (mismatches.empty() ? "consistent" : mismatches.front()) << "\n";
    write_text(out_dir / "summary.txt", txt.str());
    return result;
}

std::vector<SweepArm> expand_sweep(const ExperimentSpec& spec) {
    const auto& sw = spec.sweep;
    auto or_base = [](const auto& axis, auto base) {
        using T = std::decay_t<decltype(base)>;
        return axis.empty() ? std::vector<T>{base} : std::vector<T>(axis.begin(), axis.end());
    };
    const auto schemes = or_base(sw.schemes, spec.sim.scheme);
    const auto modes = or_base(sw.scheduling, spec.sim.scheduling);
    const auto ks = or_base(sw.num_devices, spec.sim.num_devices);
    const auto dyns = or_base(sw.dynamic, spec.devices.dynamic);

    std::vector<SweepArm> arms;
    for (auto scheme : schemes) {
        for (auto mode : modes) {
            for (int k : ks) {
                for (bool dyn : dyns) {
                    SweepArm arm;
                    arm.spec = spec;
                    arm.spec.sweep = SweepSpec{};
                    arm.spec.sim.scheme = scheme;
                    arm.spec.sim.scheduling = mode;
                    arm.spec.sim.num_devices = scheme == Scheme::Sp       ? 1
                                               : scheme == Scheme::SdDist ? spec.sim.concurrent_clients
                                                                          : k;
                    arm.spec.devices.dynamic = dyn;
                    arm.spec.sim.validate();
                    arm.name = std::string(to_string(scheme)) + "_" + std::string(to_string(mode)) + "_k" +
                               std::to_string(arm.spec.sim.num_devices) + (dyn ? "_dynamic" : "_static");
                    if (std::none_of(arms.begin(), arms.end(),
                                     [&](const SweepArm& a) { return a.name == arm.name; })) {
                        arms.push_back(std::move(arm));
                    }
                }
            }
        }
    }
    return arms;
}

void run_sweep(const ExperimentSpec& spec, const fs::path& out_dir) {
    const auto arms = expand_sweep(spec);
    fs::create_directories(out_dir);
    write_text(out_dir / "spec.json", experiment_to_json(spec).dump(2) + "\n");
    std::ostringstream table;
    table.precision(10);
    table << "arm\tscheme\tscheduling\tnum_devices\tdynamic\tmean_round_seconds\tfinal_accuracy\t"
             "mean_estimation_error\ttotal_trips\ttotal_payload_bytes\n";
    for (const auto& arm : arms) {
        const auto r = run_experiment(arm.spec, out_dir / arm.name);
        const auto& s = r.summary;
        auto num_or_dash = [](const json& v) {
            if (v.is_null()) return std::string("-");
            std::ostringstream o;
            o.precision(10);
            o << v.get<double>();
            return o.str();
        };
        table << arm.name << '\t' << to_string(arm.spec.sim.scheme) << '\t'
              << to_string(arm.spec.sim.scheduling) << '\t' << arm.spec.sim.num_devices << '\t'
              << (arm.spec.devices.dynamic ? 1 : 0) << '\t' << s["mean_round_seconds"].get<double>() << '\t'
              << num_or_dash(s["final_accuracy"]) << '\t' << num_or_dash(s["mean_estimation_error"]) << '\t'
              << s["total_trips"].get<std::int64_t>() << '\t' << s["total_payload_bytes"].get<std::int64_t>()
              << '\n';
    }
    write_text(out_dir / "sweep_summary.tsv", table.str());
}

namespace {

struct ArmData {
    std::string name;
    json summary;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name_) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name_) return static_cast<int>(i);
        }
        throw Error("rounds.tsv of '" + name + "' lacks column '" + std::string(name_) + "'");
    }

    std::vector<std::optional<double>> values(std::string_view col) const {
        const auto c = static_cast<std::size_t>(column(col));
        std::vector<std::optional<double>> out;
        for (const auto& r : rows) {
            if (c >= r.size() || r[c] == "-") {
                out.push_back(std::nullopt);
            } else {
                out.push_back(std::stod(r[c]));
            }
        }
        return out;
    }
};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, '\t')) {
        out.push_back(cell);
    }
    return out;
}

std::optional<ArmData> load_arm(const fs::path& dir) {
    if (!fs::exists(dir / "summary.json") || !fs::exists(dir / "rounds.tsv")) {
        return std::nullopt;
    }
    ArmData a;
    a.name = dir.filename().string();
    a.summary = json_util::read_json_file((dir / "summary.json").string());
    std::ifstream in(dir / "rounds.tsv");
    std::string line;
    if (std::getline(in, line)) {
        a.header = split_tabs(line);
    }
    while (std::getline(in, line)) {
        if (!line.empty()) {
            a.rows.push_back(split_tabs(line));
        }
    }
    return a;
}

// Descriptor of an arm with the scheduling mode left out, for pairing.
std::string pairing_key(const json& arm) {
    json k = arm;
    k.erase("scheduling");
    return k.dump();
}

}  // namespace

std::string report_directory(const fs::path& dir) {
    std::vector<ArmData> arms;
    if (fs::is_directory(dir)) {
        if (auto a = load_arm(dir)) {
            arms.push_back(std::move(*a));
        }
        std::vector<fs::path> subdirs;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_directory()) subdirs.push_back(e.path());
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto& p : subdirs) {
            if (auto a = load_arm(p)) arms.push_back(std::move(*a));
        }
    }
    if (arms.empty()) {
        return "no results in '" + dir.string() + "'\n";
    }

    std::ostringstream out;
    out.precision(6);

    // Round time against the number of devices.
    out << "## round time vs devices\n"
        << "scheme\tscheduling\tdynamic\tnum_devices\tmean_round_seconds\n";
    {
        std::vector<std::tuple<std::string, std::string, bool, int, double>> rows;
        for (const auto& a : arms) {
            const auto& arm = a.summary.at("arm");
            rows.emplace_back(arm.at("scheme").get<std::string>(), arm.at("scheduling").get<std::string>(),
                              arm.at("dynamic").get<bool>(), arm.at("num_devices").get<int>(),
                              a.summary.at("mean_round_seconds").get<double>());
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [scheme, mode, dyn, k, t] : rows) {
            out << scheme << '\t' << mode << '\t' << (dyn ? 1 : 0) << '\t' << k << '\t' << t << '\n';
        }
    }

    // Estimation error by round.
    std::vector<const ArmData*> with_error;
    for (const auto& a : arms) {
        if (!a.summary.at("mean_estimation_error").is_null()) with_error.push_back(&a);
    }
    out << "\n## estimation error vs round\n";
    if (with_error.empty()) {
        out << "(no arm fitted a workload model)\n";
    } else {
        out << "round";
        for (const auto* a : with_error) out << '\t' << a->name;
        out << '\n';
        std::size_t n = 0;
        for (const auto* a : with_error) n = std::max(n, a->rows.size());
        for (std::size_t r = 0; r < n; ++r) {
            out << r;
            for (const auto* a : with_error) {
                const auto v = a->values("estimation_error");
                out << '\t';
                if (r < v.size() && v[r]) out << *v[r]; else out << '-';
            }
            out << '\n';
        }
    }

    // Scheduled against evenly divided rounds, paired by everything but the mode.
    out << "\n## scheduled vs uniform makespan\n";
    bool any_pair = false;
    for (const auto& base : arms) {
        if (base.summary.at("arm").at("scheduling") != "uniform") continue;
        for (const auto& other : arms) {
            if (&other == &base || other.summary.at("arm").at("scheduling") == "uniform" ||
                pairing_key(other.summary.at("arm")) != pairing_key(base.summary.at("arm"))) {
                continue;
            }
            any_pair = true;
            out << other.name << " / " << base.name << "\nround\tuniform\tscheduled\tratio\n";
            const auto u = base.values("simulated_round_seconds");
            const auto s = other.values("simulated_round_seconds");
            std::vector<double> ratios;
            for (std::size_t r = 0; r < std::min(u.size(), s.size()); ++r) {
                const double ratio = *u[r] > 0.0 ? *s[r] / *u[r] : 0.0;
                ratios.push_back(ratio);
                out << r << '\t' << *u[r] << '\t' << *s[r] << '\t' << ratio << '\n';
            }
            out << "mean ratio\t" << mean(ratios) << "\n";
        }
    }
    if (!any_pair) {
        out << "(no arms differing only in scheduling mode)\n";
    }

    // Observed counters against the cost model.
    out << "\n## communication vs cost model\n"
        << "arm\tscheme\ttrips_up\texpected\tbytes_avg_params\texpected\tbytes_special_params\texpected\tstatus\n";
    for (const auto& a : arms) {
        const auto up = a.values("trips_up");
        const auto avg = a.values("bytes_avg_params");
        const auto special = a.values("bytes_special_params");
        auto mean_of = [](const std::vector<std::optional<double>>& v) {
            std::vector<double> x;
            for (const auto& e : v) if (e) x.push_back(*e);
            return mean(x);
        };
        const auto& exp = a.summary.at("expected_per_round");
        out << a.name << '\t' << a.summary.at("arm").at("scheme").get<std::string>() << '\t' << mean_of(up)
            << '\t' << exp.at("trips_up").get<std::int64_t>() << '\t' << mean_of(avg) << '\t'
            << exp.at("bytes_avg_params").get<std::int64_t>() << '\t' << mean_of(special) << '\t'
            << exp.at("bytes_special_params").get<std::int64_t>() << '\t'
            << (a.summary.at("cost_mismatches").empty() ? "ok" : "MISMATCH") << '\n';
    }
    return out.str();
}

}  // namespace parrot
