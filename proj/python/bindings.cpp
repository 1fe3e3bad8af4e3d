#include <parrot/config.hpp>
#include <parrot/data.hpp>
#include <parrot/errors.hpp>
#include <parrot/estimate.hpp>
#include <parrot/experiment.hpp>
#include <parrot/metrics.hpp>
#include <parrot/schedule.hpp>
#include <parrot/selection.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;

namespace {

std::vector<parrot::WorkloadFit> exact_fits(const std::vector<double>& t_samples, const std::vector<double>& bs) {
    if (t_samples.size() != bs.size()) {
        throw parrot::ConfigError("t_samples and bs must have one entry per device");
    }
    std::vector<parrot::WorkloadFit> fits(t_samples.size());
    for (std::size_t k = 0; k < fits.size(); ++k) {
        fits[k].device_id = static_cast<int>(k);
        fits[k].t_sample = t_samples[k];
        fits[k].b = bs[k];
        fits[k].status = parrot::FitStatus::Ok;
    }
    return fits;
}

parrot::RoundPlan plan_from(const std::vector<std::vector<int>>& assignments) {
    parrot::RoundPlan plan;
    plan.assignments = assignments;
    return plan;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Simulation core: client selection, workload fitting, scheduling, cost model and experiments";

    // Translators run newest first, so the subclass goes last.
    py::register_exception<parrot::Error>(m, "SimulationError", PyExc_RuntimeError);
    py::register_exception<parrot::ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "select_clients",
        [](int total, int concurrent, std::uint64_t seed, int round, int total_rounds) {
            parrot::SimConfig cfg;
            cfg.total_clients = total;
            cfg.concurrent_clients = concurrent;
            cfg.total_rounds = total_rounds;
            cfg.warmup_rounds = 0;
            cfg.seed = seed;
            return parrot::select_clients(cfg, round).selected;
        },
        py::arg("total_clients"), py::arg("concurrent_clients"), py::arg("seed"), py::arg("round"),
        py::arg("total_rounds") = 1000000);

    m.def(
        "partition_sizes",
        [](std::int64_t n_samples, int num_clients, std::optional<double> quantity_skew,
           std::int64_t min_samples, std::uint64_t seed) {
            parrot::PartitionSpec spec;
            spec.quantity_skew = quantity_skew;
            spec.min_samples_per_client = min_samples;
            return parrot::partition_sizes(n_samples, num_clients, spec, seed);
        },
        py::arg("n_samples"), py::arg("num_clients"), py::arg("quantity_skew") = py::none(),
        py::arg("min_samples") = 1, py::arg("seed") = 0);

    m.def(
        "fit_workload",
        [](const std::vector<std::int64_t>& samples, const std::vector<double>& seconds) {
            if (samples.size() != seconds.size()) {
                throw parrot::ConfigError("samples and seconds differ in length");
            }
            std::vector<parrot::TimingRecord> recs;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                recs.push_back(parrot::TimingRecord{0, static_cast<int>(i), 0, samples[i], seconds[i]});
            }
            const auto fit = parrot::fit_points(recs);
            const char* status = fit.status == parrot::FitStatus::Ok                 ? "ok"
                                 : fit.status == parrot::FitStatus::DegenerateDesign ? "degenerate"
                                                                                     : "insufficient";
            return py::dict(py::arg("t_sample") = fit.t_sample, py::arg("b") = fit.b,
                            py::arg("status") = status);
        },
        py::arg("samples"), py::arg("seconds"));

    m.def(
        "schedule_greedy",
        [](const std::vector<std::int64_t>& sizes, const std::vector<double>& t_samples,
           const std::vector<double>& bs) {
            const auto profiles = parrot::profiles_from_sizes(sizes);
            std::vector<int> clients(sizes.size());
            for (std::size_t i = 0; i < clients.size(); ++i) clients[i] = static_cast<int>(i);
            return parrot::greedy_assign(0, clients, exact_fits(t_samples, bs), profiles).assignments;
        },
        py::arg("sizes"), py::arg("t_samples"), py::arg("bs"),
        "Greedy plan for clients 0..n-1; returns one client list per device.");

    m.def(
        "uniform_division",
        [](const std::vector<int>& clients, int num_devices) {
            return parrot::uniform_division(0, clients, num_devices).assignments;
        },
        py::arg("clients"), py::arg("num_devices"));

    m.def(
        "makespan",
        [](const std::vector<std::vector<int>>& assignments, const std::vector<std::int64_t>& sizes,
           const std::vector<double>& t_samples, const std::vector<double>& bs) {
            if (t_samples.size() != bs.size()) {
                throw parrot::ConfigError("t_samples and bs must have one entry per device");
            }
            std::vector<parrot::LinearTimeModel> truth;
            for (std::size_t k = 0; k < t_samples.size(); ++k) truth.push_back({t_samples[k], bs[k]});
            return parrot::makespan(plan_from(assignments), truth, parrot::profiles_from_sizes(sizes));
        },
        py::arg("assignments"), py::arg("sizes"), py::arg("t_samples"), py::arg("bs"));

    m.def(
        "report_time",
        [](double measured, double hetero_ratio, bool dynamic, int device_id, int round, int total_rounds) {
            parrot::DeviceModel d;
            d.device_id = device_id;
            d.hetero_ratio = hetero_ratio;
            d.dynamic = dynamic;
            return parrot::report_time(measured, d, round, total_rounds);
        },
        py::arg("measured"), py::arg("hetero_ratio") = 0.0, py::arg("dynamic") = false, py::arg("device_id") = 0,
        py::arg("round") = 0, py::arg("total_rounds") = 1);

    m.def(
        "expected_costs",
        [](const std::string& scheme, int m_total, int m_p, int k, std::int64_t s_m, std::int64_t s_a,
           std::int64_t s_e, std::int64_t s_d) {
            const auto c = parrot::expected_costs(parrot::parse_scheme(scheme), m_total, m_p, k,
                                                  parrot::CostUnits{s_m, s_a, s_e, s_d});
            return py::dict(py::arg("trips_up") = c.trips_up, py::arg("trips_down") = c.trips_down,
                            py::arg("bytes_avg_params") = c.bytes_avg_params,
                            py::arg("bytes_special_params") = c.bytes_special_params,
                            py::arg("peak_live_model_replicas") = c.peak_live_model_replicas,
                            py::arg("peak_live_state_entries") = c.peak_live_state_entries,
                            py::arg("state_bytes_disk") = c.state_bytes_disk);
        },
        py::arg("scheme"), py::arg("total_clients"), py::arg("concurrent_clients"), py::arg("num_devices"),
        py::arg("s_m") = 0, py::arg("s_a") = 0, py::arg("s_e") = 0, py::arg("s_d") = 0);

    m.def(
        "run_experiment",
        [](const std::string& spec_json, const std::filesystem::path& out_dir) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(spec_json);
            } catch (const nlohmann::json::exception& e) {
                throw parrot::ConfigError(std::string("spec is not valid JSON: ") + e.what());
            }
            const auto spec = parrot::experiment_from_json(j);
            std::string summary;
            {
                py::gil_scoped_release release;
                summary = parrot::run_experiment(spec, out_dir).summary.dump();
            }
            return summary;
        },
        py::arg("spec_json"), py::arg("out_dir"), "Runs one experiment; returns summary.json as a string.");

    m.def(
        "report", [](const std::filesystem::path& dir) { return parrot::report_directory(dir); },
        py::arg("dir"));
}
