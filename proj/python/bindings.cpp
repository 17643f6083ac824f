#include "covisac/harness.hpp"
#include "covisac/oracles.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace covisac;

namespace {

py::dict audit_dict(const ConstraintAudit& a) {
    py::dict d;
    for (const auto& e : a.entries) d[py::str(e.name)] = e.slack;
    return d;
}

py::dict design_dict(const BeamformerSolution& s, const PerformanceReport& r, const ConstraintAudit& a) {
    py::dict d;
    d["v"] = s.vFull;
    d["w"] = s.w;
    if (s.kind == BeamKind::Hybrid) {
        d["v_rf"] = s.vRf;
        d["v_d"] = s.vD;
    }
    d["report"] = r;
    d["audit"] = audit_dict(a);
    d["min_slack"] = a.minSlack();
    return d;
}

py::dict row_dict(const ResultRow& r) {
    py::dict d;
    d["scheme"] = to_string(r.scheme);
    d["sweep_var"] = to_string(r.sweepVar);
    d["sweep_value"] = r.sweepValue;
    d["trial_count"] = r.trialCount;
    d["infeasible_count"] = r.infeasibleCount;
    d["audit_fail_count"] = r.auditFailCount;
    d["covert_rate_mean"] = r.covertRateMean;
    d["covert_rate_std"] = r.covertRateStd;
    d["overt_rate_min_mean"] = r.overtRateMinMean;
    d["pE_mean"] = r.pEMean;
    d["kl_mean"] = r.klMean;
    d["sensing_sinr_db_mean"] = r.sensingSinrDbMean;
    d["pd_mean"] = r.pdMean;
    d["runtime_ms_mean"] = r.runtimeMsMean;
    d["pfa"] = r.pfa;
    return d;
}

HypothesisStats make_stats(double kappa0, double kappa1) {
    HypothesisStats s;
    s.kappa0 = kappa0;
    s.kappa1 = kappa1;
    s.z = kappa1 / kappa0;
    return s;
}

}  // namespace

PYBIND11_MODULE(_covisac, m) {
    m.doc() = "Covert ISAC beamforming designs";

    static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<SystemConfig>(m, "SystemConfig")
        .def(py::init<>())
        .def_readwrite("mt", &SystemConfig::mt)
        .def_readwrite("mr", &SystemConfig::mr)
        .def_readwrite("carols", &SystemConfig::uCarols)
        .def_readwrite("rf_chains", &SystemConfig::nRf)
        .def_readwrite("power", &SystemConfig::totalPower)
        .def_readwrite("noise_carol", &SystemConfig::noiseCarol)
        .def_readwrite("noise_willie", &SystemConfig::noiseWillie)
        .def_readwrite("noise_bob", &SystemConfig::noiseBob)
        .def_readwrite("noise_radar", &SystemConfig::noiseRadar)
        .def_readwrite("qos_carol", &SystemConfig::qosCarol)
        .def_readwrite("qos_willie", &SystemConfig::qosWillie)
        .def_readwrite("eps", &SystemConfig::covertEps)
        .def_readwrite("gamma_db", &SystemConfig::sensingGammaDb)
        .def_readwrite("angular_samples", &SystemConfig::angularSamples)
        .def("validate", &SystemConfig::validate);

    py::class_<SensingScene>(m, "SensingScene")
        .def_readonly("target_angle", &SensingScene::targetAngle)
        .def_property_readonly("clutter_angles", [](const SensingScene& s) {
            std::vector<double> a;
            for (const auto& c : s.clutters) a.push_back(c.angle);
            return a;
        });
    m.def("default_scene", &default_scene, py::arg("seed"), py::arg("clutter_power_db") = 20.0);

    py::class_<ChannelSet>(m, "ChannelSet")
        .def_readonly("h", &ChannelSet::h)
        .def_readonly("willie_est", &ChannelSet::willieEst)
        .def_readonly("willie_radius", &ChannelSet::willieRadius);
    m.def("draw_channels", &draw_channels, py::arg("config"), py::arg("paths"), py::arg("willie_radius"),
          py::arg("seed"));

    py::class_<PerformanceReport>(m, "PerformanceReport")
        .def_readonly("covert_rate", &PerformanceReport::covertRate)
        .def_readonly("overt_rates", &PerformanceReport::overtRates)
        .def_readonly("pE", &PerformanceReport::pE)
        .def_readonly("pE_bound", &PerformanceReport::pEBound)
        .def_readonly("kl", &PerformanceReport::klDiv)
        .def_readonly("sensing_sinr", &PerformanceReport::sensingSinr)
        .def_readonly("detection_prob", &PerformanceReport::detectionProb)
        .def_property_readonly("beampattern", [](const PerformanceReport& r) {
            std::vector<std::pair<double, double>> out;
            for (const auto& b : r.beampattern) out.emplace_back(b.angleDeg, b.powerDb);
            return out;
        });

    m.def(
        "solve_fdbf",
        [](const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg, bool robust, bool sensing) {
            FdbfOptions o;
            o.robust = robust;
            o.sensing = sensing;
            const FdbfResult r = solve_fdbf(ch, scene, cfg, o);
            py::dict d = design_dict(r.solution, r.report, r.audit);
            d["sdp_objective"] = r.sdpObjective;
            d["max_rank1_ratio"] = r.maxRank1Ratio;
            d["iterations"] = r.trace.size();
            return d;
        },
        py::arg("channels"), py::arg("scene"), py::arg("config"), py::arg("robust") = false,
        py::arg("sensing") = true);

    m.def(
        "solve_hbf",
        [](const ChannelSet& ch, const SensingScene& scene, const SystemConfig& cfg, std::uint64_t seed,
           bool robust) {
            HbfOptions o;
            o.seed = seed;
            o.robust = robust;
            const HbfResult r = solve_hbf(ch, scene, cfg, o);
            py::dict d = design_dict(r.solution, r.report, r.audit);
            d["max_al_increase"] = r.maxAlIncrease;
            d["outer_iterations"] = r.trace.size();
            return d;
        },
        py::arg("channels"), py::arg("scene"), py::arg("config"), py::arg("seed") = 1, py::arg("robust") = false);

    m.def(
        "detection_error_exact",
        [](double k0, double k1) { return detection_error_exact(make_stats(k0, k1)); }, py::arg("kappa0"),
        py::arg("kappa1"));
    m.def(
        "kl_divergence",
        [](double k0, double k1) {
            const KlResult r = kl_divergence(make_stats(k0, k1));
            return py::make_tuple(r.divergence, r.pEBound);
        },
        py::arg("kappa0"), py::arg("kappa1"), "(divergence, Pinsker lower bound on pE)");
    m.def(
        "mc_willie_detector",
        [](double k0, double k1, std::uint64_t trials, std::uint64_t seed) {
            const McEstimate e = mc_willie_detector(make_stats(k0, k1), trials, seed);
            return py::make_tuple(e.pE, e.stdErr);
        },
        py::arg("kappa0"), py::arg("kappa1"), py::arg("trials"), py::arg("seed"));
    m.def("numeric_kl", &numeric_kl, py::arg("kappa0"), py::arg("kappa1"));
    m.def("solve_gamma_cap", &solve_gamma_cap, py::arg("eps"));
    m.def("detection_probability", &detection_probability, py::arg("sinr"), py::arg("pfa"));

    m.def(
        "run_experiment",
        [](const std::map<std::string, std::string>& config) {
            ExperimentSpec spec;
            apply_config(config, spec);
            std::vector<ResultRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_experiment(spec);
            }
            py::list out;
            for (const auto& r : rows) out.append(row_dict(r));
            return out;
        },
        py::arg("config"), "Runs a sweep described by config keys (same keys as the CLI config file).");
    m.def(
        "rows_to_csv",
        [](const std::map<std::string, std::string>& config) {
            ExperimentSpec spec;
            apply_config(config, spec);
            py::gil_scoped_release release;
            return rows_to_csv(run_experiment(spec));
        },
        py::arg("config"));
}
