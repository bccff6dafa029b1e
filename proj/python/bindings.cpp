#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "logicdiag/error.hpp"
#include "logicdiag/pipeline.hpp"

namespace py = pybind11;
using namespace logicdiag;

namespace {

RuleFamilies families_from(const std::string& text) {
    RuleFamilies f{false, false, false};
    for (char c : text) {
        switch (c) {
            case 'C': f.composition = true; break;
            case 'D': f.decomposition = true; break;
            case 'E': f.exclusion = true; break;
            default: throw ValidationError("families must be a subset of CDE, got \"" + text + "\"");
        }
    }
    return f;
}

RevisionConfig config_from(const py::dict& d) {
    RevisionConfig cfg;
    for (const auto& [k, v] : d) {
        const auto key = py::cast<std::string>(k);
        if (key == "strategy") cfg.strategy = parse_strategy(py::cast<std::string>(v));
        else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(v);
        else if (key == "q") cfg.fuzzy.q = py::cast<int>(v);
        else if (key == "threshold") cfg.binarize_threshold = py::cast<double>(v);
        else if (key == "tau") cfg.tau = py::cast<double>(v);
        else if (key == "max_cardinality") cfg.max_cardinality = py::cast<std::size_t>(v);
        else if (key == "threads") cfg.threads = py::cast<unsigned>(v);
        else if (key == "families") cfg.families = families_from(py::cast<std::string>(v));
        else if (key == "grouping") {
            const auto g = py::cast<std::string>(v);
            if (g == "family") cfg.fuzzy.grouping = ConflictGrouping::PerFamily;
            else if (g == "rule") cfg.fuzzy.grouping = ConflictGrouping::PerGroundRule;
            else throw ValidationError("grouping must be family or rule, got \"" + g + "\"");
        } else {
            throw ValidationError("unknown config key \"" + key + "\"");
        }
    }
    cfg.validate();
    return cfg;
}

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

class Session {
public:
    Session(const std::string& hierarchy_text, const py::dict& config)
        : engine_(std::make_unique<RevisionEngine>(parse_hierarchy(hierarchy_text), config_from(config))) {}

    py::tuple revise(const py::array& input) const {
        // Holding a reference keeps the engine alive if close() races this call.
        const auto held = engine();
        const auto& e = *held;
        if (!py::isinstance<py::array_t<float>>(input)) {
            throw py::type_error("probabilities must be a float32 array");
        }
        if (input.ndim() != 2) {
            throw py::value_error("probabilities must have shape (N, " + std::to_string(e.hierarchy().size()) + ")");
        }
        if (!(input.flags() & py::array::c_style)) {
            throw py::value_error("probabilities must be C-contiguous");
        }
        const auto rows = static_cast<std::size_t>(input.shape(0));
        const auto cols = static_cast<std::size_t>(input.shape(1));
        const std::span<const float> values(static_cast<const float*>(input.data()), rows * cols);

        RevisionResult result;
        {
            py::gil_scoped_release release;
            result = e.revise(ProbBatch(rows, cols, values));
        }
        py::array_t<std::int32_t> labels(static_cast<py::ssize_t>(rows));
        std::copy(result.leaf_labels.begin(), result.leaf_labels.end(), labels.mutable_data());
        return py::make_tuple(labels, to_python(stats_to_json(result.stats, e.hierarchy())));
    }

    py::list concept_names() const {
        py::list out;
        for (const auto& n : engine()->hierarchy().nodes()) out.append(n.name);
        return out;
    }

    void close() { engine_.reset(); }
    bool closed() const { return !engine_; }

private:
    std::shared_ptr<const RevisionEngine> engine() const {
        if (!engine_) throw py::value_error("session is closed");
        return engine_;
    }

    std::shared_ptr<const RevisionEngine> engine_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pseudo-label revision against a label hierarchy";
    m.attr("__version__") = LOGICDIAG_VERSION;

    auto base = py::register_exception<Error>(m, "LogicDiagError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());

    py::class_<Session>(m, "Session")
        .def(py::init<const std::string&, const py::dict&>(), py::arg("hierarchy_text"),
             py::arg("config") = py::dict())
        .def("revise", &Session::revise, py::arg("probs"),
             "Revise an (N, concepts) float32 array; returns (int32 leaf ids with -1 = ignore, stats dict).")
        .def_property_readonly("concepts", &Session::concept_names)
        .def_property_readonly("closed", &Session::closed)
        .def("close", &Session::close)
        .def("__enter__", [](Session& s) -> Session& { return s; })
        .def("__exit__", [](Session& s, py::args) { s.close(); });
}
